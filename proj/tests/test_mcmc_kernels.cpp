#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mcmclab/error.hpp"
#include "mcmclab/mcmc_kernels.hpp"
#include "oracle_values.hpp"

using namespace mcmclab;
using doctest::Approx;

namespace {

std::shared_ptr<const TargetModel1D> normal() { return make_target("std_normal"); }

double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

}  // namespace

TEST_CASE("proposal variances follow the dimension scalings") {
  CHECK(ChainSpec(Algorithm::kRwm, ProductTarget(normal(), 11), 2.0, 1).proposal_variance() == Approx(0.4));
  CHECK(ChainSpec(Algorithm::kMala, ProductTarget(normal(), 27), 1.5, 1).proposal_variance() == Approx(0.75));
  CHECK_THROWS_AS(ChainSpec(Algorithm::kRwm, ProductTarget(normal(), 1), 1.0, 1), ContractViolation);
  CHECK_THROWS_AS(ChainSpec(Algorithm::kRwm, ProductTarget(normal(), 4), 0.0, 1), ContractViolation);
  CHECK_THROWS_AS(ChainSpec(Algorithm::kRwm, ProductTarget(normal(), 4), 1.0, 1, StartSpec::fixed({1.0})),
                  ContractViolation);
  CHECK(parse_algorithm("mala") == Algorithm::kMala);
  CHECK_THROWS_AS(parse_algorithm("hmc"), UsageError);
}

TEST_CASE("RWM acceptance ratio") {
  ProductTarget p(normal(), 2);
  const double z[] = {0.0, 0.0};
  const double y[] = {1.0, 1.0};
  CHECK(std::exp(rwm_log_ratio(p, z, y)) == Approx(oracle::kRwmAccept11).epsilon(1e-14));
  // Uphill moves have ratio >= 1.
  CHECK(rwm_log_ratio(p, y, z) >= 0.0);

  RngStream rng(1);
  ProductTarget q(make_target("logistic"), 5);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = 3.0 * rng.normal();
    for (auto& v : b) v = 3.0 * rng.normal();
    CHECK(rwm_log_ratio(q, a, b) == Approx(-rwm_log_ratio(q, b, a)).epsilon(1e-12));
  }
}

TEST_CASE("MALA Hastings ratio matches a four-term evaluation") {
  ProductTarget p(normal(), 1);
  const double z[] = {1.0};
  const double y[] = {0.5};
  CHECK(mala_log_ratio(p, z, y, 0.5) == Approx(oracle::kMalaLogRatio).epsilon(1e-12));
  // Proposal mean from z = 1 with variance 0.5.
  CHECK(z[0] + 0.25 * (-z[0]) == Approx(0.75));

  RngStream rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double a = 3.0 * rng.normal();
    const double b = 3.0 * rng.normal();
    const double var = 0.01 + 2.0 * rng.uniform();
    const double terms[] = {normal_logpdf(b, 0.0, 1.0), -normal_logpdf(a, 0.0, 1.0),
                            normal_logpdf(a, b - 0.5 * var * b, var), -normal_logpdf(b, a - 0.5 * var * a, var)};
    const double four = terms[0] + terms[1] + terms[2] + terms[3];
    // The four terms cancel, so compare on the scale of the largest one.
    double scale = 1.0;
    for (double t : terms) scale = std::max(scale, std::abs(t));
    const double za[] = {a};
    const double yb[] = {b};
    CHECK(mala_log_ratio(p, za, yb, var) == Approx(four).epsilon(1e-12).scale(scale));
  }

  // A flat density (zero gradient) reduces MALA to RWM: use the mode of a
  // normal for both points only at the mode itself.
  const double m[] = {0.0};
  CHECK(mala_log_ratio(p, m, m, 0.3) == Approx(rwm_log_ratio(p, m, m)));
}

TEST_CASE("steps are deterministic and keep the cached log-density") {
  for (auto alg : {Algorithm::kRwm, Algorithm::kMala}) {
    const ChainSpec spec(alg, ProductTarget(make_target("bimodal"), 6), 1.2, 9);
    ChainState s1 = make_state(spec, draw_start(spec, 0));
    ChainState s2 = s1;
    RngStream r1 = derive_stream(9, 0, 0), r2 = derive_stream(9, 0, 0);
    for (int i = 0; i < 500; ++i) {
      s1 = alg == Algorithm::kRwm ? rwm_step(s1, spec, r1) : mala_step(s1, spec, r1);
      s2 = alg == Algorithm::kRwm ? rwm_step(s2, spec, r2) : mala_step(s2, spec, r2);
      REQUIRE(s1.position == s2.position);
      CHECK(s1.log_pi == Approx(log_density(spec.target, s1.position)).epsilon(1e-12));
    }
    CHECK(s1.iteration == 500);
    CHECK(s1.accept_count <= s1.iteration);
    CHECK(s1.accept_count > 0);
  }
  const ChainSpec rwm(Algorithm::kRwm, ProductTarget(normal(), 3), 1.0, 1);
  ChainState s = make_state(rwm, {0.0, 0.0, 0.0});
  RngStream rng(1);
  CHECK_THROWS_AS(mala_step(s, rwm, rng), ContractViolation);
}

TEST_CASE("run_chain records and acceptance") {
  const ChainSpec spec(Algorithm::kRwm, ProductTarget(normal(), 50), 2.38, 3);
  const std::uint64_t none[] = {0};
  const auto empty = run_chain(spec, 0, none);
  CHECK(empty.records.size() == 1);
  CHECK(!empty.acceptance_rate().has_value());
  CHECK(empty.records[0].second == draw_start(spec, 0)[0]);

  const std::uint64_t rec[] = {0, 10, 100000};
  const auto run = run_chain(spec, 100000, rec);
  CHECK(run.records.size() == 3);
  CHECK(run.records[1].first == 10);
  CHECK(std::abs(*run.acceptance_rate() - 0.234) <= 0.02);
  const auto again = run_chain(spec, 100000, rec);
  CHECK(again.records == run.records);

  const std::uint64_t bad[] = {11};
  CHECK_THROWS_AS(run_chain(spec, 10, bad), ContractViolation);
}

TEST_CASE("MALA at d=50 reaches 0.574 acceptance for some scale") {
  bool above = false, below = false;
  for (double ell : {1.2, 1.4, 1.6, 1.8, 2.0}) {
    const ChainSpec spec(Algorithm::kMala, ProductTarget(normal(), 50), ell, 4);
    const std::uint64_t rec[] = {0};
    const double acc = *run_chain(spec, 20000, rec).acceptance_rate();
    above |= acc > 0.574;
    below |= acc < 0.574;
  }
  CHECK(above);
  CHECK(below);
}

TEST_CASE("RWM acceptance decreases in ell") {
  double prev = 1.0;
  for (double ell : {0.5, 1.0, 2.0, 3.0, 4.0}) {
    const ChainSpec spec(Algorithm::kRwm, ProductTarget(normal(), 20), ell, 5);
    const std::uint64_t rec[] = {0};
    const double acc = *run_chain(spec, 20000, rec).acceptance_rate();
    CHECK(acc < prev);
    prev = acc;
  }
}

TEST_CASE("speedup index") {
  CHECK(speedup_index(Algorithm::kRwm, 100, 1.5) == 150);
  CHECK(speedup_index(Algorithm::kMala, 1000, 2.0) == 20);
  CHECK(speedup_index(Algorithm::kMala, 64, 0.75) == 3);
  CHECK(speedup_index(Algorithm::kRwm, 7, 0.0) == 0);
  CHECK(speedup_index(Algorithm::kRwm, 10, 0.3) == 3);
  std::uint64_t prev = 0;
  for (int i = 0; i <= 1000; ++i) {
    const auto k = speedup_index(Algorithm::kMala, 37, 0.01 * i);
    CHECK(k >= prev);
    prev = k;
  }
  CHECK_THROWS_AS(speedup_index(Algorithm::kRwm, 10, -1.0), ContractViolation);
}

TEST_CASE("ensembles") {
  const ChainSpec spec(Algorithm::kRwm, ProductTarget(normal(), 4), 1.0, 6);
  const std::vector<std::vector<double>> starts{draw_start(spec, 0), draw_start(spec, 1)};
  const double zero[] = {0.0};
  const auto e0 = ensemble_run(spec, {starts[0]}, 2, zero);
  CHECK(e0.laws[0][0].atoms()[0] == starts[0][0]);
  CHECK(e0.laws[0][0].atoms()[1] == starts[0][0]);

  const double grid[] = {0.5, 1.0, 4.0};
  const auto a = ensemble_run(spec, starts, 16, grid, 1);
  const auto b = ensemble_run(spec, starts, 16, grid, 4);
  CHECK(a.iterations == std::vector<std::uint64_t>{2, 4, 16});
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::equal(a.laws[s][k].atoms().begin(), a.laws[s][k].atoms().end(), b.laws[s][k].atoms().begin()));
    }
  }
  CHECK(a.accepted == b.accepted);
  CHECK_THROWS_AS(ensemble_run(spec, starts, 1, grid), ContractViolation);
  CHECK_THROWS_AS(ensemble_run(spec, {}, 4, grid), ContractViolation);
}

TEST_CASE("pi-started ensembles stay at the reference law") {
  auto h = normal();
  const ChainSpec spec(Algorithm::kMala, ProductTarget(h, 10), 1.6, 7);
  std::vector<std::vector<double>> starts;
  for (std::size_t s = 0; s < 1024; ++s) starts.push_back(draw_start(spec, s));
  const double grid[] = {3.0};
  const auto ens = ensemble_run(spec, starts, 2, grid);
  std::vector<double> pooled;
  for (const auto& law : ens.laws) pooled.insert(pooled.end(), law[0].atoms().begin(), law[0].atoms().end());
  RngStream rng(8);
  const EmpiricalMeasure1D ref(sample_component(*h, rng, pooled.size()));
  RngStream nrng(9);
  const auto floor = estimate_noise_floor(EmpiricalMeasure1D(sample_component(*h, rng, 8 * pooled.size())),
                                          pooled.size(), nrng);
  CHECK(kr_distance(EmpiricalMeasure1D(pooled), ref).distance <= floor.level);
}

TEST_CASE("mixed starts fix the first coordinate") {
  const ChainSpec spec(Algorithm::kRwm, ProductTarget(normal(), 5), 1.0, 1, StartSpec::fixed_first(2.5));
  const auto x = draw_start(spec, 3);
  CHECK(x[0] == 2.5);
  CHECK(x[1] != x[2]);
  CHECK(draw_start(spec, 3) == x);
}
