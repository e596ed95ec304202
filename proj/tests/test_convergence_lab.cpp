#include <cmath>

#include "doctest.h"
#include "mcmclab/convergence_lab.hpp"
#include "mcmclab/error.hpp"
#include "oracle_values.hpp"

using namespace mcmclab;
using doctest::Approx;

namespace {

std::shared_ptr<const TargetModel1D> normal() { return make_target("std_normal"); }

DistanceCurve synthetic(std::vector<double> grid, std::vector<std::uint64_t> its, std::vector<double> dist) {
  DistanceCurve c;
  c.grid = std::move(grid);
  c.iterations = std::move(its);
  c.band.assign(dist.size(), 0.0);
  c.dist_hat = std::move(dist);
  return c;
}

}  // namespace

TEST_CASE("budget presets") {
  const auto s = budget_preset("small");
  const auto m = budget_preset("medium");
  const auto p = budget_preset("paper");
  CHECK(s.replicas < m.replicas);
  CHECK(m.replicas < p.replicas);
  for (const auto& b : {s, m, p}) CHECK(b.reference % b.replicas == 0);
  CHECK_THROWS_AS(budget_preset("huge"), UsageError);
  CHECK(default_t_grid() == std::vector<double>{0.125, 0.25, 0.5, 1, 2, 4, 8, 16});
}

TEST_CASE("convergence time from a curve") {
  const auto below = synthetic({1, 2, 4}, {10, 20, 40}, {0.1, 0.05, 0.01});
  const auto t0 = convergence_time(below, 0.2);
  CHECK(t0.bounded);
  CHECK(t0.iterations == 10.0);

  const auto never = synthetic({1, 2, 4}, {10, 20, 40}, {0.9, 0.5, 0.3});
  const auto t1 = convergence_time(never, 0.2);
  CHECK(!t1.bounded);
  CHECK(t1.diagnostics.find("0.3") != std::string::npos);

  const auto cross = synthetic({1, 2, 4}, {10, 20, 40}, {0.9, 0.3, 0.1});
  const auto t2 = convergence_time(cross, 0.2);
  CHECK(t2.bounded);
  CHECK(t2.iterations == Approx(30.0));
  CHECK(t2.t == Approx(3.0));

  // Nonincreasing in epsilon.
  double prev = 1e300;
  for (double eps : {0.15, 0.2, 0.3, 0.5, 0.8}) {
    const auto t = convergence_time(cross, eps);
    REQUIRE(t.bounded);
    CHECK(t.iterations <= prev);
    prev = t.iterations;
  }

  // A finer grid on a linear-in-iterations curve gives the same crossing.
  auto line = [](double it) { return 1.0 - it / 100.0; };
  const auto coarse = synthetic({1, 2, 3}, {30, 60, 90}, {line(30), line(60), line(90)});
  const auto fine = synthetic({1, 1.5, 2, 2.5, 3}, {30, 45, 60, 75, 90},
                              {line(30), line(45), line(60), line(75), line(90)});
  CHECK(convergence_time(coarse, 0.2).iterations == Approx(convergence_time(fine, 0.2).iterations));
}

TEST_CASE("log-log fit") {
  const std::vector<double> d{8, 16, 32, 64, 128};
  std::vector<double> t;
  for (double x : d) t.push_back(3.7 * x);
  CHECK(fit_loglog(d, t).slope == Approx(1.0).epsilon(1e-12));
  t.clear();
  for (double x : d) t.push_back(2.0 * std::cbrt(x));
  CHECK(fit_loglog(d, t).slope == Approx(1.0 / 3.0).epsilon(1e-12));
  const std::vector<double> same{8, 8};
  const std::vector<double> two{1, 2};
  CHECK_THROWS_AS(fit_loglog(same, two), ContractViolation);
}

TEST_CASE("ell rules") {
  CHECK(parse_ell_rule("2.38").kind == EllRule::Kind::kFixed);
  CHECK(parse_ell_rule("acc:0.574").value == Approx(0.574));
  CHECK(parse_ell_rule(to_string(EllRule::acceptance(0.574))).value == 0.574);
  CHECK_THROWS_AS(parse_ell_rule("fast"), UsageError);
  CHECK_THROWS_AS(parse_ell_rule("acc:1.5"), UsageError);
}

TEST_CASE("distance at time zero is the point-mass distance to h") {
  Budget b{256, 2, 4096, 1, 1};
  const double grid[] = {0.0};
  const auto curve = distance_curve(Algorithm::kRwm, normal(), 4, 2.38, grid, b, {.seed = 3});
  CHECK(curve.dist_hat[0] > 0.0);
  CHECK(std::abs(curve.dist_hat[0] - oracle::kPointMassToNormal) <= 2.0 * curve.band[0] + 0.02);
}

TEST_CASE("a long RWM run reaches the noise floor") {
  Budget b{8, 256, 2048, 1, 1};
  const double grid[] = {1.0, 5.0, 20.0};
  const auto curve = distance_curve(Algorithm::kRwm, normal(), 32, 2.38, grid, b, {.seed = 4, .epsilon = 0.2});
  CHECK(curve.dist_hat[2] <= curve.noise.level);
  CHECK(monotonicity_violations(curve).empty());
  CHECK(curve.acceptance == Approx(0.234).epsilon(0.1));
  CHECK_THROWS_AS(distance_curve(Algorithm::kRwm, normal(), 32, 2.38, grid, Budget{8, 256, 1000, 1, 1}, {}),
                  ContractViolation);
}

TEST_CASE("curves are reproducible across thread counts") {
  Budget b{4, 64, 256, 1, 1};
  const auto grid = default_t_grid();
  const auto a = distance_curve(Algorithm::kMala, normal(), 8, 1.6, grid, b, {.seed = 5, .threads = 1});
  const auto c = distance_curve(Algorithm::kMala, normal(), 8, 1.6, grid, b, {.seed = 5, .threads = 6});
  CHECK(a.dist_hat == c.dist_hat);
  CHECK(a.band == c.band);
}

TEST_CASE("RWM convergence time doubles from d=32 to d=64") {
  Budget b{32, 256, 2048, 1, 1};
  const std::size_t dims[] = {32, 64};
  ScalingOptions opt;
  opt.seed = 6;
  const auto fit = scaling_fit(Algorithm::kRwm, normal(), dims, EllRule::fixed(2.38), 0.2, b, opt);
  const double ratio = fit.T_eps[1] / fit.T_eps[0];
  MESSAGE("T(64)/T(32) = " << ratio << ", exponent CI [" << fit.slope_lo << ", " << fit.slope_hi << "]");
  CHECK(fit.slope_lo <= 1.0);
  CHECK(fit.slope_hi >= 1.0);
  CHECK(ratio == Approx(std::pow(2.0, fit.slope)));
}

TEST_CASE("diffusion-time curves collapse across dimensions") {
  Budget b{16, 256, 2048, 1, 1};
  const double grid[] = {0.5, 1.0, 2.0, 4.0};
  std::vector<DistanceCurve> curves;
  for (std::size_t d : {32, 64, 128}) {
    curves.push_back(distance_curve(Algorithm::kRwm, normal(), d, 2.38, grid, b, {.seed = 7}));
  }
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      for (std::size_t k = 0; k < 4; ++k) {
        CAPTURE(curves[i].d);
        CAPTURE(curves[j].d);
        CAPTURE(grid[k]);
        CHECK(std::abs(curves[i].dist_hat[k] - curves[j].dist_hat[k]) <=
              2.0 * std::hypot(curves[i].band[k], curves[j].band[k]));
      }
    }
  }
}

TEST_CASE("scaling fit reports the dimension that never converges") {
  Budget b{4, 32, 64, 1, 1};
  const std::size_t dims[] = {8, 16};
  ScalingOptions opt;
  opt.t_grid = {0.125, 0.25};
  try {
    scaling_fit(Algorithm::kRwm, normal(), dims, EllRule::fixed(2.38), 0.05, b, opt);
    FAIL("expected an unbounded time");
  } catch (const UnboundedTime& e) {
    CHECK(std::string(e.what()).find("d=8") != std::string::npos);
  }
}

TEST_CASE("calibration hits the requested acceptance") {
  const auto cal = calibrate_ell(Algorithm::kMala, normal(), 50, 0.574, 1);
  CHECK(std::abs(cal.acceptance - 0.574) <= 0.01);
  CHECK(cal.ell > 1.0);
  CHECK(cal.ell < 2.5);
}

TEST_CASE("acceptance sweeps") {
  const double one[] = {2.38};
  CHECK_THROWS_AS(acceptance_sweep(Algorithm::kRwm, normal(), 20, one, 100, 1), ContractViolation);
  const std::vector<double> grid{0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4};
  const auto a = acceptance_sweep(Algorithm::kRwm, normal(), 20, grid, 2000, 1, 1);
  const auto b = acceptance_sweep(Algorithm::kRwm, normal(), 20, grid, 2000, 1, 3);
  REQUIRE(a.rows.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(a.rows[i].acceptance == b.rows[i].acceptance);
    CHECK(a.rows[i].esjd == b.rows[i].esjd);
    CHECK(a.rows[i].proxy == Approx(20.0 * a.rows[i].esjd));
  }
  CHECK(a.rows.front().acceptance > a.rows.back().acceptance);
  CHECK(a.rows[a.best].proxy >= a.rows.front().proxy);
}

TEST_CASE("weak-limit comparison") {
  auto h = normal();
  const std::size_t dims[] = {8, 16};
  LimitOptions opt;
  opt.seed = 2;
  const auto at_zero = weak_limit_comparison(h, dims, 2.38, 0.0, 256, opt);
  for (const auto& row : at_zero) CHECK(row.kr == 0.0);

  const auto a = weak_limit_comparison(h, dims, 2.38, 0.5, 512, opt);
  const auto b = weak_limit_comparison(h, dims, 2.38, 0.5, 512, opt);
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a[i].kr == b[i].kr);
    CHECK(a[i].band == b[i].band);
    CHECK(a[i].band > 0.0);
  }
  CHECK(a[0].iteration == 4);

  std::vector<LimitRow> rows{{8, 0, 0.3, 0.01}, {32, 0, 0.2, 0.01}, {128, 0, 0.19, 0.01}};
  CHECK(!strictly_decreasing_beyond_bands(rows));
  rows[2].kr = 0.1;
  CHECK(strictly_decreasing_beyond_bands(rows));
}

TEST_CASE("stationarity probe") {
  const std::uint64_t probes[] = {0, 5, 50};
  const auto r = stationarity_probe(Algorithm::kRwm, make_target("logistic"), 8, 2.0, probes, 2048, 3);
  REQUIRE(r.size() == 3);
  for (const auto& p : r) CHECK(p.kr <= p.floor);
}
