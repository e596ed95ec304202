#include <cmath>
#include <random>

#include "doctest.h"
#include "mcmclab/diffusion_limit.hpp"
#include "mcmclab/error.hpp"
#include "mcmclab/mcmc_kernels.hpp"
#include "oracle_values.hpp"

using namespace mcmclab;
using doctest::Approx;

TEST_CASE("normal cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(-1.19) * 2.0 == Approx(oracle::kRwmAcceptance238).epsilon(1e-14));
  CHECK(normal_cdf(-40.0) >= 0.0);
}

TEST_CASE("RWM speed and acceptance functions") {
  CHECK(rwm_asymptotic_acceptance(2.38, 1.0) == Approx(oracle::kRwmAcceptance238).epsilon(1e-13));
  CHECK(std::abs(rwm_asymptotic_acceptance(2.38, 1.0) - 0.234) < 1e-3);
  CHECK(rwm_speed(1e-6, 1.0) < 1e-11);
  CHECK(rwm_speed(100.0, 1.0) < 1e-100);
  CHECK(rwm_asymptotic_acceptance(1e-9, 1.0) == Approx(1.0));
  CHECK(rwm_asymptotic_acceptance(1e3, 1.0) < 1e-100);
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double a = rwm_asymptotic_acceptance(0.1 * i, 1.0);
    CHECK(a < prev);
    prev = a;
  }
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ell(0.05, 8.0), info(0.05, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double l = ell(gen), I = info(gen);
    CHECK(rwm_speed(l, I) == Approx(rwm_speed(l * std::sqrt(I), 1.0) / I).epsilon(1e-12));
  }
}

TEST_CASE("golden-section optimizer") {
  const auto quad = optimize_ell([](double l) { return -(l - 3.0) * (l - 3.0); }, 0.5, 7.0);
  CHECK(quad.ell == Approx(3.0).epsilon(1e-6));

  const auto i1 = optimize_ell([](double l) { return rwm_speed(l, 1.0); }, 0.1, 8.0);
  CHECK(std::abs(i1.ell - oracle::kRwmEllStarI1) < 1e-5);
  CHECK(std::abs(rwm_asymptotic_acceptance(i1.ell, 1.0) - 0.234) < 1e-3);
  CHECK(std::abs(rwm_asymptotic_acceptance(i1.ell, 1.0) - oracle::kRwmAccStarI1) < 1e-6);

  const auto i4 = optimize_ell([](double l) { return rwm_speed(l, 4.0); }, 0.1, 8.0);
  CHECK(std::abs(i4.ell - oracle::kRwmEllStarI4) < 1e-5);

  CHECK_THROWS_AS(optimize_ell([](double l) { return std::sin(3.0 * l); }, 0.0, 10.0), NumericFailure);
  try {
    optimize_ell([](double l) { return std::cos(3.0 * l); }, 0.0, 10.0);
  } catch (const NumericFailure& e) {
    CHECK(std::string(e.what()).find("scan") != std::string::npos);
  }
}

TEST_CASE("Ornstein-Uhlenbeck moments") {
  auto h = make_target("std_normal");
  const std::size_t n = 20000;
  for (auto [u0, s, t] : {std::tuple{2.0, 1.0, 0.5}, std::tuple{-1.0, 2.0, 1.0}, std::tuple{3.0, 0.5, 3.0}}) {
    CAPTURE(u0);
    const auto spec = DiffusionSpec::with_default_step(h, s, t);
    const auto law = simulate_diffusion(spec, u0, 17, n);
    const double mean = u0 * std::exp(-0.5 * s * t);
    const double var = 1.0 - std::exp(-s * t);
    CHECK(std::abs(law.mean() - mean) < 4.0 * std::sqrt(var / n));
    CHECK(std::abs(law.variance() - var) < 4.0 * var * std::sqrt(2.0 / n) + 2e-3 * var);
  }
}

TEST_CASE("ergodic limit and step-halving") {
  auto h = make_target("std_normal");
  const std::size_t n = 8192;
  RngStream rng(3);
  const EmpiricalMeasure1D ref(sample_component(*h, rng, n));
  RngStream nrng(4);
  const auto floor = estimate_noise_floor(EmpiricalMeasure1D(sample_component(*h, rng, 8 * n)), n, nrng);

  const auto spec = DiffusionSpec::with_default_step(h, 2.0, 6.0);
  const auto stationary = simulate_diffusion(spec, 3.0, 5, n);
  CHECK(kr_distance(stationary, ref).distance <= floor.level);

  auto coarse = DiffusionSpec::with_default_step(h, 1.0, 1.0);
  coarse.dt = 0.02;
  auto fine = coarse;
  fine.dt = 0.01;
  const auto a = simulate_diffusion(coarse, 1.5, 6, n);
  const auto b = simulate_diffusion(fine, 1.5, 7, n);
  CHECK(kr_distance(a, b).distance <= floor.level);
}

TEST_CASE("diffusion paths are independent of the thread count") {
  auto h = make_target("logistic");
  const auto spec = DiffusionSpec::with_default_step(h, 1.3, 0.5);
  const auto a = simulate_diffusion_paths(spec, 0.5, 8, 200, 1);
  const auto b = simulate_diffusion_paths(spec, 0.5, 8, 200, 4);
  CHECK(a == b);
}

TEST_CASE("diffusion spec validation and divergence guard") {
  auto h = make_target("std_normal");
  DiffusionSpec spec = DiffusionSpec::with_default_step(h, 1.0, 1.0);
  CHECK(spec.dt == Approx(1e-3));
  spec.dt = 2.0;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);
  spec.dt = 0.1;
  spec.speed = -1.0;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);

  DiffusionSpec zero = DiffusionSpec::with_default_step(h, 1.0, 0.0);
  const auto at_start = simulate_diffusion(zero, 0.7, 1, 4);
  for (double v : at_start.atoms()) CHECK(v == 0.7);

  // Explicit Euler on the normal drift explodes once s*dt/2 > 2.
  DiffusionSpec unstable = DiffusionSpec::with_default_step(h, 1.0, 500.0);
  unstable.dt = 5.0;
  try {
    simulate_diffusion(unstable, 1.0, 1, 4);
    FAIL("expected divergence");
  } catch (const NumericFailure& e) {
    CHECK(std::string(e.what()).find("reduce dt") != std::string::npos);
  }
}

TEST_CASE("empirical RWM acceptance at d=200 matches the limiting function") {
  for (double ell : {1.0, 2.38, 4.0}) {
    const ChainSpec spec(Algorithm::kRwm, ProductTarget(make_target("std_normal"), 200), ell, 21);
    const std::uint64_t rec[] = {0};
    const double acc = *run_chain(spec, 20000, rec).acceptance_rate();
    CHECK(std::abs(acc - rwm_asymptotic_acceptance(ell, 1.0)) <= 0.02);
  }
}
