#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mcmclab/error.hpp"
#include "mcmclab/expression.hpp"
#include "mcmclab/inverse_cdf.hpp"
#include "mcmclab/target_model.hpp"
#include "oracle_values.hpp"

using namespace mcmclab;
using doctest::Approx;

TEST_CASE("product log-density of the standard normal") {
  ProductTarget p2(make_target("std_normal"), 2);
  const double origin[] = {0.0, 0.0};
  CHECK(log_density(p2, origin) == Approx(oracle::kLogDensity2Origin).epsilon(1e-14));

  ProductTarget p1(make_target("std_normal"), 1);
  const double zero[] = {0.0};
  CHECK(log_density(p1, zero) == Approx(-0.9189385332046727).epsilon(1e-14));

  ProductTarget p3(make_target("std_normal"), 3);
  const double x[] = {1.0, -1.0, 2.0};
  CHECK(log_density(p3, x) == Approx(oracle::kLogDensity3).epsilon(1e-14));

  const double wrong[] = {1.0, 2.0};
  CHECK_THROWS_AS(log_density(p3, wrong), ContractViolation);
}

TEST_CASE("product structure: equal coordinates scale the log-density") {
  for (const auto& name : registered_targets()) {
    auto h = make_target(name);
    ProductTarget p(h, 7);
    const std::vector<double> x(7, 0.37);
    CHECK(log_density(p, x) == Approx(7.0 * h->log_h(0.37)).epsilon(1e-13));
  }
}

TEST_CASE("gradient of the product target") {
  ProductTarget p(make_target("std_normal"), 2);
  const auto g = grad_log_density(p, std::vector<double>{1.0, -2.0});
  CHECK(g[0] == Approx(-1.0));
  CHECK(g[1] == Approx(2.0));

  for (const auto& name : registered_targets()) {
    auto h = make_target(name);
    ProductTarget q(h, 3);
    const auto at_mode = grad_log_density(q, std::vector<double>(3, h->mode()));
    for (double v : at_mode) CHECK(std::abs(v) < 1e-9);
  }

  auto logistic = make_target("logistic");
  ProductTarget q(logistic, 3);
  std::vector<double> x{0.5, -1.25, 3.0};
  const auto g2 = grad_log_density(q, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = 1e-5;
    auto plus = x, minus = x;
    plus[i] += step;
    minus[i] -= step;
    const double fd = (log_density(q, plus) - log_density(q, minus)) / (2 * step);
    CHECK(std::abs(g2[i] - fd) < 1e-5);
  }
  CHECK_THROWS_AS(grad_log_density(q, std::vector<double>{1.0}), ContractViolation);
}

TEST_CASE("registered densities pass their numerical diagnostics") {
  const auto names = registered_targets();
  for (const char* required : {"std_normal", "normal_sd2", "logistic", "bimodal"}) {
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  }
  for (const auto& name : names) {
    CAPTURE(name);
    const auto d = diagnose(*make_target(name));
    CHECK(std::abs(d.mass - 1.0) < 1e-6);
    CHECK(d.max_derivative_error <= 1e-5);
    CHECK(std::abs(d.fisher_I - d.fisher_I_refined) <= 1e-4 * d.fisher_I);
    CHECK(std::isfinite(d.dlog_lipschitz));
    CHECK(std::isfinite(d.score_moment8));
    CHECK(d.warnings.empty());
  }
}

TEST_CASE("fisher moments against closed forms and quadrature") {
  CHECK(fisher_moment(*make_target("std_normal")) == Approx(1.0).epsilon(1e-8));
  CHECK(fisher_moment(*make_target("normal_sd2")) == Approx(oracle::kFisherNormalSd2).epsilon(1e-8));
  CHECK(fisher_moment(*make_target("logistic")) == Approx(oracle::kFisherLogistic).epsilon(1e-8));
  CHECK(fisher_moment(*make_target("bimodal")) == Approx(oracle::kFisherBimodal).epsilon(1e-7));
  CHECK(make_target("std_normal")->fisher_I() == Approx(1.0).epsilon(1e-8));
}

TEST_CASE("exact sampler moments") {
  auto h = make_target("std_normal");
  RngStream rng(11);
  const std::size_t n = 1000000;
  const auto xs = sample_component(*h, rng, n);
  double m = 0.0, v = 0.0;
  for (double x : xs) m += x;
  m /= n;
  for (double x : xs) v += (x - m) * (x - m);
  v /= n - 1;
  CHECK(std::abs(m) < 4.0 / std::sqrt(n));
  CHECK(std::abs(v - 1.0) < 4.0 * std::sqrt(2.0 / n));

  RngStream a(99), b(99);
  CHECK(sample_component(*h, a, 1)[0] == sample_component(*h, b, 1)[0]);
}

TEST_CASE("inverse-cdf sampler for the bimodal density") {
  auto h = make_target("bimodal");
  CHECK(h->sampler_kind() == SamplerKind::kInverseCdfTable);
  auto cdf = [](double x) {
    return 0.5 * (0.5 * std::erfc(-(x + 2.0) / std::numbers::sqrt2) + 0.5 * std::erfc(-(x - 2.0) / std::numbers::sqrt2));
  };
  for (int i = 0; i < 6; ++i) CHECK(cdf(oracle::kBimodalX[i]) == Approx(oracle::kBimodalCdf[i]).epsilon(1e-12));

  RngStream rng(3);
  const std::size_t n = 1000000;
  auto xs = sample_component(*h, rng, n);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(xs[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks <= 2e-3);
}

TEST_CASE("inverse-cdf table error is below 1e-6") {
  const double s = 2.0;
  auto density = [s](double x) {
    return 0.5 * (std::exp(-0.5 * (x - s) * (x - s)) + std::exp(-0.5 * (x + s) * (x + s))) /
           std::sqrt(2.0 * std::numbers::pi);
  };
  const auto table = InverseCdfTable::build(density, -10.5, 10.5);
  CHECK(table.knots() >= (1u << 14));
  CHECK(table.mass() == Approx(1.0).epsilon(1e-9));
  double worst = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = -10.0 + 20.0 * i / 4000.0;
    const double exact = 0.5 * (0.5 * std::erfc(-(x + s) / std::numbers::sqrt2) + 0.5 * std::erfc(-(x - s) / std::numbers::sqrt2));
    worst = std::max(worst, std::abs(table.cdf(x) - exact));
  }
  CHECK(worst <= 1e-6);
  for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999999}) CHECK(table.cdf(table.quantile(u)) == Approx(u).epsilon(1e-9));
}

TEST_CASE("expression parser") {
  const auto e = Expression::parse(oracle::kExprText);
  for (int i = 0; i < 5; ++i) {
    const Dual d = e.eval(oracle::kExprX[i]);
    CHECK(d.value == Approx(oracle::kExprValue[i]).epsilon(1e-13));
    CHECK(d.deriv == Approx(oracle::kExprDeriv[i]).epsilon(1e-12));
  }
  CHECK(Expression::parse("2^3^2").value(0.0) == Approx(512.0));
  CHECK(Expression::parse("-x^2").value(3.0) == Approx(-9.0));
  CHECK(Expression::parse("e").value(0.0) == Approx(std::numbers::e));

  CHECK_THROWS_AS(Expression::parse("x +"), UsageError);
  CHECK_THROWS_AS(Expression::parse("sin(x)"), UsageError);
  CHECK_THROWS_AS(Expression::parse("(x"), UsageError);
  try {
    Expression::parse("x * $");
    FAIL("expected a parse error");
  } catch (const UsageError& err) {
    CHECK(std::string(err.what()).find('$') != std::string::npos);
  }
}

TEST_CASE("custom densities are normalized by quadrature") {
  auto h = parse_target_spec("# quartic well\nname = quartic\nlog_density = -x^4/4\nsupport = -6 6\n");
  CHECK(h->name() == "quartic");
  CHECK(h->log_h(1.0) == Approx(oracle::kQuarticLogDensityAt1).epsilon(1e-9));
  CHECK(h->dlog_h(1.5) == Approx(-3.375));
  const auto d = diagnose(*h);
  CHECK(std::abs(d.mass - 1.0) < 1e-6);
  CHECK(d.max_derivative_error <= 1e-5);

  CHECK_THROWS_AS(parse_target_spec("name = q\nlog_density = -x^2\n"), UsageError);
  CHECK_THROWS(parse_target_spec("name = q\nlog_density = -x^2\nsupport = 3 1\n"));
  CHECK_THROWS_AS(parse_target_spec("name = q\nlog_density = -x^2\nsupport = -3 3\ncolour = red\n"), UsageError);
  CHECK_THROWS(make_target("no_such_density"));
}

TEST_CASE("product target rejects degenerate input") {
  CHECK_THROWS_AS(ProductTarget(nullptr, 3), ContractViolation);
  CHECK_THROWS_AS(ProductTarget(make_target("std_normal"), 0), ContractViolation);
}
