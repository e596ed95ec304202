#include "mcmclab/target_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mcmclab/error.hpp"

namespace mcmclab {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_cosh(double z) {
  const double a = std::abs(z);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

template <class F>
double composite_gauss(F&& f, double lo, double hi, int cells) {
  using Quad = boost::math::quadrature::gauss<double, 15>;
  const double w = (hi - lo) / cells;
  double sum = 0.0;
  for (int c = 0; c < cells; ++c) sum += Quad::integrate(f, lo + c * w, lo + (c + 1) * w);
  return sum;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(SamplerKind kind) {
  return kind == SamplerKind::kExact ? "exact" : "inverse-cdf-table";
}

TargetModel1D TargetModel1D::normal(std::string name, double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(mean)) throw ContractViolation("normal target: sd must be positive");
  TargetModel1D m;
  m.kind_ = Kind::kNormal;
  m.name_ = std::move(name);
  m.mean_ = mean;
  m.sd_ = sd;
  m.lo_ = mean - 8.5 * sd;
  m.hi_ = mean + 8.5 * sd;
  m.mode_ = mean;
  m.log_norm_ = kLogSqrt2Pi + std::log(sd);
  m.finish();
  return m;
}

TargetModel1D TargetModel1D::logistic(std::string name) {
  TargetModel1D m;
  m.kind_ = Kind::kLogistic;
  m.name_ = std::move(name);
  m.lo_ = -40.0;
  m.hi_ = 40.0;
  m.mode_ = 0.0;
  m.finish();
  return m;
}

TargetModel1D TargetModel1D::bimodal(std::string name, double sep) {
  if (!(sep > 0.0)) throw ContractViolation("bimodal target: separation must be positive");
  TargetModel1D m;
  m.kind_ = Kind::kBimodal;
  m.name_ = std::move(name);
  m.sep_ = sep;
  m.lo_ = -sep - 8.5;
  m.hi_ = sep + 8.5;
  m.sampler_ = SamplerKind::kInverseCdfTable;
  m.finish();
  return m;
}

TargetModel1D TargetModel1D::from_expression(std::string name, std::string_view log_density,
                                             double lo, double hi) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ContractViolation("custom target '" + name + "': support must satisfy lo < hi");
  }
  TargetModel1D m;
  m.kind_ = Kind::kExpression;
  m.name_ = std::move(name);
  m.lo_ = lo;
  m.hi_ = hi;
  m.expr_ = std::make_shared<const Expression>(Expression::parse(log_density));
  m.sampler_ = SamplerKind::kInverseCdfTable;

  // Shift by the grid maximum before exponentiating.
  double peak = -INFINITY;
  constexpr int kScan = 4096;
  for (int i = 0; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double v = m.expr_->value(x);
    if (v > peak) {
      peak = v;
      m.mode_ = x;
    }
  }
  if (!std::isfinite(peak)) throw NumericFailure("custom target '" + m.name_ + "': log-density not finite on support");
  auto expr = m.expr_;
  auto shifted = [expr, peak](double x) { return std::exp(expr->value(x) - peak); };
  double err = 0.0;
  const double z = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(shifted, lo, hi, 15, 1e-12, &err);
  if (!(z > 0.0) || !std::isfinite(z) || err > 1e-8 * z) {
    throw NumericFailure("custom target '" + m.name_ + "': normalization quadrature did not converge");
  }
  m.log_norm_ = peak + std::log(z);
  m.finish();
  return m;
}

void TargetModel1D::finish() {
  if (kind_ == Kind::kBimodal) {
    // Newton on the score for the positive mode.
    double x = sep_;
    for (int i = 0; i < 100; ++i) {
      const double g = dlog_h(x);
      const double t = std::tanh(sep_ * x);
      const double dg = -1.0 + sep_ * sep_ * (1.0 - t * t);
      const double nx = x - g / dg;
      if (std::abs(nx - x) < 1e-15) break;
      x = nx;
    }
    mode_ = x;
  }
  if (sampler_ == SamplerKind::kInverseCdfTable) {
    const TargetModel1D copy = *this;
    table_ = std::make_shared<const InverseCdfTable>(
        InverseCdfTable::build([copy](double x) { return copy.density(x); }, lo_, hi_));
  }
  fisher_ = fisher_moment(*this);
}

double TargetModel1D::log_h(double x) const {
  switch (kind_) {
    case Kind::kNormal: {
      const double z = (x - mean_) / sd_;
      return -0.5 * z * z - log_norm_;
    }
    case Kind::kLogistic: {
      const double a = std::abs(x);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
    case Kind::kBimodal:
      return -kLogSqrt2Pi - 0.5 * (x * x + sep_ * sep_) + log_cosh(sep_ * x);
    case Kind::kExpression:
      return expr_->value(x) - log_norm_;
  }
  return 0.0;
}

double TargetModel1D::dlog_h(double x) const {
  switch (kind_) {
    case Kind::kNormal:
      return -(x - mean_) / (sd_ * sd_);
    case Kind::kLogistic:
      return -std::tanh(0.5 * x);
    case Kind::kBimodal:
      return -x + sep_ * std::tanh(sep_ * x);
    case Kind::kExpression:
      return expr_->eval(x).deriv;
  }
  return 0.0;
}

double TargetModel1D::density(double x) const { return std::exp(log_h(x)); }

double TargetModel1D::sample(RngStream& rng) const {
  switch (kind_) {
    case Kind::kNormal:
      return mean_ + sd_ * rng.normal();
    case Kind::kLogistic: {
      const double u = rng.uniform();
      return std::log(u) - std::log1p(-u);
    }
    default:
      return table_->quantile(rng.uniform());
  }
}

std::vector<double> sample_component(const TargetModel1D& model, RngStream& rng, std::size_t n) {
  if (n == 0) throw ContractViolation("sample_component: n must be >= 1");
  std::vector<double> out(n);
  for (auto& v : out) v = model.sample(rng);
  return out;
}

double fisher_moment(const TargetModel1D& model) {
  auto f = [&model](double x) {
    const double s = model.dlog_h(x);
    return s * s * model.density(x);
  };
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, model.support_lo(), model.support_hi(), 15, 1e-12, &err);
  if (!std::isfinite(value) || err > 1e-8 * std::max(1.0, std::abs(value))) {
    throw NumericFailure("fisher_moment: quadrature did not converge for density '" + model.name() + "'");
  }
  return value;
}

TargetDiagnostics diagnose(const TargetModel1D& model) {
  TargetDiagnostics d;
  const double lo = model.support_lo();
  const double hi = model.support_hi();
  auto h = [&](double x) { return model.density(x); };
  d.mass = composite_gauss(h, lo, hi, 512);

  constexpr int kNodes = 100;
  for (int i = 0; i < kNodes; ++i) {
    const double x = lo + (hi - lo) * (i + 0.5) / kNodes;
    const double step = std::max(1e-5, 1e-5 * std::abs(x));
    const double fd = (model.log_h(x + step) - model.log_h(x - step)) / (2.0 * step);
    const double exact = model.dlog_h(x);
    d.max_derivative_error = std::max(d.max_derivative_error, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
  }

  auto score2 = [&](double x) {
    const double s = model.dlog_h(x);
    return s * s * model.density(x);
  };
  d.fisher_I = composite_gauss(score2, lo, hi, 256);
  d.fisher_I_refined = composite_gauss(score2, lo, hi, 512);

  constexpr int kGrid = 4000;
  const double dx = (hi - lo) / kGrid;
  for (int i = 0; i < kGrid; ++i) {
    const double x = lo + i * dx;
    d.dlog_lipschitz = std::max(d.dlog_lipschitz, std::abs(model.dlog_h(x + dx) - model.dlog_h(x)) / dx);
  }

  auto m8 = [&](double x) { return std::pow(model.dlog_h(x), 8) * model.density(x); };
  auto m4 = [&](double x) {
    const double step = std::max(1e-5, 1e-5 * std::abs(x));
    const double curv = (model.dlog_h(x + step) - model.dlog_h(x - step)) / (2.0 * step);
    const double s = model.dlog_h(x);
    return std::pow(curv + s * s, 4) * model.density(x);
  };
  d.score_moment8 = composite_gauss(m8, lo, hi, 512);
  d.curvature_moment4 = composite_gauss(m4, lo, hi, 512);

  if (std::abs(d.mass - 1.0) > 1e-6) d.warnings.push_back("density mass on support differs from 1 by more than 1e-6");
  if (d.max_derivative_error > 1e-5) d.warnings.push_back("score does not match finite differences of the log-density");
  const double edge = std::max(model.density(lo), model.density(hi)) * (hi - lo);
  if (edge > 1e-10) d.warnings.push_back("support may truncate more than 1e-10 of tail mass");
  if (!std::isfinite(d.score_moment8) || d.score_moment8 > 1e12) {
    d.warnings.push_back("E[(h'/h)^8] is not finite numerically; diffusion-limit assumptions may fail");
  }
  if (!std::isfinite(d.curvature_moment4) || d.curvature_moment4 > 1e12) {
    d.warnings.push_back("E[(h''/h)^4] is not finite numerically; diffusion-limit assumptions may fail");
  }
  if (!std::isfinite(d.dlog_lipschitz) || d.dlog_lipschitz > 1e6) {
    d.warnings.push_back("h'/h does not look Lipschitz on the support grid");
  }
  return d;
}

ProductTarget::ProductTarget(std::shared_ptr<const TargetModel1D> component, std::size_t dim)
    : component_(std::move(component)), dim_(dim) {
  if (!component_) throw ContractViolation("ProductTarget: null component");
  if (dim_ == 0) throw ContractViolation("ProductTarget: dimension must be >= 1");
}

double log_density(const ProductTarget& target, std::span<const double> x) {
  if (x.size() != target.dim()) {
    throw ContractViolation("log_density: got " + std::to_string(x.size()) + " coordinates, target has d=" +
                            std::to_string(target.dim()));
  }
  const auto& h = target.component();
  double sum = 0.0;
  for (double xi : x) sum += h.log_h(xi);
  return sum;
}

void grad_log_density(const ProductTarget& target, std::span<const double> x, std::span<double> grad) {
  if (x.size() != target.dim() || grad.size() != target.dim()) {
    throw ContractViolation("grad_log_density: dimension mismatch with d=" + std::to_string(target.dim()));
  }
  const auto& h = target.component();
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = h.dlog_h(x[i]);
}

std::vector<double> grad_log_density(const ProductTarget& target, std::span<const double> x) {
  std::vector<double> g(x.size());
  grad_log_density(target, x, g);
  return g;
}

std::vector<std::string> registered_targets() { return {"std_normal", "normal_sd2", "logistic", "bimodal"}; }

std::shared_ptr<const TargetModel1D> parse_target_spec(std::string_view text) {
  std::string name = "custom";
  std::string expr;
  double lo = NAN;
  double hi = NAN;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError("target spec: expected key = value, got '" + t + "'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "name") {
      name = value;
    } else if (key == "log_density") {
      expr = value;
    } else if (key == "support") {
      std::istringstream vs(value);
      if (!(vs >> lo >> hi)) throw UsageError("target spec: malformed support '" + value + "'");
    } else {
      throw UsageError("target spec: unknown key '" + key + "'");
    }
  }
  if (expr.empty()) throw UsageError("target spec: missing log_density");
  if (std::isnan(lo)) throw UsageError("target spec: missing support");
  return std::make_shared<const TargetModel1D>(TargetModel1D::from_expression(name, expr, lo, hi));
}

std::shared_ptr<const TargetModel1D> make_target(std::string_view name) {
  if (name.starts_with("file:")) {
    const std::string path(name.substr(5));
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open target spec '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_target_spec(buf.str());
  }
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const TargetModel1D>, std::less<>> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  std::shared_ptr<const TargetModel1D> model;
  if (name == "std_normal") {
    model = std::make_shared<const TargetModel1D>(TargetModel1D::normal("std_normal", 0.0, 1.0));
  } else if (name == "normal_sd2") {
    model = std::make_shared<const TargetModel1D>(TargetModel1D::normal("normal_sd2", 0.0, 2.0));
  } else if (name == "logistic") {
    model = std::make_shared<const TargetModel1D>(TargetModel1D::logistic("logistic"));
  } else if (name == "bimodal") {
    model = std::make_shared<const TargetModel1D>(TargetModel1D::bimodal("bimodal", 2.0));
  } else {
    throw UsageError("unknown target '" + std::string(name) + "'");
  }
  cache.emplace(std::string(name), model);
  return model;
}

}  // namespace mcmclab
