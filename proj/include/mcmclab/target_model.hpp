#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcmclab/expression.hpp"
#include "mcmclab/inverse_cdf.hpp"
#include "mcmclab/rng.hpp"

namespace mcmclab {

enum class SamplerKind { kExact, kInverseCdfTable };

std::string_view to_string(SamplerKind kind);

// One-dimensional component density h of a product target. Stored
// normalized on the real line; [support_lo, support_hi] is the interval used
// for quadrature and tabulation and carries all but a negligible tail.
// Immutable after construction.
class TargetModel1D {
 public:
  static TargetModel1D normal(std::string name, double mean, double sd);
  /// Standard logistic density, h(x) = e^{-x} / (1 + e^{-x})^2.
  static TargetModel1D logistic(std::string name);
  /// Equal mixture of N(-sep, 1) and N(sep, 1); sampled through an inverse-cdf table.
  static TargetModel1D bimodal(std::string name, double sep);
  /// Unnormalized log-density expression, normalized by quadrature on [lo, hi].
  static TargetModel1D from_expression(std::string name, std::string_view log_density, double lo,
                                       double hi);

  double log_h(double x) const;
  double dlog_h(double x) const;
  double density(double x) const;

  const std::string& name() const { return name_; }
  SamplerKind sampler_kind() const { return sampler_; }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  /// I = E_h[((log h)')^2], computed once at construction.
  double fisher_I() const { return fisher_; }
  /// The location of a mode, when known in closed form.
  double mode() const { return mode_; }

  double sample(RngStream& rng) const;

 private:
  enum class Kind { kNormal, kLogistic, kBimodal, kExpression };

  TargetModel1D() = default;
  void finish();

  Kind kind_ = Kind::kNormal;
  std::string name_;
  SamplerKind sampler_ = SamplerKind::kExact;
  double lo_ = -8.0;
  double hi_ = 8.0;
  double mean_ = 0.0;
  double sd_ = 1.0;
  double sep_ = 0.0;
  double log_norm_ = 0.0;
  double fisher_ = 0.0;
  double mode_ = 0.0;
  std::shared_ptr<const Expression> expr_;
  std::shared_ptr<const InverseCdfTable> table_;
};

/// n i.i.d. draws from h.
std::vector<double> sample_component(const TargetModel1D& model, RngStream& rng, std::size_t n);

/// Adaptive Gauss-Kronrod quadrature of (dlog_h)^2 h over the support.
/// Throws NumericFailure naming the density if the error estimate is too large.
double fisher_moment(const TargetModel1D& model);

/// Numerical checks of the assumptions the diffusion limits rely on.
struct TargetDiagnostics {
  double mass = 0.0;                 // integral of h over the support
  double max_derivative_error = 0.0; // worst relative error of dlog_h vs central differences
  double fisher_I = 0.0;
  double fisher_I_refined = 0.0;     // same integral on a doubled node set
  double dlog_lipschitz = 0.0;       // grid estimate of the Lipschitz constant of h'/h
  double score_moment8 = 0.0;        // E[(h'/h)^8]
  double curvature_moment4 = 0.0;    // E[(h''/h)^4]
  std::vector<std::string> warnings;
};

TargetDiagnostics diagnose(const TargetModel1D& model);

// Product target pi_d(x) = prod_i h(x_i). Shares its component.
class ProductTarget {
 public:
  ProductTarget(std::shared_ptr<const TargetModel1D> component, std::size_t dim);

  const TargetModel1D& component() const { return *component_; }
  std::shared_ptr<const TargetModel1D> component_ptr() const { return component_; }
  std::size_t dim() const { return dim_; }

 private:
  std::shared_ptr<const TargetModel1D> component_;
  std::size_t dim_;
};

/// Sum of log h(x_i). Throws ContractViolation if x.size() != d.
double log_density(const ProductTarget& target, std::span<const double> x);
/// Writes dlog_h(x_i) into grad. Throws ContractViolation on size mismatch.
void grad_log_density(const ProductTarget& target, std::span<const double> x, std::span<double> grad);
std::vector<double> grad_log_density(const ProductTarget& target, std::span<const double> x);

/// Registered names: std_normal, normal_sd2, logistic, bimodal.
std::vector<std::string> registered_targets();

/// Looks up a registry name, or loads a custom density when `name` is
/// "file:<path>" (keys: name, log_density, support = lo hi).
std::shared_ptr<const TargetModel1D> make_target(std::string_view name);

/// Parses the key=value text of a custom density.
std::shared_ptr<const TargetModel1D> parse_target_spec(std::string_view text);

}  // namespace mcmclab
