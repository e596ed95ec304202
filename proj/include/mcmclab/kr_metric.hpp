#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mcmclab/rng.hpp"

namespace mcmclab {

/// Ground cost of the bounded-Lipschitz distance: the absolute difference truncated at 2.
inline double truncated_cost(double x, double y) {
  const double d = x > y ? x - y : y - x;
  return d < 2.0 ? d : 2.0;
}

// Equal-weight empirical measure on the line. Atoms are kept sorted.
class EmpiricalMeasure1D {
 public:
  /// Throws ContractViolation if empty or any atom is non-finite.
  explicit EmpiricalMeasure1D(std::vector<double> atoms);

  std::span<const double> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double mean() const;
  double variance() const;

 private:
  std::vector<double> atoms_;
};

enum class TransportMethod { kExactAssignment, kExactLineFlow, kSortedUpperBound, kDualLowerBound };

std::string_view to_string(TransportMethod method);

struct TransportResult {
  double distance = 0.0;
  /// matching[i] is the index of the nu atom paired with mu atom i.
  std::vector<std::size_t> matching;
  /// u_i + v_j <= truncated_cost(mu_i, nu_j); (sum u + sum v) / n is the dual value.
  std::vector<double> dual_mu;
  std::vector<double> dual_nu;
  TransportMethod method = TransportMethod::kExactAssignment;

  double dual_value() const;
  double duality_gap() const;
};

/// Largest violation of u_i + v_j <= c_ij over all pairs (O(n^2); for tests and audits).
double max_dual_violation(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu, const TransportResult& r);

/// Atom count up to which kr_distance uses the dense assignment solver.
inline constexpr std::size_t kAssignmentMaxAtoms = 256;

/// Exact KR distance between equal-size measures with optimal matching and
/// dual certificate. Dense assignment for n <= kAssignmentMaxAtoms, the
/// line-flow solver above that. Throws ContractViolation on unequal sizes.
TransportResult kr_distance(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu);

/// Shortest-augmenting-path (Hungarian) solver on the n x n truncated-cost matrix.
TransportResult kr_assignment(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu);

/// O(n log n) solver: min-cost flow along the merged atoms with a teleport
/// hub of cost 1 per end, decomposed into a permutation; dual potentials from
/// residual shortest paths.
TransportResult kr_line_flow(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu);

/// Cost of the monotone (sorted) coupling; an upper bound on the KR distance.
double kr_upper_bound_sorted(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu);

// Piecewise-linear function through (knot_x, knot_y), constant beyond the end knots.
class TestFunction {
 public:
  TestFunction(std::vector<double> knot_x, std::vector<double> knot_y);

  double operator()(double x) const;
  /// True when |f| <= 1 and every segment slope is at most 1 in magnitude.
  bool in_unit_lipschitz_ball(double tol = 1e-12) const;

  static TestFunction ramp(double center);  // clamp(x - center, -1, 1)
  static TestFunction tent(double center);  // max(0, 1 - |x - center|)

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// max over the family of |E_mu f - E_nu f|. Throws ContractViolation if the
/// family is empty or a member leaves the unit Lipschitz ball.
double kr_lower_bound_dual(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu,
                           std::span<const TestFunction> family);

/// Ramps and tents centered on a quantile grid of the pooled atoms.
std::vector<TestFunction> default_dual_family(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu,
                                              std::size_t knots = 64);

/// Bootstrap resample (with replacement) to n atoms.
EmpiricalMeasure1D resample_to(const EmpiricalMeasure1D& mu, std::size_t n, RngStream& rng);

/// Exhaustive minimum over all n! matchings; n <= 8.
double kr_brute_force(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu);

// Sampling noise of the n-atom plug-in KR estimator under the null (both
// samples from the same law), estimated from bootstrap pairs of a reference pool.
struct NoiseFloor {
  std::size_t n = 0;
  int replicates = 0;
  double bias = 0.0;    // mean KR between two resamples
  double spread = 0.0;  // standard deviation across replicates
  double level = 0.0;   // bias + 3 * spread; estimates at or below this are noise
};

NoiseFloor estimate_noise_floor(const EmpiricalMeasure1D& reference, std::size_t n, RngStream& rng,
                                int replicates = 32);

}  // namespace mcmclab
