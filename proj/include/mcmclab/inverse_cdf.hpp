#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mcmclab {

// Tabulated CDF of a density on [lo, hi] with monotone cubic Hermite
// interpolation between equispaced knots, and its inverse for sampling.
// Knot values are integrated with per-cell Gauss-Legendre quadrature; knot
// slopes are the density itself, limited with the Fritsch-Carlson condition.
class InverseCdfTable {
 public:
  static constexpr std::size_t kDefaultKnots = std::size_t{1} << 14;

  /// `density` may be unnormalized; the table normalizes by its integral.
  static InverseCdfTable build(const std::function<double(double)>& density, double lo, double hi,
                               std::size_t knots = kDefaultKnots);

  double cdf(double x) const;
  /// Inverse of cdf() for u in (0, 1).
  double quantile(double u) const;

  /// Integral of the (unnormalized) density over [lo, hi].
  double mass() const { return mass_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t knots() const { return cdf_.size(); }

 private:
  double hermite(std::size_t cell, double s) const;
  double hermite_slope(std::size_t cell, double s) const;

  double lo_ = 0.0;
  double hi_ = 0.0;
  double step_ = 0.0;
  double mass_ = 0.0;
  std::vector<double> cdf_;
  std::vector<double> slope_;
};

}  // namespace mcmclab
