#include "mcmclab/inverse_cdf.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

#include "mcmclab/error.hpp"

namespace mcmclab {

InverseCdfTable InverseCdfTable::build(const std::function<double(double)>& density, double lo,
                                       double hi, std::size_t knots) {
  if (!(hi > lo) || knots < 3) throw ContractViolation("inverse-cdf table: need hi > lo and >= 3 knots");
  InverseCdfTable t;
  t.lo_ = lo;
  t.hi_ = hi;
  t.step_ = (hi - lo) / static_cast<double>(knots - 1);
  t.cdf_.assign(knots, 0.0);
  t.slope_.assign(knots, 0.0);

  using Quad = boost::math::quadrature::gauss<double, 10>;
  double acc = 0.0;
  for (std::size_t i = 1; i < knots; ++i) {
    const double a = lo + t.step_ * static_cast<double>(i - 1);
    const double b = (i + 1 == knots) ? hi : lo + t.step_ * static_cast<double>(i);
    acc += Quad::integrate(density, a, b);
    t.cdf_[i] = acc;
  }
  if (!(acc > 0.0) || !std::isfinite(acc)) throw NumericFailure("inverse-cdf table: density has no finite positive mass");
  t.mass_ = acc;
  for (std::size_t i = 0; i < knots; ++i) {
    t.cdf_[i] /= acc;
    // slope in units of the local parameter s in [0, 1]
    t.slope_[i] = density(lo + t.step_ * static_cast<double>(i)) / acc * t.step_;
  }
  t.cdf_.back() = 1.0;

  // Fritsch-Carlson limiter keeps each cell monotone.
  for (std::size_t i = 0; i + 1 < knots; ++i) {
    const double delta = t.cdf_[i + 1] - t.cdf_[i];
    if (delta <= 0.0) {
      t.slope_[i] = 0.0;
      t.slope_[i + 1] = 0.0;
      continue;
    }
    const double alpha = t.slope_[i] / delta;
    const double beta = t.slope_[i + 1] / delta;
    const double r2 = alpha * alpha + beta * beta;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      t.slope_[i] = tau * alpha * delta;
      t.slope_[i + 1] = tau * beta * delta;
    }
  }
  return t;
}

double InverseCdfTable::hermite(std::size_t i, double s) const {
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * cdf_[i] + h10 * slope_[i] + h01 * cdf_[i + 1] + h11 * slope_[i + 1];
}

double InverseCdfTable::hermite_slope(std::size_t i, double s) const {
  const double s2 = s * s;
  return (6 * s2 - 6 * s) * (cdf_[i] - cdf_[i + 1]) + (3 * s2 - 4 * s + 1) * slope_[i] +
         (3 * s2 - 2 * s) * slope_[i + 1];
}

double InverseCdfTable::cdf(double x) const {
  if (x <= lo_) return 0.0;
  if (x >= hi_) return 1.0;
  const double pos = (x - lo_) / step_;
  auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= cdf_.size()) i = cdf_.size() - 2;
  return hermite(i, pos - static_cast<double>(i));
}

double InverseCdfTable::quantile(double u) const {
  if (u <= 0.0) return lo_;
  if (u >= 1.0) return hi_;
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  i = std::clamp<std::size_t>(i, 1, cdf_.size() - 1) - 1;
  // Safeguarded Newton on the monotone cell polynomial.
  double a = 0.0;
  double b = 1.0;
  const double span = cdf_[i + 1] - cdf_[i];
  double s = span > 0.0 ? (u - cdf_[i]) / span : 0.5;
  for (int iter = 0; iter < 60; ++iter) {
    const double f = hermite(i, s) - u;
    if (f > 0.0) {
      b = s;
    } else {
      a = s;
    }
    if (std::abs(f) <= 1e-15 || b - a < 1e-14) break;
    const double df = hermite_slope(i, s);
    double next = df > 0.0 ? s - f / df : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    s = next;
  }
  return lo_ + step_ * (static_cast<double>(i) + s);
}

}  // namespace mcmclab
