#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mcmclab/kr_metric.hpp"
#include "mcmclab/target_model.hpp"

namespace mcmclab {

// Langevin diffusion dU = sqrt(s) dB + (s/2) (log h)'(U) dt, the weak limit
// of the sped-up first coordinate. Stationary law h for every speed s.
struct DiffusionSpec {
  std::shared_ptr<const TargetModel1D> component;
  double speed = 1.0;
  double dt = 1e-3;
  double t_end = 1.0;

  /// dt defaults to 1e-3 / s.
  static DiffusionSpec with_default_step(std::shared_ptr<const TargetModel1D> component, double speed, double t_end);
  void validate() const;
};

/// Euler-Maruyama terminal values of n_paths independent paths from u0.
/// Path p draws from the stream derived from (seed, p). The step is shrunk
/// so that an integer number of steps lands exactly on t_end. Throws
/// NumericFailure if a path leaves |U| <= 1e8.
EmpiricalMeasure1D simulate_diffusion(const DiffusionSpec& spec, double u0, std::uint64_t seed, std::size_t n_paths,
                                      unsigned threads = 0);

/// Terminal values in path order.
std::vector<double> simulate_diffusion_paths(const DiffusionSpec& spec, double u0, std::uint64_t seed,
                                             std::size_t n_paths, unsigned threads = 0);

/// Standard normal CDF.
double normal_cdf(double x);

/// 2 ell^2 Phi(-ell sqrt(I) / 2): speed of the limiting diffusion of RWM.
double rwm_speed(double ell, double fisher_I);
/// 2 Phi(-ell sqrt(I) / 2): limiting acceptance rate of RWM.
double rwm_asymptotic_acceptance(double ell, double fisher_I);

struct Optimum {
  double ell = 0.0;
  double value = 0.0;
};

/// Golden-section maximizer of a unimodal function on [lo, hi], tolerance 1e-6
/// in ell. A 64-point grid scan validates unimodality first; a violation
/// throws NumericFailure listing the scanned values.
Optimum optimize_ell(const std::function<double(double)>& fn, double lo, double hi, double tol = 1e-6);

}  // namespace mcmclab
