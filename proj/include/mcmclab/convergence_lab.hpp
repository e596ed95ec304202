#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcmclab/kr_metric.hpp"
#include "mcmclab/mcmc_kernels.hpp"
#include "mcmclab/target_model.hpp"

namespace mcmclab {

// Monte Carlo sizes of an experiment.
struct Budget {
  std::size_t starts = 8;        // K: independent starting points drawn from pi
  std::size_t replicas = 128;    // R: chains per start
  std::size_t reference = 1024;  // M: reference sample from h
  std::uint64_t iters = 100000;  // chain length for acceptance runs and sweeps
  std::size_t paths = 16384;     // diffusion paths / pooled chains for limit checks

  void validate() const;
};

/// "small", "medium" or "paper"; throws UsageError otherwise.
Budget budget_preset(std::string_view name);

/// Geometric diffusion-time grid 0.125, 0.25, ..., 16.
std::vector<double> default_t_grid();

// pi-averaged distance to stationarity of the first coordinate, on a grid of
// diffusion times.
struct DistanceCurve {
  Algorithm algorithm = Algorithm::kRwm;
  std::size_t d = 0;
  double ell = 0.0;
  std::vector<double> grid;
  std::vector<std::uint64_t> iterations;
  std::vector<double> dist_hat;
  std::vector<double> band;                    // 1.96 x bootstrap sd over starts
  std::vector<std::vector<double>> per_start;  // per_start[s][k]
  NoiseFloor noise;
  double acceptance = 0.0;
  std::vector<std::string> warnings;
};

struct CurveOptions {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  /// When set, a noise-floor bias above epsilon / 4 is recorded as a warning.
  std::optional<double> epsilon;
  int bootstrap = 200;
};

/// Runs K x R chains from K pi-starts and measures, at each grid time, the KR
/// distance between each start's R-replica law and an M-atom reference from h.
/// M must be a multiple of R; each replica atom then carries weight M/R.
DistanceCurve distance_curve(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                             double ell, std::span<const double> t_grid, const Budget& budget,
                             const CurveOptions& options);

/// Grid indices k where dist_hat[k+1] > dist_hat[k] + band[k] + band[k+1].
std::vector<std::size_t> monotonicity_violations(const DistanceCurve& curve);

struct ConvergenceTime {
  bool bounded = false;
  double iterations = 0.0;  // raw iterations, interpolated
  double t = 0.0;           // diffusion time, interpolated
  std::string diagnostics;
};

/// First crossing of dist_hat + band below epsilon, interpolated linearly in
/// raw iterations between the bracketing grid points. An unbounded result
/// carries the smallest upper envelope seen.
ConvergenceTime convergence_time(const DistanceCurve& curve, double epsilon);
/// Same, for an explicit envelope (used by the bootstrap).
ConvergenceTime convergence_time(std::span<const double> grid, std::span<const std::uint64_t> iterations,
                                 std::span<const double> upper, double epsilon);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through (log x, log y). Needs two distinct x and positive data.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

// How the proposal scale is chosen per dimension.
struct EllRule {
  enum class Kind { kFixed, kAcceptance };
  Kind kind = Kind::kFixed;
  double value = 2.38;  // ell for kFixed, target acceptance for kAcceptance

  static EllRule fixed(double ell) { return {Kind::kFixed, ell}; }
  static EllRule acceptance(double rate) { return {Kind::kAcceptance, rate}; }
};

/// Parses "2.38" (fixed) or "acc:0.574" (calibrated). Throws UsageError.
EllRule parse_ell_rule(std::string_view text);
std::string to_string(const EllRule& rule);

struct Calibration {
  double ell = 0.0;
  double acceptance = 0.0;
};

/// Bisection in log ell on the acceptance rate of `chains` pi-started chains
/// of length `iters`, with common random numbers across evaluations. Throws
/// NumericFailure if the target cannot be met within 0.01.
Calibration calibrate_ell(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                          double target_acceptance, std::uint64_t seed, unsigned threads = 0,
                          std::size_t chains = 8, std::uint64_t iters = 2000);

struct ScalingFit {
  Algorithm algorithm = Algorithm::kRwm;
  std::vector<std::size_t> dims;
  std::vector<double> ells;
  std::vector<double> T_eps;
  double epsilon = 0.2;
  double slope = 0.0;
  double slope_lo = 0.0;  // 95% bootstrap interval
  double slope_hi = 0.0;
  int bootstrap_used = 0;
  std::vector<DistanceCurve> curves;
};

struct ScalingOptions {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<double> t_grid = default_t_grid();
  int bootstrap = 200;
};

/// Convergence time per dimension and the fitted growth exponent. Throws
/// UnboundedTime naming the first dimension whose curve never crosses epsilon.
ScalingFit scaling_fit(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target,
                       std::span<const std::size_t> dims, const EllRule& rule, double epsilon, const Budget& budget,
                       const ScalingOptions& options);

struct SweepRow {
  double ell = 0.0;
  double acceptance = 0.0;
  double esjd = 0.0;   // first-coordinate expected squared jump per iteration
  double proxy = 0.0;  // esjd x speedup factor
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best = 0;
};

/// Scales whose calibrated acceptance rates are evenly spaced from 0.95 down to 0.05.
std::vector<double> sweep_grid(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                               std::size_t points, std::uint64_t seed, unsigned threads = 0);

/// Acceptance and Rao-Blackwellized jump distance of `chains` pi-started
/// chains of length iters at each ell. Needs at least 8 grid points.
SweepResult acceptance_sweep(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                             std::span<const double> ell_grid, std::uint64_t iters, std::uint64_t seed,
                             unsigned threads = 0, std::size_t chains = 4);

struct LimitRow {
  std::size_t d = 0;
  std::uint64_t iteration = 0;
  double kr = 0.0;
  double band = 0.0;  // 1.96 x bootstrap sd
};

struct LimitOptions {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double u0 = 2.0;  // first coordinate of every chain and of the diffusion
  int bootstrap = 32;
};

/// KR distance between the first coordinate of `paths` chains started at
/// (u0, pi-draws) after speedup_index(t) iterations and the diffusion law at
/// time t, for RWM with speed rwm_speed(ell, I).
std::vector<LimitRow> weak_limit_comparison(std::shared_ptr<const TargetModel1D> target,
                                            std::span<const std::size_t> dims, double ell, double t,
                                            std::size_t paths, const LimitOptions& options);

/// True when kr[k] - kr[k+1] > sqrt(band[k]^2 + band[k+1]^2) for every k.
bool strictly_decreasing_beyond_bands(std::span<const LimitRow> rows);

struct StationarityProbe {
  std::uint64_t iteration = 0;
  double kr = 0.0;
  double floor = 0.0;  // noise_floor.level
};

/// Pools one first-coordinate atom per pi-started chain at each probe
/// iteration and compares it to an independent reference of the same size.
std::vector<StationarityProbe> stationarity_probe(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target,
                                                  std::size_t d, double ell, std::span<const std::uint64_t> probes,
                                                  std::size_t chains, std::uint64_t seed, unsigned threads = 0);

}  // namespace mcmclab
