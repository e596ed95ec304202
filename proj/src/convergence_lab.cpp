#include "mcmclab/convergence_lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcmclab/diffusion_limit.hpp"
#include "mcmclab/error.hpp"
#include "mcmclab/parallel.hpp"
#include "mcmclab/rng.hpp"

namespace mcmclab {
namespace {

// Stream tags; every random quantity of an experiment hangs off (seed, tag, d).
constexpr std::uint64_t kTagChains = 0x10;
constexpr std::uint64_t kTagReference = 0x11;
constexpr std::uint64_t kTagNoise = 0x12;
constexpr std::uint64_t kTagBootstrap = 0x13;
constexpr std::uint64_t kTagCalibrate = 0x14;
constexpr std::uint64_t kTagFit = 0x15;
constexpr std::uint64_t kTagSweep = 0x16;
constexpr std::uint64_t kTagLimit = 0x17;
constexpr std::uint64_t kTagDiffusion = 0x18;
constexpr std::uint64_t kTagStationary = 0x19;

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sd_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1));
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

std::size_t draw_index(RngStream& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

// Acceptance rate of pi-started chains, common random numbers in `seed`.
double acceptance_at(Algorithm algorithm, const std::shared_ptr<const TargetModel1D>& target, std::size_t d,
                     double ell, std::uint64_t seed, unsigned threads, std::size_t chains, std::uint64_t iters) {
  const ChainSpec spec(algorithm, ProductTarget(target, d), ell, seed);
  std::vector<std::uint64_t> accepted(chains, 0);
  parallel_for(chains, threads, [&](std::size_t c) {
    ChainState state = make_state(spec, draw_start(spec, c));
    RngStream rng = derive_stream(seed, c, 0);
    Kernel kernel(spec);
    for (std::uint64_t it = 0; it < iters; ++it) kernel.step(state, rng);
    accepted[c] = state.accept_count;
  });
  const auto total = std::accumulate(accepted.begin(), accepted.end(), std::uint64_t{0});
  return static_cast<double>(total) / (static_cast<double>(chains) * static_cast<double>(iters));
}

// First coordinate of `chains` independent chains at each probe iteration;
// chain c starts at draw_start(spec, c) and uses the stream (spec.seed, c, 0).
// Result is indexed [chain * probes.size() + p].
std::vector<double> pooled_first_coordinate(const ChainSpec& spec, std::size_t chains,
                                            std::span<const std::uint64_t> probes, unsigned threads) {
  const std::uint64_t horizon = *std::max_element(probes.begin(), probes.end());
  const std::size_t P = probes.size();
  std::vector<double> values(chains * P);
  parallel_for(chains, threads, [&](std::size_t c) {
    ChainState state = make_state(spec, draw_start(spec, c));
    RngStream rng = derive_stream(spec.seed, c, 0);
    Kernel kernel(spec);
    for (std::uint64_t it = 0; it <= horizon; ++it) {
      if (it > 0) kernel.step(state, rng);
      for (std::size_t p = 0; p < P; ++p) {
        if (probes[p] == it) values[c * P + p] = state.position[0];
      }
    }
  });
  return values;
}

}  // namespace

void Budget::validate() const {
  if (starts < 1 || replicas < 1 || reference < 1 || iters < 1 || paths < 1) {
    throw ContractViolation("budget: every size must be >= 1");
  }
}

Budget budget_preset(std::string_view name) {
  if (name == "small") return {16, 256, 2048, 100000, 16384};
  if (name == "medium") return {32, 512, 4096, 100000, 65536};
  if (name == "paper") return {128, 2048, 16384, 1000000, 262144};
  throw UsageError("unknown budget preset '" + std::string(name) + "' (expected small, medium or paper)");
}

std::vector<double> default_t_grid() { return {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}; }

DistanceCurve distance_curve(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                             double ell, std::span<const double> t_grid, const Budget& budget,
                             const CurveOptions& options) {
  budget.validate();
  if (t_grid.empty()) throw ContractViolation("distance_curve: empty time grid");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!(t_grid[k] >= 0.0) || (k > 0 && !(t_grid[k] > t_grid[k - 1]))) {
      throw ContractViolation("distance_curve: time grid must be non-negative and strictly increasing");
    }
  }
  const std::size_t K = budget.starts;
  const std::size_t R = budget.replicas;
  const std::size_t M = budget.reference;
  if (M % R != 0) {
    throw ContractViolation("distance_curve: reference size " + std::to_string(M) + " is not a multiple of replicas " +
                            std::to_string(R));
  }
  const std::size_t weight = M / R;

  const ChainSpec spec(algorithm, ProductTarget(target, d), ell, stream_id(options.seed, kTagChains, d));
  std::vector<std::vector<double>> starts;
  starts.reserve(K);
  for (std::size_t s = 0; s < K; ++s) starts.push_back(draw_start(spec, s));
  const Ensemble ens = ensemble_run(spec, starts, R, t_grid, options.threads);

  RngStream ref_rng = derive_stream(options.seed, kTagReference, d);
  const EmpiricalMeasure1D reference(sample_component(*target, ref_rng, M));

  const std::size_t T = t_grid.size();
  DistanceCurve curve;
  curve.algorithm = algorithm;
  curve.d = d;
  curve.ell = ell;
  curve.grid.assign(t_grid.begin(), t_grid.end());
  curve.iterations = ens.iterations;
  curve.per_start.assign(K, std::vector<double>(T));
  parallel_for(K * T, options.threads, [&](std::size_t job) {
    const std::size_t s = job / T;
    const std::size_t k = job % T;
    std::vector<double> atoms;
    atoms.reserve(M);
    for (double x : ens.laws[s][k].atoms()) atoms.insert(atoms.end(), weight, x);
    curve.per_start[s][k] = kr_distance(EmpiricalMeasure1D(std::move(atoms)), reference).distance;
  });

  curve.dist_hat.assign(T, 0.0);
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t s = 0; s < K; ++s) curve.dist_hat[k] += curve.per_start[s][k];
    curve.dist_hat[k] /= static_cast<double>(K);
  }

  // Bootstrap over starts for the band.
  curve.band.assign(T, 0.0);
  if (K > 1 && options.bootstrap > 1) {
    RngStream rng = derive_stream(options.seed, kTagBootstrap, d);
    std::vector<std::vector<double>> means(T, std::vector<double>(options.bootstrap));
    for (int b = 0; b < options.bootstrap; ++b) {
      std::vector<double> acc(T, 0.0);
      for (std::size_t i = 0; i < K; ++i) {
        const auto& row = curve.per_start[draw_index(rng, K)];
        for (std::size_t k = 0; k < T; ++k) acc[k] += row[k];
      }
      for (std::size_t k = 0; k < T; ++k) means[k][b] = acc[k] / static_cast<double>(K);
    }
    for (std::size_t k = 0; k < T; ++k) curve.band[k] = 1.96 * sd_of(means[k]);
  }

  RngStream noise_rng = derive_stream(options.seed, kTagNoise, d);
  curve.noise = estimate_noise_floor(reference, R, noise_rng);
  curve.acceptance = ens.proposals > 0 ? static_cast<double>(ens.accepted) / static_cast<double>(ens.proposals) : 0.0;

  if (options.epsilon && curve.noise.bias > *options.epsilon / 4.0) {
    std::ostringstream msg;
    msg << "noise floor bias " << curve.noise.bias << " exceeds epsilon/4 = " << *options.epsilon / 4.0
        << " at d=" << d << "; increase replicas";
    curve.warnings.push_back(msg.str());
  }
  for (auto k : monotonicity_violations(curve)) {
    std::ostringstream msg;
    msg << "distance increases beyond bands between t=" << curve.grid[k] << " and t=" << curve.grid[k + 1];
    curve.warnings.push_back(msg.str());
  }
  return curve;
}

std::vector<std::size_t> monotonicity_violations(const DistanceCurve& curve) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k + 1 < curve.dist_hat.size(); ++k) {
    if (curve.dist_hat[k + 1] > curve.dist_hat[k] + curve.band[k] + curve.band[k + 1]) out.push_back(k);
  }
  return out;
}

ConvergenceTime convergence_time(std::span<const double> grid, std::span<const std::uint64_t> iterations,
                                 std::span<const double> upper, double epsilon) {
  if (grid.size() != upper.size() || grid.size() != iterations.size() || grid.empty()) {
    throw ContractViolation("convergence_time: grid, iterations and envelope must have equal non-zero length");
  }
  if (!(epsilon > 0.0)) throw ContractViolation("convergence_time: epsilon must be positive");
  ConvergenceTime out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(upper[k] < epsilon)) continue;
    out.bounded = true;
    if (k == 0) {
      out.iterations = static_cast<double>(iterations[0]);
      out.t = grid[0];
    } else {
      const double frac = (upper[k - 1] - epsilon) / (upper[k - 1] - upper[k]);
      out.iterations = iterations[k - 1] + frac * (static_cast<double>(iterations[k]) - iterations[k - 1]);
      out.t = grid[k - 1] + frac * (grid[k] - grid[k - 1]);
    }
    return out;
  }
  const auto it = std::min_element(upper.begin(), upper.end());
  std::ostringstream msg;
  msg << "distance + band never falls below epsilon=" << epsilon << "; smallest envelope " << *it << " at t="
      << grid[it - upper.begin()] << " (last grid time " << grid.back() << ")";
  out.diagnostics = msg.str();
  return out;
}

ConvergenceTime convergence_time(const DistanceCurve& curve, double epsilon) {
  std::vector<double> upper(curve.dist_hat.size());
  for (std::size_t k = 0; k < upper.size(); ++k) upper[k] = curve.dist_hat[k] + curve.band[k];
  return convergence_time(curve.grid, curve.iterations, upper, epsilon);
}

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractViolation("fit_loglog: need at least two paired points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ContractViolation("fit_loglog: data must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = mean_of(lx);
  const double my = mean_of(ly);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractViolation("fit_loglog: need two distinct x values");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

EllRule parse_ell_rule(std::string_view text) {
  auto number = [&](std::string_view s) {
    std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != str.size() || !(v > 0.0) || !std::isfinite(v)) {
      throw UsageError("malformed ell rule '" + std::string(text) + "'");
    }
    return v;
  };
  if (text.starts_with("acc:")) {
    const double a = number(text.substr(4));
    if (!(a < 1.0)) throw UsageError("ell rule target acceptance must lie in (0, 1): '" + std::string(text) + "'");
    return EllRule::acceptance(a);
  }
  return EllRule::fixed(number(text));
}

std::string to_string(const EllRule& rule) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, rule.value).ptr;
  return (rule.kind == EllRule::Kind::kAcceptance ? "acc:" : "") + std::string(buf, end);
}

Calibration calibrate_ell(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                          double target_acceptance, std::uint64_t seed, unsigned threads, std::size_t chains,
                          std::uint64_t iters) {
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw ContractViolation("calibrate_ell: target acceptance must lie in (0, 1)");
  }
  double lo = std::log(1e-3);
  double hi = std::log(50.0);
  Calibration best{std::exp(0.5 * (lo + hi)), -1.0};
  for (int step = 0; step < 60; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double ell = std::exp(mid);
    const double acc = acceptance_at(algorithm, target, d, ell, seed, threads, chains, iters);
    if (best.acceptance < 0.0 || std::abs(acc - target_acceptance) < std::abs(best.acceptance - target_acceptance)) {
      best = {ell, acc};
    }
    if (std::abs(acc - target_acceptance) < 0.002 || hi - lo < 1e-6) break;
    if (acc > target_acceptance) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(best.acceptance - target_acceptance) > 0.01) {
    std::ostringstream msg;
    msg << "calibrate_ell: could not reach acceptance " << target_acceptance << " at d=" << d << "; best "
        << best.acceptance << " at ell=" << best.ell;
    throw NumericFailure(msg.str());
  }
  return best;
}

ScalingFit scaling_fit(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target,
                       std::span<const std::size_t> dims, const EllRule& rule, double epsilon, const Budget& budget,
                       const ScalingOptions& options) {
  if (dims.size() < 2) throw ContractViolation("scaling_fit: need at least two dimensions");
  ScalingFit fit;
  fit.algorithm = algorithm;
  fit.dims.assign(dims.begin(), dims.end());
  fit.epsilon = epsilon;
  for (std::size_t d : dims) {
    double ell = rule.value;
    if (rule.kind == EllRule::Kind::kAcceptance) {
      ell = calibrate_ell(algorithm, target, d, rule.value, stream_id(options.seed, kTagCalibrate, d), options.threads)
                .ell;
    }
    CurveOptions copt;
    copt.seed = options.seed;
    copt.threads = options.threads;
    copt.epsilon = epsilon;
    copt.bootstrap = options.bootstrap;
    DistanceCurve curve = distance_curve(algorithm, target, d, ell, options.t_grid, budget, copt);
    const ConvergenceTime ct = convergence_time(curve, epsilon);
    if (!ct.bounded) throw UnboundedTime("scaling_fit: d=" + std::to_string(d) + ": " + ct.diagnostics);
    if (!(ct.iterations > 0.0)) {
      throw NumericFailure("scaling_fit: d=" + std::to_string(d) + " converged at iteration 0; refine the time grid");
    }
    fit.ells.push_back(ell);
    fit.T_eps.push_back(ct.iterations);
    fit.curves.push_back(std::move(curve));
  }
  std::vector<double> x(dims.begin(), dims.end());
  fit.slope = fit_loglog(x, fit.T_eps).slope;

  // Resample starts within each dimension; bands stay at their original widths.
  RngStream rng = derive_stream(options.seed, kTagFit, 0);
  std::vector<double> slopes;
  for (int b = 0; b < options.bootstrap; ++b) {
    std::vector<double> T;
    for (const auto& curve : fit.curves) {
      const std::size_t K = curve.per_start.size();
      std::vector<double> upper(curve.grid.size(), 0.0);
      for (std::size_t i = 0; i < K; ++i) {
        const auto& row = curve.per_start[draw_index(rng, K)];
        for (std::size_t k = 0; k < upper.size(); ++k) upper[k] += row[k];
      }
      for (std::size_t k = 0; k < upper.size(); ++k) upper[k] = upper[k] / K + curve.band[k];
      const ConvergenceTime ct = convergence_time(curve.grid, curve.iterations, upper, epsilon);
      if (!ct.bounded || !(ct.iterations > 0.0)) break;
      T.push_back(ct.iterations);
    }
    if (T.size() == x.size()) slopes.push_back(fit_loglog(x, T).slope);
  }
  fit.bootstrap_used = static_cast<int>(slopes.size());
  if (slopes.size() >= 2) {
    fit.slope_lo = percentile(slopes, 0.025);
    fit.slope_hi = percentile(slopes, 0.975);
  } else {
    fit.slope_lo = fit.slope_hi = fit.slope;
  }
  return fit;
}

std::vector<double> sweep_grid(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                               std::size_t points, std::uint64_t seed, unsigned threads) {
  if (points < 2) throw ContractViolation("sweep_grid: need at least two points");
  const std::uint64_t cal_seed = stream_id(seed, kTagCalibrate, d);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double acc = 0.95 - 0.90 * static_cast<double>(i) / static_cast<double>(points - 1);
    grid[i] = calibrate_ell(algorithm, target, d, acc, cal_seed, threads).ell;
  }
  for (std::size_t i = 1; i < points; ++i) {
    if (!(grid[i] > grid[i - 1])) throw NumericFailure("sweep_grid: calibrated scales are not increasing");
  }
  return grid;
}

SweepResult acceptance_sweep(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target, std::size_t d,
                             std::span<const double> ell_grid, std::uint64_t iters, std::uint64_t seed,
                             unsigned threads, std::size_t chains) {
  if (ell_grid.size() < 8) {
    throw ContractViolation("acceptance_sweep: need at least 8 grid points, got " + std::to_string(ell_grid.size()));
  }
  if (iters == 0 || chains == 0) throw ContractViolation("acceptance_sweep: iters and chains must be >= 1");
  const std::size_t G = ell_grid.size();
  const std::uint64_t sweep_seed = stream_id(seed, kTagSweep, d);
  std::vector<std::uint64_t> accepted(G * chains, 0);
  std::vector<double> jumps(G * chains, 0.0);
  parallel_for(G * chains, threads, [&](std::size_t job) {
    const std::size_t g = job / chains;
    const std::size_t c = job % chains;
    const ChainSpec spec(algorithm, ProductTarget(target, d), ell_grid[g], sweep_seed);
    ChainState state = make_state(spec, draw_start(spec, c));
    RngStream rng = derive_stream(sweep_seed, c, 0);
    Kernel kernel(spec);
    double sum = 0.0;
    for (std::uint64_t it = 0; it < iters; ++it) {
      kernel.step(state, rng);
      const double j = kernel.last_proposed_jump();
      sum += kernel.last_accept_prob() * j * j;
    }
    accepted[job] = state.accept_count;
    jumps[job] = sum;
  });
  SweepResult out;
  const double n = static_cast<double>(iters) * static_cast<double>(chains);
  const double factor = speedup_factor(algorithm, d);
  for (std::size_t g = 0; g < G; ++g) {
    SweepRow row;
    row.ell = ell_grid[g];
    double acc = 0.0, jump = 0.0;
    for (std::size_t c = 0; c < chains; ++c) {
      acc += static_cast<double>(accepted[g * chains + c]);
      jump += jumps[g * chains + c];
    }
    row.acceptance = acc / n;
    row.esjd = jump / n;
    row.proxy = row.esjd * factor;
    out.rows.push_back(row);
    if (row.proxy > out.rows[out.best].proxy) out.best = g;
  }
  return out;
}

std::vector<LimitRow> weak_limit_comparison(std::shared_ptr<const TargetModel1D> target,
                                            std::span<const std::size_t> dims, double ell, double t,
                                            std::size_t paths, const LimitOptions& options) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ContractViolation("weak_limit_comparison: t must be finite and >= 0");
  if (paths < 2) throw ContractViolation("weak_limit_comparison: need at least 2 paths");

  DiffusionSpec dspec = DiffusionSpec::with_default_step(target, rwm_speed(ell, target->fisher_I()), t);
  if (t > 0.0) dspec.dt = std::min(dspec.dt, t);
  const EmpiricalMeasure1D diffusion =
      simulate_diffusion(dspec, options.u0, stream_id(options.seed, kTagDiffusion, 0), paths, options.threads);

  std::vector<LimitRow> rows;
  for (std::size_t d : dims) {
    const ChainSpec spec(Algorithm::kRwm, ProductTarget(target, d), ell, stream_id(options.seed, kTagLimit, d),
                         StartSpec::fixed_first(options.u0));
    const std::uint64_t probe[] = {speedup_index(Algorithm::kRwm, d, t)};
    const EmpiricalMeasure1D chain(pooled_first_coordinate(spec, paths, probe, options.threads));

    LimitRow row;
    row.d = d;
    row.iteration = probe[0];
    row.kr = kr_distance(chain, diffusion).distance;
    if (options.bootstrap > 1) {
      RngStream rng = derive_stream(options.seed, kTagBootstrap, d);
      std::vector<double> reps(options.bootstrap);
      for (auto& r : reps) {
        const auto a = resample_to(chain, paths, rng);
        const auto b = resample_to(diffusion, paths, rng);
        r = kr_distance(a, b).distance;
      }
      row.band = 1.96 * sd_of(reps);
    }
    rows.push_back(row);
  }
  return rows;
}

bool strictly_decreasing_beyond_bands(std::span<const LimitRow> rows) {
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    const double gap = rows[k].kr - rows[k + 1].kr;
    if (!(gap > std::hypot(rows[k].band, rows[k + 1].band))) return false;
  }
  return true;
}

std::vector<StationarityProbe> stationarity_probe(Algorithm algorithm, std::shared_ptr<const TargetModel1D> target,
                                                  std::size_t d, double ell, std::span<const std::uint64_t> probes,
                                                  std::size_t chains, std::uint64_t seed, unsigned threads) {
  if (probes.empty()) throw ContractViolation("stationarity_probe: no probe iterations");
  if (chains < 2) throw ContractViolation("stationarity_probe: need at least 2 chains");
  const std::uint64_t base = stream_id(seed, kTagStationary, d);
  const ChainSpec spec(algorithm, ProductTarget(target, d), ell, base);
  const std::size_t P = probes.size();
  const std::vector<double> values = pooled_first_coordinate(spec, chains, probes, threads);

  RngStream ref_rng = derive_stream(base, kTagReference, 0);
  const EmpiricalMeasure1D reference(sample_component(*target, ref_rng, chains));
  const EmpiricalMeasure1D pool(sample_component(*target, ref_rng, 4 * chains));
  RngStream noise_rng = derive_stream(base, kTagNoise, 0);
  const NoiseFloor floor = estimate_noise_floor(pool, chains, noise_rng);

  std::vector<StationarityProbe> out;
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<double> atoms(chains);
    for (std::size_t c = 0; c < chains; ++c) atoms[c] = values[c * P + p];
    out.push_back({probes[p], kr_distance(EmpiricalMeasure1D(std::move(atoms)), reference).distance, floor.level});
  }
  return out;
}

}  // namespace mcmclab
