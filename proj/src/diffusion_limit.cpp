#include "mcmclab/diffusion_limit.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "mcmclab/error.hpp"
#include "mcmclab/parallel.hpp"
#include "mcmclab/rng.hpp"

namespace mcmclab {
namespace {

constexpr std::uint64_t kDiffusionStreamTag = 0xD1FF0510ULL;

}  // namespace

DiffusionSpec DiffusionSpec::with_default_step(std::shared_ptr<const TargetModel1D> component, double speed,
                                               double t_end) {
  DiffusionSpec s;
  s.component = std::move(component);
  s.speed = speed;
  s.dt = 1e-3 / speed;
  s.t_end = t_end;
  return s;
}

void DiffusionSpec::validate() const {
  if (!component) throw ContractViolation("DiffusionSpec: missing component density");
  if (!(speed > 0.0) || !std::isfinite(speed)) throw ContractViolation("DiffusionSpec: speed must be finite and positive");
  if (!(dt > 0.0)) throw ContractViolation("DiffusionSpec: dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ContractViolation("DiffusionSpec: t_end must be finite and >= 0");
  if (t_end > 0.0 && dt > t_end) throw ContractViolation("DiffusionSpec: dt exceeds t_end");
}

std::vector<double> simulate_diffusion_paths(const DiffusionSpec& spec, double u0, std::uint64_t seed,
                                             std::size_t n_paths, unsigned threads) {
  spec.validate();
  if (n_paths == 0) throw ContractViolation("simulate_diffusion: n_paths must be >= 1");
  const auto steps = spec.t_end > 0.0 ? static_cast<std::uint64_t>(std::ceil(spec.t_end / spec.dt - 1e-9)) : 0;
  const double dt = steps > 0 ? spec.t_end / static_cast<double>(steps) : 0.0;
  const double drift = 0.5 * spec.speed * dt;
  const double noise = std::sqrt(spec.speed * dt);
  const TargetModel1D& h = *spec.component;

  std::vector<double> out(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t p) {
    RngStream rng = derive_stream(seed, p, kDiffusionStreamTag);
    double u = u0;
    for (std::uint64_t k = 0; k < steps; ++k) {
      u += drift * h.dlog_h(u) + noise * rng.normal();
      if (!(std::abs(u) <= 1e8)) {
        std::ostringstream msg;
        msg << "simulate_diffusion: path " << p << " diverged at step " << k << " (dt=" << dt
            << "); reduce dt or check that (log h)' is Lipschitz";
        throw NumericFailure(msg.str());
      }
    }
    out[p] = u;
  });
  return out;
}

EmpiricalMeasure1D simulate_diffusion(const DiffusionSpec& spec, double u0, std::uint64_t seed, std::size_t n_paths,
                                      unsigned threads) {
  return EmpiricalMeasure1D(simulate_diffusion_paths(spec, u0, seed, n_paths, threads));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double rwm_asymptotic_acceptance(double ell, double fisher_I) {
  return 2.0 * normal_cdf(-0.5 * ell * std::sqrt(fisher_I));
}

double rwm_speed(double ell, double fisher_I) { return ell * ell * rwm_asymptotic_acceptance(ell, fisher_I); }

Optimum optimize_ell(const std::function<double(double)>& fn, double lo, double hi, double tol) {
  if (!(hi > lo)) throw ContractViolation("optimize_ell: empty bracket");
  constexpr int kScan = 64;
  std::vector<double> grid(kScan + 1), vals(kScan + 1);
  int best = 0;
  for (int i = 0; i <= kScan; ++i) {
    grid[i] = lo + (hi - lo) * i / kScan;
    vals[i] = fn(grid[i]);
    if (vals[i] > vals[best]) best = i;
  }
  const double slack = 1e-12 * std::max(1.0, std::abs(vals[best]));
  bool unimodal = true;
  for (int i = 1; i <= kScan; ++i) {
    if (i <= best && vals[i] < vals[i - 1] - slack) unimodal = false;
    if (i > best && vals[i] > vals[i - 1] + slack) unimodal = false;
  }
  if (!unimodal) {
    std::ostringstream msg;
    msg << "optimize_ell: function is not unimodal on [" << lo << ", " << hi << "]; scan:";
    for (int i = 0; i <= kScan; ++i) msg << ' ' << grid[i] << ':' << vals[i];
    throw NumericFailure(msg.str());
  }
  double a = grid[std::max(0, best - 1)];
  double b = grid[std::min(kScan, best + 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, fn(x)};
}

}  // namespace mcmclab
