#include "mcmclab/mcmc_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcmclab/error.hpp"
#include "mcmclab/parallel.hpp"

namespace mcmclab {
namespace {

// Replica index reserved for the stream that draws a start position.
constexpr std::uint64_t kStartStream = std::numeric_limits<std::uint64_t>::max();

}  // namespace

std::string_view to_string(Algorithm a) { return a == Algorithm::kRwm ? "rwm" : "mala"; }

Algorithm parse_algorithm(std::string_view text) {
  if (text == "rwm" || text == "RWM") return Algorithm::kRwm;
  if (text == "mala" || text == "MALA") return Algorithm::kMala;
  throw UsageError("unknown algorithm '" + std::string(text) + "' (expected rwm or mala)");
}

double proposal_variance(Algorithm algorithm, std::size_t d, double ell) {
  if (d < 2) throw ContractViolation("chain dimension must be >= 2");
  if (!(ell > 0.0) || !std::isfinite(ell)) throw ContractViolation("proposal scale ell must be positive");
  const auto dd = static_cast<double>(d);
  return algorithm == Algorithm::kRwm ? ell * ell / (dd - 1.0) : ell * ell / std::cbrt(dd);
}

ChainSpec::ChainSpec(Algorithm alg, ProductTarget tgt, double ell_, std::uint64_t seed_, StartSpec start_)
    : algorithm(alg), target(std::move(tgt)), ell(ell_), seed(seed_), start(std::move(start_)) {
  (void)mcmclab::proposal_variance(algorithm, target.dim(), ell);
  if (start.kind == StartSpec::Kind::kExplicit && start.position.size() != target.dim()) {
    throw ContractViolation("explicit start has wrong dimension");
  }
}

double ChainSpec::proposal_variance() const { return mcmclab::proposal_variance(algorithm, dim(), ell); }

ChainState make_state(const ChainSpec& spec, std::vector<double> position) {
  ChainState s;
  s.log_pi = log_density(spec.target, position);
  if (spec.algorithm == Algorithm::kMala) s.grad = grad_log_density(spec.target, position);
  s.position = std::move(position);
  return s;
}

double rwm_log_ratio(const ProductTarget& target, std::span<const double> z, std::span<const double> y) {
  return log_density(target, y) - log_density(target, z);
}

double mala_log_ratio(const ProductTarget& target, std::span<const double> z, std::span<const double> y, double var) {
  const auto gz = grad_log_density(target, z);
  const auto gy = grad_log_density(target, y);
  double fwd = 0.0;  // |y - z - var/2 grad(z)|^2
  double bwd = 0.0;  // |z - y - var/2 grad(y)|^2
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = y[i] - z[i] - 0.5 * var * gz[i];
    const double b = z[i] - y[i] - 0.5 * var * gy[i];
    fwd += a * a;
    bwd += b * b;
  }
  return log_density(target, y) - log_density(target, z) + (fwd - bwd) / (2.0 * var);
}

Kernel::Kernel(const ChainSpec& spec)
    : spec_(&spec),
      h_(&spec.target.component()),
      var_(spec.proposal_variance()),
      sd_(std::sqrt(var_)),
      proposal_(spec.dim()),
      proposal_grad_(spec.algorithm == Algorithm::kMala ? spec.dim() : 0) {}

bool Kernel::step(ChainState& state, RngStream& rng) {
  return spec_->algorithm == Algorithm::kRwm ? rwm(state, rng) : mala(state, rng);
}

void Kernel::note_proposal(double log_ratio, double jump) {
  last_accept_prob_ = std::isfinite(log_ratio) ? (log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio)) : 0.0;
  last_jump_ = jump;
}

bool Kernel::rwm(ChainState& state, RngStream& rng) {
  const std::size_t d = proposal_.size();
  double lp = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double y = state.position[i] + sd_ * rng.normal();
    proposal_[i] = y;
    lp += h_->log_h(y);
  }
  const double log_u = rng.log_uniform();
  ++state.iteration;
  note_proposal(lp - state.log_pi, proposal_[0] - state.position[0]);
  // Overflow to a non-finite log-density counts as a rejection.
  if (std::isfinite(lp) && log_u < lp - state.log_pi) {
    state.position.swap(proposal_);
    state.log_pi = lp;
    ++state.accept_count;
    return true;
  }
  return false;
}

bool Kernel::mala(ChainState& state, RngStream& rng) {
  const std::size_t d = proposal_.size();
  const double half = 0.5 * var_;
  double lp = 0.0;
  double noise2 = 0.0;  // |y - z - var/2 grad(z)|^2 / var
  double back2 = 0.0;   // |z - y - var/2 grad(y)|^2
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = rng.normal();
    const double y = state.position[i] + half * state.grad[i] + sd_ * xi;
    const double g = h_->dlog_h(y);
    proposal_[i] = y;
    proposal_grad_[i] = g;
    lp += h_->log_h(y);
    const double b = state.position[i] - y - half * g;
    noise2 += xi * xi;
    back2 += b * b;
  }
  const double log_ratio = lp - state.log_pi + 0.5 * noise2 - back2 / (2.0 * var_);
  const double log_u = rng.log_uniform();
  ++state.iteration;
  note_proposal(log_ratio, proposal_[0] - state.position[0]);
  if (std::isfinite(log_ratio) && log_u < log_ratio) {
    state.position.swap(proposal_);
    state.grad.swap(proposal_grad_);
    state.log_pi = lp;
    ++state.accept_count;
    return true;
  }
  return false;
}

ChainState rwm_step(const ChainState& state, const ChainSpec& spec, RngStream& rng) {
  if (spec.algorithm != Algorithm::kRwm) throw ContractViolation("rwm_step: spec algorithm is not RWM");
  ChainState next = state;
  Kernel(spec).step(next, rng);
  return next;
}

ChainState mala_step(const ChainState& state, const ChainSpec& spec, RngStream& rng) {
  if (spec.algorithm != Algorithm::kMala) throw ContractViolation("mala_step: spec algorithm is not MALA");
  ChainState next = state;
  if (next.grad.size() != next.position.size()) next.grad = grad_log_density(spec.target, next.position);
  Kernel(spec).step(next, rng);
  return next;
}

std::vector<double> draw_start(const ChainSpec& spec, std::uint64_t start_idx) {
  if (spec.start.kind == StartSpec::Kind::kExplicit) return spec.start.position;
  RngStream rng = derive_stream(spec.seed, start_idx, kStartStream);
  auto x = sample_component(spec.target.component(), rng, spec.dim());
  if (spec.start.kind == StartSpec::Kind::kFixedFirst) x[0] = spec.start.first;
  return x;
}

std::optional<double> ChainRun::acceptance_rate() const {
  if (iterations == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(iterations);
}

ChainRun run_chain(const ChainSpec& spec, std::uint64_t n_iters, std::span<const std::uint64_t> record) {
  for (auto r : record) {
    if (r > n_iters) {
      throw ContractViolation("run_chain: record index " + std::to_string(r) + " exceeds n_iters " +
                              std::to_string(n_iters));
    }
  }
  std::vector<std::uint64_t> wanted(record.begin(), record.end());
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

  ChainState state = make_state(spec, draw_start(spec, 0));
  RngStream rng = derive_stream(spec.seed, 0, 0);
  Kernel kernel(spec);
  ChainRun out;
  auto next = wanted.begin();
  if (next != wanted.end() && *next == 0) {
    out.records.emplace_back(0, state.position[0]);
    ++next;
  }
  for (std::uint64_t it = 1; it <= n_iters; ++it) {
    kernel.step(state, rng);
    if (next != wanted.end() && *next == it) {
      out.records.emplace_back(it, state.position[0]);
      ++next;
    }
  }
  out.iterations = state.iteration;
  out.accepted = state.accept_count;
  return out;
}

double speedup_factor(Algorithm algorithm, std::size_t d) {
  const auto dd = static_cast<double>(d);
  if (algorithm == Algorithm::kRwm) return dd;
  const double c = std::cbrt(dd);
  const double r = std::round(c);
  return r * r * r == dd ? r : c;
}

std::uint64_t speedup_index(Algorithm algorithm, std::size_t d, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ContractViolation("speedup_index: t must be finite and >= 0");
  const double v = speedup_factor(algorithm, d) * t;
  // Absorb representation error so that products equal to an integer floor to it.
  return static_cast<std::uint64_t>(std::floor(v + 1e-9 * std::max(1.0, v)));
}

Ensemble ensemble_run(const ChainSpec& spec, const std::vector<std::vector<double>>& starts, std::size_t replicas,
                      std::span<const double> t_grid, unsigned threads) {
  if (replicas < 2) throw ContractViolation("ensemble_run: need at least 2 replicas per start");
  if (starts.empty()) throw ContractViolation("ensemble_run: no starts");
  if (t_grid.empty()) throw ContractViolation("ensemble_run: empty time grid");
  for (const auto& s : starts) {
    if (s.size() != spec.dim()) throw ContractViolation("ensemble_run: start has wrong dimension");
  }
  Ensemble ens;
  ens.t_grid.assign(t_grid.begin(), t_grid.end());
  for (double t : t_grid) ens.iterations.push_back(speedup_index(spec.algorithm, spec.dim(), t));
  const std::uint64_t horizon = *std::max_element(ens.iterations.begin(), ens.iterations.end());
  const std::size_t n_times = t_grid.size();
  const std::size_t n_chains = starts.size() * replicas;

  // values[chain * n_times + time]
  std::vector<double> values(n_chains * n_times);
  std::vector<std::uint64_t> accepted(n_chains, 0);
  parallel_for(n_chains, threads, [&](std::size_t c) {
    const std::size_t s = c / replicas;
    const std::size_t r = c % replicas;
    ChainState state = make_state(spec, starts[s]);
    RngStream rng = derive_stream(spec.seed, s, r);
    Kernel kernel(spec);
    double* out = values.data() + c * n_times;
    for (std::size_t k = 0; k < n_times; ++k) {
      if (ens.iterations[k] == 0) out[k] = state.position[0];
    }
    for (std::uint64_t it = 1; it <= horizon; ++it) {
      kernel.step(state, rng);
      for (std::size_t k = 0; k < n_times; ++k) {
        if (ens.iterations[k] == it) out[k] = state.position[0];
      }
    }
    accepted[c] = state.accept_count;
  });

  ens.laws.resize(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    ens.laws[s].reserve(n_times);
    for (std::size_t k = 0; k < n_times; ++k) {
      std::vector<double> atoms(replicas);
      for (std::size_t r = 0; r < replicas; ++r) atoms[r] = values[(s * replicas + r) * n_times + k];
      ens.laws[s].emplace_back(std::move(atoms));
    }
  }
  for (auto a : accepted) ens.accepted += a;
  ens.proposals = static_cast<std::uint64_t>(n_chains) * horizon;
  return ens;
}

}  // namespace mcmclab
