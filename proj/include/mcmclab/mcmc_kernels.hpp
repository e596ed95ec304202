#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mcmclab/kr_metric.hpp"
#include "mcmclab/rng.hpp"
#include "mcmclab/target_model.hpp"

namespace mcmclab {

enum class Algorithm { kRwm, kMala };

std::string_view to_string(Algorithm a);
/// Accepts "rwm" or "mala"; throws UsageError otherwise.
Algorithm parse_algorithm(std::string_view text);

// How a chain's initial position is chosen.
struct StartSpec {
  enum class Kind {
    kFromPi,      // all coordinates i.i.d. from h
    kExplicit,    // `position` verbatim
    kFixedFirst,  // first coordinate `first`, the rest i.i.d. from h
  };
  Kind kind = Kind::kFromPi;
  std::vector<double> position;
  double first = 0.0;

  static StartSpec from_pi() { return {}; }
  static StartSpec fixed(std::vector<double> x) { return {Kind::kExplicit, std::move(x), 0.0}; }
  static StartSpec fixed_first(double x1) { return {Kind::kFixedFirst, {}, x1}; }
};

struct ChainSpec {
  Algorithm algorithm = Algorithm::kRwm;
  ProductTarget target;
  double ell = 1.0;
  std::uint64_t seed = 0;
  StartSpec start;

  ChainSpec(Algorithm alg, ProductTarget tgt, double ell_, std::uint64_t seed_, StartSpec start_ = {});

  std::size_t dim() const { return target.dim(); }
  /// sigma_d^2: ell^2/(d-1) for RWM, ell^2 d^{-1/3} for MALA.
  double proposal_variance() const;
};

double proposal_variance(Algorithm algorithm, std::size_t d, double ell);

struct ChainState {
  std::vector<double> position;
  std::uint64_t iteration = 0;
  std::uint64_t accept_count = 0;
  double log_pi = 0.0;
  std::vector<double> grad;  // filled for MALA only
};

/// State at `position` with cached log-density (and gradient for MALA).
ChainState make_state(const ChainSpec& spec, std::vector<double> position);

/// Log acceptance ratio log pi(y) - log pi(z) of a random-walk proposal.
double rwm_log_ratio(const ProductTarget& target, std::span<const double> z, std::span<const double> y);

/// Log acceptance ratio of a Langevin proposal z -> y with proposal variance `var`,
/// including the Hastings correction log q(y->z) - log q(z->y).
double mala_log_ratio(const ProductTarget& target, std::span<const double> z, std::span<const double> y, double var);

// In-place transition kernel with reusable scratch; one per worker.
class Kernel {
 public:
  explicit Kernel(const ChainSpec& spec);

  /// Advances the state by one iteration; returns true on acceptance.
  bool step(ChainState& state, RngStream& rng);

  /// Acceptance probability min(1, ratio) of the most recent proposal.
  double last_accept_prob() const { return last_accept_prob_; }
  /// First-coordinate displacement of the most recent proposal.
  double last_proposed_jump() const { return last_jump_; }

 private:
  void note_proposal(double log_ratio, double jump);
  bool rwm(ChainState& state, RngStream& rng);
  bool mala(ChainState& state, RngStream& rng);

  const ChainSpec* spec_;
  const TargetModel1D* h_;
  double var_;
  double sd_;
  std::vector<double> proposal_;
  std::vector<double> proposal_grad_;
  double last_accept_prob_ = 0.0;
  double last_jump_ = 0.0;
};

ChainState rwm_step(const ChainState& state, const ChainSpec& spec, RngStream& rng);
ChainState mala_step(const ChainState& state, const ChainSpec& spec, RngStream& rng);

/// Initial position for chain start index `start_idx` under the spec's start rule.
std::vector<double> draw_start(const ChainSpec& spec, std::uint64_t start_idx);

struct ChainRun {
  std::vector<std::pair<std::uint64_t, double>> records;  // (iteration, first coordinate)
  std::uint64_t iterations = 0;
  std::uint64_t accepted = 0;
  /// accepted / iterations; empty for a zero-length run.
  std::optional<double> acceptance_rate() const;
};

/// Runs one chain for n_iters iterations, recording the first coordinate at
/// each requested iteration (0 = start). Throws ContractViolation if any
/// requested index exceeds n_iters.
ChainRun run_chain(const ChainSpec& spec, std::uint64_t n_iters, std::span<const std::uint64_t> record);

/// Raw iteration for diffusion time t: floor(d t) for RWM, floor(d^{1/3} t) for MALA.
std::uint64_t speedup_index(Algorithm algorithm, std::size_t d, double t);
/// The time-change factor d or d^{1/3}.
double speedup_factor(Algorithm algorithm, std::size_t d);

// Per-start, per-time empirical laws of the first coordinate.
struct Ensemble {
  std::vector<double> t_grid;
  std::vector<std::uint64_t> iterations;           // speedup_index of each grid time
  std::vector<std::vector<EmpiricalMeasure1D>> laws;  // laws[start][time], R atoms each
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
};

/// Runs `replicas` independent chains from each start. Chain (s, r) uses the
/// stream derived from (spec.seed, s, r); results do not depend on `threads`.
Ensemble ensemble_run(const ChainSpec& spec, const std::vector<std::vector<double>>& starts, std::size_t replicas,
                      std::span<const double> t_grid, unsigned threads = 0);

}  // namespace mcmclab
