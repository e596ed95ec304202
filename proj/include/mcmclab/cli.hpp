#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcmclab/convergence_lab.hpp"
#include "mcmclab/mcmc_kernels.hpp"

namespace mcmclab {

// Effective settings of one invocation. Every field has a config key of the
// same name (with '-' for '_'); flags override the config file.
struct RunConfig {
  std::string subcommand;
  std::string target = "std_normal";
  Algorithm algorithm = Algorithm::kRwm;
  std::vector<std::size_t> dims{8};
  std::optional<EllRule> ell;  // empty: 2.38 for RWM, acc:0.574 for MALA
  std::vector<double> ell_grid;
  std::string budget_name = "small";
  Budget budget = budget_preset("small");
  std::size_t chains = 4;
  std::size_t points = 12;
  std::uint64_t thin = 1;
  int bootstrap = 200;
  double epsilon = 0.2;
  std::vector<double> t_grid = default_t_grid();
  double t = 1.0;
  std::optional<double> speed;
  std::optional<double> dt;
  double u0 = 2.0;
  std::string input_a;
  std::string input_b;
  std::string out;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  unsigned threads = 0;
  std::string config_path;

  std::map<std::string, std::string> effective;   // every key, canonical text
  std::map<std::string, std::string> from_file;   // as read from --config
  std::map<std::string, std::string> from_flags;  // as given on the command line

  EllRule ell_rule() const;
};

/// Thrown by parse_config for --help; what() is the help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Subcommand, then --key value flags. A --config file holds key=value lines
/// (or is a manifest.json whose "config" object is reused). Throws UsageError
/// naming the offending token.
RunConfig parse_config(int argc, const char* const argv[]);
RunConfig parse_config(const std::vector<std::string>& args);

/// Executes the subcommand, writing outputs and manifest.json into out_dir.
/// Returns the process exit code; errors propagate as exceptions. Diagnostic
/// warnings for a custom target go to `warn` and into the manifest.
int run(const RunConfig& config, std::ostream& log, std::ostream& warn);

/// parse_config + run with the error idiom mapped to exit codes:
/// 0 ok, 2 usage, 3 numeric or I/O failure, 4 unbounded convergence time.
int main_entry(int argc, const char* const argv[], std::ostream& out, std::ostream& err);

}  // namespace mcmclab
