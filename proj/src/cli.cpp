#include "mcmclab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/version.hpp>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcmclab/diffusion_limit.hpp"
#include "mcmclab/error.hpp"
#include "mcmclab/kr_metric.hpp"
#include "mcmclab/parallel.hpp"
#include "mcmclab/rng.hpp"
#include "mcmclab/target_model.hpp"

#ifndef MCMCLAB_VERSION
#define MCMCLAB_VERSION "unknown"
#endif

namespace mcmclab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct KeyInfo {
  const char* name;
  const char* help;
  std::set<std::string> subcommands;
};

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"sample", "distance", "diffusion", "converge",
                                              "scaling", "sweep", "limit-check"};
  return names;
}

const std::vector<KeyInfo>& key_table() {
  static const std::set<std::string> all(subcommand_names().begin(), subcommand_names().end());
  static const std::vector<KeyInfo> keys{
      {"target", "component density name, or file:<path>",
       {"sample", "diffusion", "converge", "scaling", "sweep", "limit-check"}},
      {"algo", "rwm or mala", {"sample", "converge", "scaling", "sweep"}},
      {"dim", "dimension d", {"sample", "converge", "sweep"}},
      {"dims", "comma-separated dimensions", {"scaling", "limit-check"}},
      {"ell", "proposal scale, or acc:<rate> to calibrate", {"sample", "converge", "scaling", "limit-check"}},
      {"ell-grid", "comma-separated proposal scales (default: calibrated)", {"sweep"}},
      {"points", "number of sweep points when ell-grid is not given", {"sweep"}},
      {"budget", "preset: small, medium or paper", {"converge", "scaling", "sweep", "limit-check", "diffusion"}},
      {"starts", "K, starting points from pi", {"sample", "converge", "scaling"}},
      {"replicas", "R, chains per start", {"sample", "converge", "scaling"}},
      {"reference", "M, reference sample size (a multiple of R)", {"converge", "scaling"}},
      {"iters", "chain length", {"sample", "sweep"}},
      {"chains", "chains per sweep point", {"sweep"}},
      {"paths", "diffusion paths / pooled chains", {"diffusion", "limit-check"}},
      {"thin", "record every n-th iteration", {"sample"}},
      {"bootstrap", "bootstrap replicates", {"converge", "scaling", "limit-check"}},
      {"epsilon", "convergence threshold", {"converge", "scaling"}},
      {"t-grid", "comma-separated diffusion times", {"converge", "scaling"}},
      {"t", "diffusion time", {"diffusion", "limit-check"}},
      {"speed", "diffusion speed s", {"diffusion"}},
      {"dt", "Euler-Maruyama step (default 1e-3/s)", {"diffusion"}},
      {"u0", "starting value of the first coordinate", {"diffusion", "limit-check"}},
      {"a", "one-column CSV of reals", {"distance"}},
      {"b", "one-column CSV of reals", {"distance"}},
      {"out", "output file name inside out-dir", all},
      {"seed", "64-bit master seed", all},
      {"out-dir", "output directory", all},
      {"threads", "worker threads (default MCMCLAB_THREADS, else 1)", all},
  };
  return keys;
}

bool key_allowed(const std::string& key, const std::string& sub) {
  for (const auto& k : key_table()) {
    if (k.name == key) return k.subcommands.count(sub) > 0;
  }
  return false;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::string_view s = text;
  int base = 10;
  if (s.starts_with("0x") || s.starts_with("0X")) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError(key + ": malformed integer '" + text + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  const auto v = parse_u64(key, text);
  if (v < 1) throw UsageError(key + ": must be >= 1, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw UsageError(key + ": malformed number '" + text + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& key, const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (out.empty()) throw UsageError(key + ": empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path, const std::string& sub) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::map<std::string, std::string> out;

  if (trim(text).starts_with("{")) {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::exception& e) {
      throw UsageError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
      throw UsageError("config: manifest '" + path + "' has no \"config\" object");
    }
    if (j.contains("subcommand") && j["subcommand"] != sub) {
      throw UsageError("config: manifest '" + path + "' was written by '" + j["subcommand"].get<std::string>() +
                       "', not '" + sub + "'");
    }
    for (const auto& [k, v] : j["config"].items()) {
      if (!v.is_string()) throw UsageError("config: value of '" + k + "' in manifest is not a string");
      if (!key_allowed(k, sub)) throw UsageError("config: unknown key '" + k + "' for " + sub);
      out[k] = v.get<std::string>();
    }
    return out;
  }

  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config: line " + std::to_string(lineno) + " is not key=value: '" + body + "'");
    }
    const std::string key = normalize_key(trim(body.substr(0, eq)));
    std::string value = trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!key_allowed(key, sub)) {
      throw UsageError("config: unknown key '" + key + "' on line " + std::to_string(lineno) + " for " + sub);
    }
    out[key] = value;
  }
  return out;
}

void apply_defaults(RunConfig& c) {
  if (c.subcommand == "sample") {
    c.budget = {1, 1, 1, 1000, 1};
  } else if (c.subcommand == "limit-check") {
    c.bootstrap = 32;
  }
  const std::map<std::string, std::string> names{
      {"sample", "samples.csv"},  {"distance", "distance.json"}, {"diffusion", "diff.csv"},
      {"converge", "curve.csv"},  {"scaling", "scaling.csv"},    {"sweep", "sweep.csv"},
      {"limit-check", "limit.csv"}};
  c.out = names.at(c.subcommand);
}

void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "target") {
    c.target = v;
  } else if (key == "algo") {
    c.algorithm = parse_algorithm(v);
  } else if (key == "dim") {
    c.dims = {parse_count(key, v)};
  } else if (key == "dims") {
    c.dims.clear();
    for (const auto& item : split_list(key, v)) c.dims.push_back(parse_count(key, item));
  } else if (key == "ell") {
    c.ell = parse_ell_rule(v);
  } else if (key == "ell-grid") {
    c.ell_grid.clear();
    for (const auto& item : split_list(key, v)) c.ell_grid.push_back(parse_real(key, item));
  } else if (key == "points") {
    c.points = parse_count(key, v);
  } else if (key == "budget") {
    c.budget_name = v;
    c.budget = budget_preset(v);
  } else if (key == "starts") {
    c.budget.starts = parse_count(key, v);
  } else if (key == "replicas") {
    c.budget.replicas = parse_count(key, v);
  } else if (key == "reference") {
    c.budget.reference = parse_count(key, v);
  } else if (key == "iters") {
    c.budget.iters = parse_count(key, v);
  } else if (key == "chains") {
    c.chains = parse_count(key, v);
  } else if (key == "paths") {
    c.budget.paths = parse_count(key, v);
  } else if (key == "thin") {
    c.thin = parse_count(key, v);
  } else if (key == "bootstrap") {
    c.bootstrap = static_cast<int>(parse_count(key, v));
  } else if (key == "epsilon") {
    c.epsilon = parse_real(key, v);
    if (!(c.epsilon > 0.0)) throw UsageError("epsilon: must be positive, got '" + v + "'");
  } else if (key == "t-grid") {
    c.t_grid.clear();
    for (const auto& item : split_list(key, v)) c.t_grid.push_back(parse_real(key, item));
  } else if (key == "t") {
    c.t = parse_real(key, v);
  } else if (key == "speed") {
    c.speed = parse_real(key, v);
  } else if (key == "dt") {
    c.dt = parse_real(key, v);
  } else if (key == "u0") {
    c.u0 = parse_real(key, v);
  } else if (key == "a") {
    c.input_a = v;
  } else if (key == "b") {
    c.input_b = v;
  } else if (key == "out") {
    if (v.empty() || v.find('/') != std::string::npos || v.find('\\') != std::string::npos || v == "." ||
        v == "..") {
      throw UsageError("out: must be a plain file name inside out-dir, got '" + v + "'");
    }
    c.out = v;
  } else if (key == "seed") {
    c.seed = parse_u64(key, v);
  } else if (key == "out-dir") {
    if (v.empty()) throw UsageError("out-dir: empty path");
    c.out_dir = v;
  } else if (key == "threads") {
    c.threads = static_cast<unsigned>(parse_count(key, v));
  } else {
    throw UsageError("unknown key '" + key + "'");
  }
}

// Canonical text of every key the subcommand accepts; re-running from it
// reproduces the run.
std::map<std::string, std::string> effective_values(const RunConfig& c) {
  std::map<std::string, std::string> all{
      {"target", c.target},
      {"algo", std::string(to_string(c.algorithm))},
      {"dim", std::to_string(c.dims.front())},
      {"dims", join(c.dims)},
      {"ell", to_string(c.ell_rule())},
      {"ell-grid", join(c.ell_grid)},
      {"points", std::to_string(c.points)},
      {"budget", c.budget_name},
      {"starts", std::to_string(c.budget.starts)},
      {"replicas", std::to_string(c.budget.replicas)},
      {"reference", std::to_string(c.budget.reference)},
      {"iters", std::to_string(c.budget.iters)},
      {"chains", std::to_string(c.chains)},
      {"paths", std::to_string(c.budget.paths)},
      {"thin", std::to_string(c.thin)},
      {"bootstrap", std::to_string(c.bootstrap)},
      {"epsilon", fmt(c.epsilon)},
      {"t-grid", join(c.t_grid)},
      {"t", fmt(c.t)},
      {"speed", c.speed ? fmt(*c.speed) : ""},
      {"dt", c.dt ? fmt(*c.dt) : ""},
      {"u0", fmt(c.u0)},
      {"a", c.input_a},
      {"b", c.input_b},
      {"out", c.out},
      {"seed", std::to_string(c.seed)},
      {"out-dir", c.out_dir},
      {"threads", std::to_string(resolve_threads(c.threads))},
  };
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : all) {
    // Unset optional values are left out so that a re-run sees them unset too.
    if (key_allowed(k, c.subcommand) && !v.empty()) out[k] = v;
  }
  return out;
}

std::string help_text() {
  std::ostringstream s;
  s << "usage: mcmclab <subcommand> [--key value ...] [--config file]\n\nsubcommands:";
  for (const auto& name : subcommand_names()) s << ' ' << name;
  s << "\n\nkeys (also valid as key=value lines in a config file):\n";
  for (const auto& k : key_table()) {
    s << "  --" << k.name << std::string(12 - std::min<std::size_t>(11, std::strlen(k.name)), ' ') << k.help
      << "\n";
  }
  return s.str();
}

// ---------------------------------------------------------------------------
// Output

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoFailure("cannot create output directory '" + dir + "': " + ec.message());
    if (!fs::is_directory(dir_)) throw IoFailure("output path '" + dir + "' is not a directory");
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot write '" + p.string() + "'");
    f << content;
    f.close();
    if (!f) throw IoFailure("error while writing '" + p.string() + "'");
    if (name != "manifest.json") written_.push_back(name);
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

std::vector<double> read_column(const std::string& path, const char* key) {
  if (path.empty()) throw UsageError(std::string("missing required flag --") + key);
  std::ifstream in(path);
  if (!in) throw UsageError(std::string(key) + ": cannot read '" + path + "'");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec != std::errc() || ptr != body.data() + body.size() || !std::isfinite(v)) {
      if (out.empty() && lineno == 1) continue;  // header line
      throw UsageError(std::string(key) + ": line " + std::to_string(lineno) + " of '" + path +
                       "' is not a real number: '" + body + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(key) + ": '" + path + "' holds no values");
  return out;
}

std::vector<double> replicate(const std::vector<double>& v, std::size_t times) {
  std::vector<double> out;
  out.reserve(v.size() * times);
  for (double x : v) out.insert(out.end(), times, x);
  return out;
}

double resolve_ell(const RunConfig& c, const std::shared_ptr<const TargetModel1D>& target, std::size_t d,
                   Json& summary) {
  const EllRule rule = c.ell_rule();
  if (rule.kind == EllRule::Kind::kFixed) return rule.value;
  const Calibration cal =
      calibrate_ell(c.algorithm, target, d, rule.value, stream_id(c.seed, 0x14, d), c.threads);
  summary["calibrated_ell"] = cal.ell;
  summary["calibration_acceptance"] = cal.acceptance;
  return cal.ell;
}

Json curve_json(const DistanceCurve& curve) {
  Json j;
  j["d"] = curve.d;
  j["ell"] = curve.ell;
  j["acceptance"] = curve.acceptance;
  j["noise_floor"] = {{"n", curve.noise.n},
                      {"bias", curve.noise.bias},
                      {"spread", curve.noise.spread},
                      {"level", curve.noise.level}};
  j["monotonicity_violations"] = monotonicity_violations(curve).size();
  j["warnings"] = curve.warnings;
  return j;
}

std::string curve_csv(const DistanceCurve& curve) {
  std::string s = "t,iteration,dist,band\n";
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    s += fmt(curve.grid[k]) + ',' + std::to_string(curve.iterations[k]) + ',' + fmt(curve.dist_hat[k]) + ',' +
         fmt(curve.band[k]) + '\n';
  }
  return s;
}

// Each run_* returns the exit code and fills the manifest summary.

int run_sample(const RunConfig& c, OutputDir& out, Json& summary) {
  auto target = make_target(c.target);
  const std::size_t d = c.dims.front();
  const double ell = resolve_ell(c, target, d, summary);
  const ChainSpec spec(c.algorithm, ProductTarget(target, d), ell, c.seed);
  const std::size_t K = c.budget.starts;
  const std::size_t R = c.budget.replicas;
  const std::uint64_t iters = c.budget.iters;
  std::vector<std::uint64_t> record;
  for (std::uint64_t it = 0; it <= iters; it += c.thin) record.push_back(it);

  std::vector<std::string> blocks(K * R);
  std::vector<std::uint64_t> accepted(K * R, 0);
  parallel_for(K * R, c.threads, [&](std::size_t chain) {
    const std::size_t s = chain / R;
    const std::size_t r = chain % R;
    ChainState state = make_state(spec, draw_start(spec, s));
    RngStream rng = derive_stream(spec.seed, s, r);
    Kernel kernel(spec);
    std::string& text = blocks[chain];
    const std::string prefix = std::to_string(s) + ',' + std::to_string(r) + ',';
    auto next = record.begin();
    for (std::uint64_t it = 0; it <= iters; ++it) {
      if (it > 0) kernel.step(state, rng);
      if (next != record.end() && *next == it) {
        text += prefix + std::to_string(it) + ',' + fmt(state.position[0]) + '\n';
        ++next;
      }
    }
    accepted[chain] = state.accept_count;
  });
  std::string csv = "start_idx,replica_idx,iteration,coord1\n";
  for (const auto& b : blocks) csv += b;
  out.write(c.out, csv);

  const auto total = std::accumulate(accepted.begin(), accepted.end(), std::uint64_t{0});
  summary["ell"] = ell;
  summary["acceptance"] = iters > 0 ? static_cast<double>(total) / (static_cast<double>(K * R) * iters) : 0.0;
  return 0;
}

int run_distance(const RunConfig& c, OutputDir& out, Json& summary) {
  auto a = read_column(c.input_a, "a");
  auto b = read_column(c.input_b, "b");
  const std::size_t n_a = a.size();
  const std::size_t n_b = b.size();
  const std::size_t n = std::lcm(n_a, n_b);
  if (n > (std::size_t{1} << 22)) {
    throw UsageError("distance: sample sizes " + std::to_string(n_a) + " and " + std::to_string(n_b) +
                     " have no common multiple below 2^22");
  }
  const EmpiricalMeasure1D mu(replicate(a, n / n_a));
  const EmpiricalMeasure1D nu(replicate(b, n / n_b));
  const TransportResult r = kr_distance(mu, nu);
  RngStream rng = derive_stream(c.seed, 0x12, 0);
  const NoiseFloor floor = estimate_noise_floor(EmpiricalMeasure1D(b), std::min(n_a, n_b), rng);

  Json j;
  j["distance"] = r.distance;
  j["method"] = std::string(to_string(r.method));
  j["n"] = n;
  j["n_a"] = n_a;
  j["n_b"] = n_b;
  j["noise_floor"] = floor.level;
  j["noise_floor_bias"] = floor.bias;
  j["duality_gap"] = r.duality_gap();
  out.write(c.out, j.dump(2) + "\n");
  summary["distance"] = r.distance;
  summary["noise_floor"] = floor.level;
  return 0;
}

int run_diffusion(const RunConfig& c, OutputDir& out, Json& summary) {
  if (!c.speed) throw UsageError("missing required flag --speed");
  auto target = make_target(c.target);
  DiffusionSpec spec = DiffusionSpec::with_default_step(target, *c.speed, c.t);
  if (c.dt) spec.dt = *c.dt;
  const std::vector<double> values = simulate_diffusion_paths(spec, c.u0, c.seed, c.budget.paths, c.threads);
  std::string csv = "path,value\n";
  for (std::size_t p = 0; p < values.size(); ++p) csv += std::to_string(p) + ',' + fmt(values[p]) + '\n';
  const EmpiricalMeasure1D law(values);
  out.write(c.out, csv);
  summary["dt"] = spec.dt;
  summary["mean"] = law.mean();
  summary["variance"] = law.variance();
  return 0;
}

int run_converge(const RunConfig& c, OutputDir& out, Json& summary) {
  auto target = make_target(c.target);
  const std::size_t d = c.dims.front();
  const double ell = resolve_ell(c, target, d, summary);
  CurveOptions opt;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.epsilon = c.epsilon;
  opt.bootstrap = c.bootstrap;
  const DistanceCurve curve = distance_curve(c.algorithm, target, d, ell, c.t_grid, c.budget, opt);
  out.write(c.out, curve_csv(curve));
  summary["curve"] = curve_json(curve);
  const ConvergenceTime ct = convergence_time(curve, c.epsilon);
  if (ct.bounded) {
    summary["T_eps"] = ct.iterations;
    summary["t_eps"] = ct.t;
  } else {
    summary["T_eps"] = nullptr;
    summary["unbounded"] = ct.diagnostics;
  }
  return monotonicity_violations(curve).empty() ? 0 : 3;
}

int run_scaling(const RunConfig& c, OutputDir& out, Json& summary) {
  auto target = make_target(c.target);
  ScalingOptions opt;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.t_grid = c.t_grid;
  opt.bootstrap = c.bootstrap;
  const ScalingFit fit = scaling_fit(c.algorithm, target, c.dims, c.ell_rule(), c.epsilon, c.budget, opt);

  std::string csv = "d,ell,T_eps\n";
  for (std::size_t i = 0; i < fit.dims.size(); ++i) {
    csv += std::to_string(fit.dims[i]) + ',' + fmt(fit.ells[i]) + ',' + fmt(fit.T_eps[i]) + '\n';
  }
  out.write(c.out, csv);
  std::size_t violations = 0;
  Json curves = Json::array();
  for (const auto& curve : fit.curves) {
    out.write("curve_d" + std::to_string(curve.d) + ".csv", curve_csv(curve));
    violations += monotonicity_violations(curve).size();
    curves.push_back(curve_json(curve));
  }
  Json j;
  j["algorithm"] = std::string(to_string(fit.algorithm));
  j["dims"] = fit.dims;
  j["T_eps"] = fit.T_eps;
  j["epsilon"] = fit.epsilon;
  j["slope"] = fit.slope;
  j["ci"] = {fit.slope_lo, fit.slope_hi};
  j["bootstrap_used"] = fit.bootstrap_used;
  out.write("fit.json", j.dump(2) + "\n");
  summary["slope"] = fit.slope;
  summary["ci"] = {fit.slope_lo, fit.slope_hi};
  summary["curves"] = curves;
  summary["monotonicity_violations"] = violations;
  return violations == 0 ? 0 : 3;
}

int run_sweep(const RunConfig& c, OutputDir& out, Json& summary) {
  auto target = make_target(c.target);
  const std::size_t d = c.dims.front();
  const std::vector<double> grid =
      c.ell_grid.empty() ? sweep_grid(c.algorithm, target, d, c.points, c.seed, c.threads) : c.ell_grid;
  const SweepResult r = acceptance_sweep(c.algorithm, target, d, grid, c.budget.iters, c.seed, c.threads, c.chains);
  std::string csv = "ell,acceptance,esjd,proxy\n";
  for (const auto& row : r.rows) {
    csv += fmt(row.ell) + ',' + fmt(row.acceptance) + ',' + fmt(row.esjd) + ',' + fmt(row.proxy) + '\n';
  }
  out.write(c.out, csv);
  const SweepRow& best = r.rows[r.best];
  summary["best"] = {{"ell", best.ell}, {"acceptance", best.acceptance}, {"proxy", best.proxy}};
  return 0;
}

int run_limit_check(const RunConfig& c, OutputDir& out, Json& summary) {
  auto target = make_target(c.target);
  const EllRule rule = c.ell_rule();
  if (rule.kind != EllRule::Kind::kFixed) throw UsageError("limit-check: ell must be a fixed scale");
  LimitOptions opt;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.u0 = c.u0;
  opt.bootstrap = c.bootstrap;
  const auto rows = weak_limit_comparison(target, c.dims, rule.value, c.t, c.budget.paths, opt);
  std::string csv = "d,kr,band\n";
  for (const auto& row : rows) csv += std::to_string(row.d) + ',' + fmt(row.kr) + ',' + fmt(row.band) + '\n';
  out.write(c.out, csv);
  summary["speed"] = rwm_speed(rule.value, target->fisher_I());
  summary["strictly_decreasing"] = strictly_decreasing_beyond_bands(rows);
  return 0;
}

}  // namespace

EllRule RunConfig::ell_rule() const {
  if (ell) return *ell;
  return algorithm == Algorithm::kRwm ? EllRule::fixed(2.38) : EllRule::acceptance(0.574);
}

RunConfig parse_config(int argc, const char* const argv[]) {
  CLI::App app{"MCMC scaling laboratory"};
  app.set_help_flag();
  app.allow_windows_style_options(false);
  bool help = false;
  app.add_flag("-h,--help", help);
  app.require_subcommand(0, 1);

  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::string> config_paths;
  for (const auto& name : subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->set_help_flag();
    sub->add_flag("-h,--help", help);
    sub->add_option("--config", config_paths[name], "key=value file or manifest.json");
    for (const auto& k : key_table()) {
      if (k.subcommands.count(name)) sub->add_option(std::string("--") + k.name, raw[name][k.name], k.help);
    }
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()));
  }
  if (help) throw HelpRequested(help_text());
  if (app.get_subcommands().empty()) throw UsageError("missing subcommand\n" + help_text());

  RunConfig c;
  c.subcommand = app.get_subcommands().front()->get_name();
  CLI::App* sub = subs.at(c.subcommand);
  c.config_path = config_paths[c.subcommand];
  for (const auto& k : key_table()) {
    if (k.subcommands.count(c.subcommand) && sub->count(std::string("--") + k.name) > 0) {
      c.from_flags[k.name] = raw[c.subcommand][k.name];
    }
  }
  if (!c.config_path.empty()) c.from_file = read_config_file(c.config_path, c.subcommand);

  apply_defaults(c);
  std::map<std::string, std::string> merged = c.from_file;
  for (const auto& [k, v] : c.from_flags) merged[k] = v;
  // The preset goes first so that explicit sizes refine it.
  if (auto it = merged.find("budget"); it != merged.end()) apply_key(c, "budget", it->second);
  for (const auto& [k, v] : merged) {
    if (k != "budget") apply_key(c, k, v);
  }
  c.budget.validate();
  c.effective = effective_values(c);
  return c;
}

RunConfig parse_config(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"mcmclab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_config(static_cast<int>(argv.size()), argv.data());
}

int run(const RunConfig& c, std::ostream& log, std::ostream& warn) {
  const auto start = std::chrono::steady_clock::now();
  OutputDir out(c.out_dir);
  Json target_warnings = Json::array();
  if (c.effective.contains("target") && c.target.starts_with("file:")) {
    for (const auto& w : diagnose(*make_target(c.target)).warnings) {
      warn << "warning: target " << c.target.substr(5) << ": " << w << "\n";
      target_warnings.push_back(w);
    }
  }
  Json summary = Json::object();
  int code = 0;
  if (c.subcommand == "sample") {
    code = run_sample(c, out, summary);
  } else if (c.subcommand == "distance") {
    code = run_distance(c, out, summary);
  } else if (c.subcommand == "diffusion") {
    code = run_diffusion(c, out, summary);
  } else if (c.subcommand == "converge") {
    code = run_converge(c, out, summary);
  } else if (c.subcommand == "scaling") {
    code = run_scaling(c, out, summary);
  } else if (c.subcommand == "sweep") {
    code = run_sweep(c, out, summary);
  } else if (c.subcommand == "limit-check") {
    code = run_limit_check(c, out, summary);
  } else {
    throw UsageError("unknown subcommand '" + c.subcommand + "'");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json m;
  m["subcommand"] = c.subcommand;
  m["config"] = c.effective;
  m["config_file"] = c.config_path.empty() ? Json(nullptr) : Json(c.config_path);
  m["file_values"] = c.from_file;
  m["flag_values"] = c.from_flags;
  Json overridden = Json::array();
  for (const auto& [k, v] : c.from_flags) {
    if (auto it = c.from_file.find(k); it != c.from_file.end() && it->second != v) {
      overridden.push_back({{"key", k}, {"file", it->second}, {"flag", v}});
    }
  }
  m["overridden"] = overridden;
  m["target_warnings"] = target_warnings;
  m["seed"] = c.seed;
  m["versions"] = {{"mcmclab", MCMCLAB_VERSION}, {"boost", BOOST_LIB_VERSION}, {"compiler", __VERSION__}};
  m["wall_time_s"] = wall;
  m["summary"] = summary;
  m["outputs"] = out.written();
  m["exit_code"] = code;
  out.write("manifest.json", m.dump(2) + "\n");
  log << summary.dump() << "\n";
  return code;
}

int main_entry(int argc, const char* const argv[], std::ostream& out, std::ostream& err) {
  try {
    const RunConfig config = parse_config(argc, argv);
    return run(config, out, err);
  } catch (const HelpRequested& h) {
    out << h.what();
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    err << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const UnboundedTime& e) {
    err << "unbounded convergence time: " << e.what() << "\n";
    return 4;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoFailure& e) {
    err << "output error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace mcmclab
