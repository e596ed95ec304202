#include "mcmclab/kr_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mcmclab/error.hpp"

namespace mcmclab {
namespace {

void require_equal_sizes(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu, const char* op) {
  if (mu.size() != nu.size()) {
    throw ContractViolation(std::string(op) + ": measures have " + std::to_string(mu.size()) + " and " +
                            std::to_string(nu.size()) + " atoms; resample to a common size first");
  }
}

double matching_cost(std::span<const double> x, std::span<const double> y, const std::vector<std::size_t>& m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += truncated_cost(x[i], y[m[i]]);
  return sum / static_cast<double>(x.size());
}

}  // namespace

EmpiricalMeasure1D::EmpiricalMeasure1D(std::vector<double> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw ContractViolation("EmpiricalMeasure1D: needs at least one atom");
  for (double a : atoms_) {
    if (!std::isfinite(a)) throw ContractViolation("EmpiricalMeasure1D: non-finite atom");
  }
  std::sort(atoms_.begin(), atoms_.end());
}

double EmpiricalMeasure1D::mean() const {
  return std::accumulate(atoms_.begin(), atoms_.end(), 0.0) / static_cast<double>(atoms_.size());
}

double EmpiricalMeasure1D::variance() const {
  const double m = mean();
  double s = 0.0;
  for (double a : atoms_) s += (a - m) * (a - m);
  return s / static_cast<double>(atoms_.size());
}

std::string_view to_string(TransportMethod method) {
  switch (method) {
    case TransportMethod::kExactAssignment:
      return "exact-assignment";
    case TransportMethod::kExactLineFlow:
      return "exact-line-flow";
    case TransportMethod::kSortedUpperBound:
      return "sorted-upper-bound";
    case TransportMethod::kDualLowerBound:
      return "dual-lower-bound";
  }
  return "unknown";
}

double TransportResult::dual_value() const {
  if (dual_mu.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double s = std::accumulate(dual_mu.begin(), dual_mu.end(), 0.0) +
                   std::accumulate(dual_nu.begin(), dual_nu.end(), 0.0);
  return s / static_cast<double>(dual_mu.size());
}

double TransportResult::duality_gap() const { return std::abs(distance - dual_value()); }

double max_dual_violation(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu, const TransportResult& r) {
  const auto x = mu.atoms();
  const auto y = nu.atoms();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      worst = std::max(worst, r.dual_mu[i] + r.dual_nu[j] - truncated_cost(x[i], y[j]));
    }
  }
  return worst;
}

TransportResult kr_distance(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu) {
  require_equal_sizes(mu, nu, "kr_distance");
  return mu.size() <= kAssignmentMaxAtoms ? kr_assignment(mu, nu) : kr_line_flow(mu, nu);
}

TransportResult kr_assignment(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu) {
  require_equal_sizes(mu, nu, "kr_assignment");
  const auto x = mu.atoms();
  const auto y = nu.atoms();
  const std::size_t n = x.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based potentials and column owners; column 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    owner[0] = row;
    std::size_t col0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t i0 = owner[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = truncated_cost(x[i0 - 1], y[j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = col0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      col0 = col1;
    } while (owner[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      owner[col0] = owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  TransportResult r;
  r.method = TransportMethod::kExactAssignment;
  r.matching.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) r.matching[owner[j] - 1] = j - 1;
  r.dual_mu.assign(u.begin() + 1, u.end());
  r.dual_nu.assign(v.begin() + 1, v.end());
  r.distance = matching_cost(x, y, r.matching);
  return r;
}

TransportResult kr_line_flow(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu) {
  require_equal_sizes(mu, nu, "kr_line_flow");
  const auto x = mu.atoms();
  const auto y = nu.atoms();
  const std::size_t n = x.size();
  const std::size_t m = 2 * n;

  // Merge; +1 marks a mu atom (supply), -1 a nu atom (demand).
  struct Point {
    double pos;
    int w;
    std::size_t idx;
  };
  std::vector<Point> pts;
  pts.reserve(m);
  {
    std::size_t i = 0, j = 0;
    while (i < n || j < n) {
      if (j == n || (i < n && x[i] <= y[j])) {
        pts.push_back({x[i], +1, i});
        ++i;
      } else {
        pts.push_back({y[j], -1, j});
        ++j;
      }
    }
  }

  // Forward pass. F_k(tau) is the least cost of everything left of the edge
  // after point k given net rightward flow tau on that edge. F is convex
  // piecewise linear with integer breakpoints: a map from position (offset by
  // `shift`) to slope increment, plus the slope left of all breakpoints.
  // Teleporting at a point is the infimal convolution with |.|, which clamps
  // the slopes to [-1, 1]; [lo_k, hi_k] records where that clamp bites.
  std::map<long long, double> breaks;
  long long shift = 0;
  double left_slope = -1.0;
  double total = 2.0;
  std::vector<long long> clamp_lo(m), clamp_hi(m);
  breaks[pts[0].w] = 2.0;
  clamp_lo[0] = clamp_hi[0] = pts[0].w;
  for (std::size_t k = 0; k < m; ++k) {
    if (k > 0) {
      shift += pts[k].w;
      while (left_slope < -1.0) {
        auto it = breaks.begin();
        if (left_slope + it->second <= -1.0) {
          left_slope += it->second;
          total -= it->second;
          breaks.erase(it);
        } else {
          const double keep = left_slope + it->second + 1.0;
          total -= it->second - keep;
          it->second = keep;
          left_slope = -1.0;
        }
      }
      left_slope = -1.0;
      double right_slope = left_slope + total;
      while (right_slope > 1.0) {
        auto it = std::prev(breaks.end());
        if (right_slope - it->second >= 1.0) {
          right_slope -= it->second;
          total -= it->second;
          breaks.erase(it);
        } else {
          const double excess = right_slope - 1.0;
          it->second -= excess;
          total -= excess;
          right_slope = 1.0;
        }
      }
      clamp_lo[k] = breaks.begin()->first + shift;
      clamp_hi[k] = breaks.rbegin()->first + shift;
    }
    if (k + 1 < m) {
      const double gap = pts[k + 1].pos - pts[k].pos;
      if (gap > 0.0) {
        left_slope -= gap;
        total += 2.0 * gap;
        breaks[-shift] += 2.0 * gap;
      }
    }
  }

  // Backward pass: flow on each edge and hub exchange at each point.
  std::vector<long long> flow(m, 0);  // flow[k]: edge right of point k
  std::vector<long long> hub(m, 0);   // hub[k] > 0: units leave to the hub at k
  long long tau = 0;
  for (std::size_t k = m; k-- > 0;) {
    flow[k] = tau;
    const long long sigma = std::clamp(tau, clamp_lo[k], clamp_hi[k]);
    hub[k] = sigma - tau;
    tau = sigma - pts[k].w;
  }
  if (tau != 0) throw NumericFailure("kr_line_flow: flow reconstruction is unbalanced");

  // Decompose the flow into a permutation. Carried items share one polarity:
  // supplies moving right (tau > 0) or demands moving right (tau < 0).
  enum Kind : int { kSupply, kHubSupply, kDemand, kHubDemand };
  struct Item {
    Kind kind;
    std::size_t idx;
  };
  std::vector<Item> carry;
  std::vector<std::size_t> hub_supplies, hub_demands;
  std::vector<std::size_t> match(n, n);
  auto is_supply = [](const Item& it) { return it.kind == kSupply || it.kind == kHubSupply; };
  auto settle = [&](const Item& s, const Item& d) {
    if (s.kind == kSupply && d.kind == kDemand) {
      match[s.idx] = d.idx;
    } else if (s.kind == kSupply) {
      hub_supplies.push_back(s.idx);
    } else if (d.kind == kDemand) {
      hub_demands.push_back(d.idx);
    }
  };
  auto offer = [&](const Item& item) {
    if (carry.empty() || is_supply(carry.back()) == is_supply(item)) {
      carry.push_back(item);
      return;
    }
    const Item top = carry.back();
    carry.pop_back();
    if (is_supply(item)) {
      settle(item, top);
    } else {
      settle(top, item);
    }
  };
  for (std::size_t k = 0; k < m; ++k) {
    offer({pts[k].w > 0 ? kSupply : kDemand, pts[k].idx});
    for (long long h = 0; h < std::abs(hub[k]); ++h) offer({hub[k] > 0 ? kHubDemand : kHubSupply, 0});
  }
  if (!carry.empty() || hub_supplies.size() != hub_demands.size()) {
    throw NumericFailure("kr_line_flow: flow decomposition left unmatched atoms");
  }
  for (std::size_t t = 0; t < hub_supplies.size(); ++t) match[hub_supplies[t]] = hub_demands[t];

  // Dual potentials: negated shortest-path distances from the hub in the
  // residual network. Simple paths on a line are monotone, so one sweep each
  // way after seeding with the hub arcs suffices.
  std::vector<double> dist(m);
  for (std::size_t k = 0; k < m; ++k) dist[k] = hub[k] > 0 ? -1.0 : 1.0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double gap = pts[k + 1].pos - pts[k].pos;
    const double cost = flow[k] < 0 ? -gap : gap;
    dist[k + 1] = std::min(dist[k + 1], dist[k] + cost);
  }
  for (std::size_t k = m - 1; k-- > 0;) {
    const double gap = pts[k + 1].pos - pts[k].pos;
    const double cost = flow[k] > 0 ? -gap : gap;
    dist[k] = std::min(dist[k], dist[k + 1] + cost);
  }

  TransportResult r;
  r.method = TransportMethod::kExactLineFlow;
  r.matching = std::move(match);
  r.dual_mu.assign(n, 0.0);
  r.dual_nu.assign(n, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double f = -dist[k];
    if (pts[k].w > 0) {
      r.dual_mu[pts[k].idx] = f;
    } else {
      r.dual_nu[pts[k].idx] = -f;
    }
  }
  r.distance = matching_cost(x, y, r.matching);
  return r;
}

double kr_upper_bound_sorted(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu) {
  require_equal_sizes(mu, nu, "kr_upper_bound_sorted");
  const auto x = mu.atoms();
  const auto y = nu.atoms();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += truncated_cost(x[i], y[i]);
  return s / static_cast<double>(x.size());
}

TestFunction::TestFunction(std::vector<double> knot_x, std::vector<double> knot_y)
    : x_(std::move(knot_x)), y_(std::move(knot_y)) {
  if (x_.empty() || x_.size() != y_.size()) throw ContractViolation("TestFunction: need matching, non-empty knots");
  if (!std::is_sorted(x_.begin(), x_.end())) throw ContractViolation("TestFunction: knots must be sorted");
}

double TestFunction::operator()(double x) const {
  if (x <= x_.front()) return y_.front();
  if (x >= x_.back()) return y_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - x_.begin());
  const double t = (x - x_[k - 1]) / (x_[k] - x_[k - 1]);
  return y_[k - 1] + t * (y_[k] - y_[k - 1]);
}

bool TestFunction::in_unit_lipschitz_ball(double tol) const {
  for (std::size_t k = 0; k < x_.size(); ++k) {
    if (std::abs(y_[k]) > 1.0 + tol) return false;
    if (k > 0 && std::abs(y_[k] - y_[k - 1]) > (x_[k] - x_[k - 1]) + tol) return false;
  }
  return true;
}

TestFunction TestFunction::ramp(double c) { return TestFunction({c - 1.0, c + 1.0}, {-1.0, 1.0}); }

TestFunction TestFunction::tent(double c) { return TestFunction({c - 1.0, c, c + 1.0}, {0.0, 1.0, 0.0}); }

double kr_lower_bound_dual(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu,
                           std::span<const TestFunction> family) {
  if (family.empty()) throw ContractViolation("kr_lower_bound_dual: test-function family is empty");
  double best = 0.0;
  for (const auto& f : family) {
    if (!f.in_unit_lipschitz_ball()) {
      throw ContractViolation("kr_lower_bound_dual: test function is not 1-Lipschitz and bounded by 1");
    }
    double a = 0.0;
    for (double v : mu.atoms()) a += f(v);
    double b = 0.0;
    for (double v : nu.atoms()) b += f(v);
    best = std::max(best, std::abs(a / static_cast<double>(mu.size()) - b / static_cast<double>(nu.size())));
  }
  return best;
}

std::vector<TestFunction> default_dual_family(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu,
                                              std::size_t knots) {
  std::vector<double> pooled(mu.atoms().begin(), mu.atoms().end());
  pooled.insert(pooled.end(), nu.atoms().begin(), nu.atoms().end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<TestFunction> family;
  family.reserve(2 * knots);
  for (std::size_t q = 0; q < knots; ++q) {
    const double p = (static_cast<double>(q) + 0.5) / static_cast<double>(knots);
    const auto idx = std::min(pooled.size() - 1, static_cast<std::size_t>(p * static_cast<double>(pooled.size())));
    family.push_back(TestFunction::ramp(pooled[idx]));
    family.push_back(TestFunction::tent(pooled[idx]));
  }
  return family;
}

EmpiricalMeasure1D resample_to(const EmpiricalMeasure1D& mu, std::size_t n, RngStream& rng) {
  if (n == 0) throw ContractViolation("resample_to: n must be >= 1");
  const auto src = mu.atoms();
  std::vector<double> out(n);
  for (auto& v : out) {
    auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(src.size()));
    v = src[std::min(idx, src.size() - 1)];
  }
  return EmpiricalMeasure1D(std::move(out));
}

double kr_brute_force(const EmpiricalMeasure1D& mu, const EmpiricalMeasure1D& nu) {
  require_equal_sizes(mu, nu, "kr_brute_force");
  if (mu.size() > 8) throw ContractViolation("kr_brute_force: at most 8 atoms");
  const auto x = mu.atoms();
  const auto y = nu.atoms();
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, matching_cost(x, y, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

NoiseFloor estimate_noise_floor(const EmpiricalMeasure1D& reference, std::size_t n, RngStream& rng,
                                int replicates) {
  if (replicates < 2) throw ContractViolation("estimate_noise_floor: need at least 2 replicates");
  std::vector<double> vals(static_cast<std::size_t>(replicates));
  for (auto& v : vals) {
    const auto a = resample_to(reference, n, rng);
    const auto b = resample_to(reference, n, rng);
    v = kr_distance(a, b).distance;
  }
  NoiseFloor nf;
  nf.n = n;
  nf.replicates = replicates;
  nf.bias = std::accumulate(vals.begin(), vals.end(), 0.0) / replicates;
  double ss = 0.0;
  for (double v : vals) ss += (v - nf.bias) * (v - nf.bias);
  nf.spread = std::sqrt(ss / (replicates - 1));
  nf.level = nf.bias + 3.0 * nf.spread;
  return nf;
}

}  // namespace mcmclab
