#pragma once

// Error-exponent calculators: closed forms for passive SCL and t-hop events,
// exponential-tilt solutions of the KL programs on a three-node path, the
// boost-factor table, and the grid sweep over all numeric inequalities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "lathe/errors.hpp"

namespace lathe {

namespace detail {
inline void require_open_unit(double rho, const char* what) {
  if (!(rho > 0.0 && rho < 1.0)) throw domain_error(std::string(what) + ": rho must lie in (0,1)");
}
}  // namespace detail

/// -ln(1 - (1-rho)/2 * (1 - sqrt(1 - rho^2)))
inline double k_passive(double rho) {
  detail::require_open_unit(rho, "k_passive");
  const double theta = (1.0 - rho) / 2.0;
  return -std::log1p(-theta * (1.0 - std::sqrt(1.0 - rho * rho)));
}

/// Flip probability across t hops, by the recursion tt_k = (1-2 theta) tt_{k-1} + theta.
inline double tilde_theta(int t, double theta) {
  if (t < 1) throw domain_error("tilde_theta: t must be >= 1");
  if (!(theta > 0.0 && theta < 0.5)) throw domain_error("tilde_theta: theta must lie in (0,1/2)");
  double tt = theta;
  for (int k = 2; k <= t; ++k) tt = (1.0 - 2.0 * theta) * tt + theta;
  return tt;
}

/// -ln(1 - tt_{t-1} (1 - sqrt(4 theta (1 - theta))))
inline double k_t_hop(int t, double rho) {
  if (t < 2) throw domain_error("k_t_hop: t must be >= 2");
  detail::require_open_unit(rho, "k_t_hop");
  const double theta = (1.0 - rho) / 2.0;
  return -std::log1p(-tilde_theta(t - 1, theta) * (1.0 - std::sqrt(4.0 * theta * (1.0 - theta))));
}

/// D(a || b) in nats with 0 log 0 = 0. Returns +inf when a puts mass where b has none.
inline double binary_kl(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0)) throw domain_error("binary_kl: a must lie in [0,1]");
  if (!(b >= 0.0 && b <= 1.0)) throw domain_error("binary_kl: b must lie in [0,1]");
  auto term = [](double x, double y) {
    if (x == 0.0) return 0.0;
    if (y == 0.0) return std::numeric_limits<double>::infinity();
    return x * std::log(x / y);
  };
  return term(a, b) + term(1.0 - a, 1.0 - b);
}

// ---------------------------------------------------------------------------
// Three-node path and the tilt solver

/// Configurations of (x_i, x_j, x_k); index 4 b_i + 2 b_j + b_k with bit 1 for -1.
using Dist8 = std::array<double, 8>;

constexpr int spin(int index, int position) {  // position 0 = i, 1 = j, 2 = k
  return ((index >> (2 - position)) & 1) ? -1 : 1;
}

struct ThreeNodePathModel {
  double rho = 0.0;
  Dist8 prob{};

  explicit ThreeNodePathModel(double r) : rho(r) {
    detail::require_open_unit(r, "ThreeNodePathModel");
    const double theta = (1.0 - r) / 2.0;
    for (int x = 0; x < 8; ++x) {
      const double qij = spin(x, 0) == spin(x, 1) ? 1.0 - theta : theta;
      const double qjk = spin(x, 1) == spin(x, 2) ? 1.0 - theta : theta;
      prob[x] = 0.5 * qij * qjk;
    }
  }

  double expect(const Dist8& f) const {
    double s = 0.0;
    for (int x = 0; x < 8; ++x) s += prob[x] * f[x];
    return s;
  }
};

/// g(x) = a x_i x_j + b x_i x_k + c x_j x_k
inline Dist8 pair_moment_function(double a_ij, double b_ik, double c_jk) {
  Dist8 g{};
  for (int x = 0; x < 8; ++x)
    g[x] = a_ij * spin(x, 0) * spin(x, 1) + b_ik * spin(x, 0) * spin(x, 2) +
           c_jk * spin(x, 1) * spin(x, 2);
  return g;
}

struct TiltSolution {
  double lambda = 0.0;
  Dist8 q{};
  double divergence = 0.0;
  double residual = 0.0;  // E_Q[g]
  bool converged = false;
};

namespace detail {

struct Tilted {
  Dist8 q{};
  Dist8 log_q{};
  double mean = 0.0;
};

inline Tilted tilt(const Dist8& p, const Dist8& g, double lambda) {
  Tilted t;
  double top = -std::numeric_limits<double>::infinity();
  Dist8 lw{};
  for (int x = 0; x < 8; ++x) {
    lw[x] = p[x] > 0.0 ? std::log(p[x]) - lambda * g[x] : -std::numeric_limits<double>::infinity();
    top = std::max(top, lw[x]);
  }
  double z = 0.0;
  for (int x = 0; x < 8; ++x) z += std::exp(lw[x] - top);
  const double log_z = top + std::log(z);
  for (int x = 0; x < 8; ++x) {
    t.log_q[x] = lw[x] - log_z;
    t.q[x] = std::exp(t.log_q[x]);
    t.mean += t.q[x] * g[x];
  }
  return t;
}

}  // namespace detail

/// min D(Q||P) subject to E_Q[g] <= 0. The minimizer is P tilted by
/// exp(-lambda g); lambda is bracketed from [0, 512] by doubling and then bisected.
inline TiltSolution min_kl_tilted(const ThreeNodePathModel& model, const Dist8& g,
                                  double tolerance = 1e-10) {
  for (double v : g)
    if (!std::isfinite(v)) throw invalid_argument("min_kl_tilted: g must be finite");
  const Dist8& p = model.prob;
  TiltSolution sol;
  const double base = model.expect(g);
  if (base <= 0.0) {
    sol.q = p;
    sol.residual = base;
    sol.converged = true;
    return sol;
  }

  double lo = 0.0;
  double hi = 512.0;
  while (detail::tilt(p, g, hi).mean > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 0x1.0p40) throw infeasible("min_kl_tilted: no tilt reaches E_Q[g] <= 0");
  }
  detail::Tilted t;
  double lambda = hi;
  for (int iter = 0; iter < 400; ++iter) {
    lambda = 0.5 * (lo + hi);
    t = detail::tilt(p, g, lambda);
    if (std::abs(t.mean) < tolerance) break;
    if (t.mean > 0.0)
      lo = lambda;
    else
      hi = lambda;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  sol.lambda = lambda;
  sol.q = t.q;
  sol.residual = t.mean;
  sol.converged = std::abs(t.mean) < tolerance;
  double d = 0.0;
  for (int x = 0; x < 8; ++x)
    if (t.q[x] > 0.0) d += t.q[x] * (t.log_q[x] - std::log(p[x]));
  sol.divergence = std::max(d, 0.0);
  return sol;
}

/// Confident 2-hop event: rho^Q_ij <= rho^Q_ik (13 + 7 rho)/20.
inline TiltSolution k2_conf_solution(double rho) {
  const ThreeNodePathModel model(rho);
  return min_kl_tilted(model, pair_moment_function(1.0, -(13.0 + 7.0 * rho) / 20.0, 0.0));
}

inline double k2_conf(double rho) { return k2_conf_solution(rho).divergence; }

/// Unconfident 2-hop event: rho^Q_ik >= rho^Q_ij (19 + 21 rho)/40, scaled by 0.8 * 13.
inline TiltSolution k2_unconf_solution(double rho) {
  const ThreeNodePathModel model(rho);
  return min_kl_tilted(model, pair_moment_function((19.0 + 21.0 * rho) / 40.0, -1.0, 0.0));
}

inline double k2_unconf(double rho) { return 0.8 * 13.0 * k2_unconf_solution(rho).divergence; }

/// Guaranteed boost factor, half-open intervals [lo, hi).
inline double c_rho_lookup(double rho) {
  detail::require_open_unit(rho, "c_rho_lookup");
  if (rho < 0.03) return 1.0;
  if (rho < 0.1) return 1.01;
  if (rho < 0.2) return 1.03;
  if (rho < 0.4) return 1.08;
  if (rho < 0.6) return 1.19;
  if (rho < 0.8) return 1.29;
  return 1.4;
}

// ---------------------------------------------------------------------------
// Grids and curves

/// lo, lo + step, ... up to hi (inclusive within 1e-9). Points are rounded to
/// 9 decimals so interval boundaries like 0.8 land exactly.
inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0)) throw invalid_argument("grid step must be positive");
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) throw invalid_argument("grid must lie inside (0,1)");
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double x = std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9;
    if (x > hi + 1e-9) break;
    grid.push_back(x);
  }
  return grid;
}

inline std::vector<double> default_grid(double step = 0.005) { return make_grid(0.01, 0.99, step); }

struct ExponentCurve {
  std::string label;
  std::vector<double> rho;
  std::vector<double> value;
};

inline const std::map<std::string, std::function<double(double)>>& curve_catalog() {
  static const std::map<std::string, std::function<double(double)>> catalog = {
      {"k-passive", k_passive},
      {"k-hop-3", [](double r) { return k_t_hop(3, r); }},
      {"k-hop-4", [](double r) { return k_t_hop(4, r); }},
      {"k-hop-5", [](double r) { return k_t_hop(5, r); }},
      {"ratio-k3-0.8", [](double r) { return 0.8 * k_t_hop(3, r) / k_passive(r); }},
      {"ratio-k3-0.85", [](double r) { return 0.85 * k_t_hop(3, r) / k_passive(r); }},
      {"k2-conf", k2_conf},
      {"k2-unconf", k2_unconf},
      {"c-rho", c_rho_lookup},
      {"boosted-passive", [](double r) { return c_rho_lookup(r) * k_passive(r); }},
  };
  return catalog;
}

inline ExponentCurve make_curve(const std::string& label, const std::vector<double>& grid) {
  const auto& catalog = curve_catalog();
  auto it = catalog.find(label);
  if (it == catalog.end()) throw invalid_argument("unknown curve '" + label + "'");
  ExponentCurve c{label, grid, {}};
  c.value.reserve(grid.size());
  for (double r : grid) c.value.push_back(it->second(r));
  return c;
}

inline void write_curve_csv(std::ostream& os, const std::vector<ExponentCurve>& curves) {
  os << "rho,value,label\n";
  os.precision(12);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.rho.size(); ++i) os << c.rho[i] << ',' << c.value[i] << ',' << c.label << '\n';
}

// ---------------------------------------------------------------------------
// Inequality sweep

struct BoundCheckPoint {
  std::string check;
  double rho = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // lhs - rhs
  bool pass = false;
};

struct BoundCheckSummary {
  std::size_t points = 0;
  std::size_t failures = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_rho = 0.0;
};

struct BoundsReport {
  std::vector<BoundCheckPoint> points;
  std::map<std::string, BoundCheckSummary> summary;

  bool all_pass() const {
    for (const auto& [name, s] : summary)
      if (s.failures > 0 || s.points == 0) return false;
    return !summary.empty();
  }
};

namespace detail {

struct BoundCheck {
  std::string name;
  double lo, hi;  // rho in [lo, hi)
  bool strict;
  std::function<double(double)> lhs, rhs;
};

inline std::vector<BoundCheck> bound_checks() {
  auto theta_of = [](double r) { return (1.0 - r) / 2.0; };
  auto scaled_kl = [theta_of](double weight, double ratio) {
    return [=](double r) {
      const double t = theta_of(r);
      return weight * binary_kl(t * ratio, t);
    };
  };
  auto boosted = [](double r) { return c_rho_lookup(r) * k_passive(r); };
  auto times_passive = [](double c) { return [c](double r) { return c * k_passive(r); }; };
  auto k3 = [](double a) { return [a](double r) { return a * k_t_hop(3, r); }; };
  return {
      {"a-0.8", 0.8, 1.0, false, k3(0.8), times_passive(1.4)},
      {"a-0.6", 0.6, 0.8, false, k3(0.8), times_passive(1.29)},
      {"a-0.5", 0.5, 0.6, false, k3(0.8), times_passive(1.19)},
      {"b", 0.4, 0.5, false, k3(0.85), times_passive(1.19)},
      {"c", 0.4, 0.5, true, [theta_of](double r) { return 0.8 * binary_kl(theta_of(r), 0.12); },
       times_passive(1.23)},
      {"d-5/6", 0.0, 1.0, false, scaled_kl(125.0, 5.0 / 6.0), boosted},
      {"d-7/6", 0.0, 1.0, false, scaled_kl(130.0, 7.0 / 6.0), boosted},
      {"e", 0.0, 1.0, false, k2_conf, [](double r) { return k_t_hop(3, r); }},
      {"f", 0.0, 1.0, false, k2_unconf, boosted},
      {"g-6/5", 0.8, 1.0, false, scaled_kl(130.0, 6.0 / 5.0), times_passive(1.4)},
      {"g-6.72/5.72", 0.6, 0.8, false, scaled_kl(130.0, 6.72 / 5.72), times_passive(1.3)},
  };
}

}  // namespace detail

inline std::vector<std::string> bound_check_names() {
  std::vector<std::string> names;
  for (const auto& c : detail::bound_checks()) names.push_back(c.name);
  return names;
}

/// Evaluates every inequality at each grid point inside its rho interval. A
/// positive min_margin demands lhs - rhs >= min_margin instead of lhs >= rhs.
inline BoundsReport verify_bounds(const std::vector<double>& grid, double min_margin = 0.0) {
  for (double r : grid)
    if (!(r > 0.0 && r < 1.0)) throw invalid_argument("verify_bounds: grid must lie inside (0,1)");
  BoundsReport report;
  for (const auto& check : detail::bound_checks()) {
    auto& s = report.summary[check.name];
    for (double r : grid) {
      if (r < check.lo || r >= check.hi) continue;
      BoundCheckPoint pt{check.name, r, check.lhs(r), check.rhs(r), 0.0, false};
      pt.margin = pt.lhs - pt.rhs;
      pt.pass = check.strict ? pt.margin > min_margin : pt.margin >= min_margin;
      ++s.points;
      if (!pt.pass) ++s.failures;
      if (pt.margin < s.worst_margin) {
        s.worst_margin = pt.margin;
        s.worst_rho = r;
      }
      report.points.push_back(std::move(pt));
    }
  }
  return report;
}

inline void write_bounds_csv(std::ostream& os, const BoundsReport& report) {
  os << "check,rho,lhs,rhs,margin,pass\n";
  os.precision(12);
  for (const auto& pt : report.points)
    os << pt.check << ',' << pt.rho << ',' << pt.lhs << ',' << pt.rhs << ',' << pt.margin << ','
       << (pt.pass ? "true" : "false") << '\n';
}

}  // namespace lathe
