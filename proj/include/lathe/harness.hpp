#pragma once

// Monte Carlo comparison of passive SCL and the active learner: configuration,
// a deterministic worker pool, streaming CSV output and slope fits.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "lathe/active_lathe.hpp"
#include "lathe/errors.hpp"
#include "lathe/estimation.hpp"
#include "lathe/rng.hpp"
#include "lathe/tree_model.hpp"

namespace lathe {

enum class StructureKind { chain, hmm, binary_tree, random };

inline std::string to_string(StructureKind k) {
  switch (k) {
    case StructureKind::chain: return "chain";
    case StructureKind::hmm: return "hmm";
    case StructureKind::binary_tree: return "binary-tree";
    case StructureKind::random: return "random";
  }
  return "?";
}

inline std::optional<StructureKind> parse_structure(const std::string& s) {
  if (s == "chain") return StructureKind::chain;
  if (s == "hmm") return StructureKind::hmm;
  if (s == "binary-tree") return StructureKind::binary_tree;
  if (s == "random") return StructureKind::random;
  return std::nullopt;
}

struct ExperimentConfig {
  StructureKind structure = StructureKind::chain;
  std::size_t p = 200;
  std::size_t levels = 8;  // binary-tree only
  std::vector<double> rho{0.9};
  std::vector<std::uint64_t> n{60, 100, 140, 180};
  std::size_t trials = 2000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string out;  // empty: stdout
  bool allow_assumption_violation = false;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (ec != std::errc{} || ptr != end || t.empty())
    throw config_error(key + ": cannot parse '" + text + "'");
  return value;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

}  // namespace detail

inline std::vector<double> parse_rho_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : detail::split(text, ',')) out.push_back(detail::parse_number<double>("rho", part));
  return out;
}

/// "60,100,140" or the inclusive range "a:b:c" (start:stop:step).
inline std::vector<std::uint64_t> parse_n_grid(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = detail::split(text, ':');
    if (parts.size() != 3) throw config_error("n: range must be start:stop:step");
    const auto a = detail::parse_number<std::uint64_t>("n", parts[0]);
    const auto b = detail::parse_number<std::uint64_t>("n", parts[1]);
    const auto c = detail::parse_number<std::uint64_t>("n", parts[2]);
    if (c == 0) throw config_error("n: range step must be positive");
    for (std::uint64_t v = a; v <= b; v += c) out.push_back(v);
    return out;
  }
  for (const auto& part : detail::split(text, ','))
    out.push_back(detail::parse_number<std::uint64_t>("n", part));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = detail::trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw config_error(key + ": expected true/false, got '" + text + "'");
}

/// Applies one key. Unknown keys are an error.
inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "structure") {
    auto s = parse_structure(detail::trim(value));
    if (!s) throw config_error("structure: unknown kind '" + value + "'");
    cfg.structure = *s;
  } else if (key == "p") {
    cfg.p = detail::parse_number<std::size_t>(key, value);
  } else if (key == "levels") {
    cfg.levels = detail::parse_number<std::size_t>(key, value);
  } else if (key == "rho") {
    cfg.rho = parse_rho_list(value);
  } else if (key == "n") {
    cfg.n = parse_n_grid(value);
  } else if (key == "trials") {
    cfg.trials = detail::parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    cfg.seed = detail::parse_number<std::uint64_t>(key, value);
  } else if (key == "workers") {
    cfg.workers = detail::parse_number<std::size_t>(key, value);
  } else if (key == "out") {
    cfg.out = detail::trim(value);
  } else if (key == "allow_assumption_violation") {
    cfg.allow_assumption_violation = parse_bool(key, value);
  } else {
    throw config_error("unknown config key '" + key + "'");
  }
}

/// `key = value` lines; `#` starts a comment.
inline void read_config(std::istream& is, ExperimentConfig& cfg) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error("line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  read_config(in, cfg);
  return cfg;
}

inline TreeTopology build_topology(const ExperimentConfig& cfg) {
  switch (cfg.structure) {
    case StructureKind::chain: return build_chain(cfg.p);
    case StructureKind::hmm: return build_hmm(cfg.p);
    case StructureKind::binary_tree: return build_binary_tree(cfg.levels);
    case StructureKind::random: return build_random_tree(cfg.p, RngSeed(cfg.seed).derive({0x7472ee}));
  }
  throw config_error("unknown structure");
}

/// Collects every offending field into one error. Returns warnings that do not
/// block the run (the p >= 82 d condition when it is not enforced).
inline std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  if (cfg.trials < 1) bad.push_back("trials must be >= 1");
  if (cfg.workers < 1) bad.push_back("workers must be >= 1");
  if (cfg.rho.empty()) bad.push_back("rho list is empty");
  for (double r : cfg.rho)
    if (!(r > 0.0 && r < 1.0)) bad.push_back("rho " + std::to_string(r) + " outside (0,1)");
  if (cfg.n.empty()) bad.push_back("n grid is empty");
  for (std::size_t i = 0; i < cfg.n.size(); ++i) {
    if (cfg.n[i] < 2) bad.push_back("n must be >= 2");
    if (i > 0 && cfg.n[i] <= cfg.n[i - 1]) bad.push_back("n grid must be strictly increasing");
  }
  std::vector<std::string> warnings;
  try {
    const TreeTopology t = build_topology(cfg);
    if (t.num_nodes() < 2) bad.push_back("structure needs at least 2 nodes");
    if (!t.satisfies_degree_assumption() && !cfg.allow_assumption_violation)
      warnings.push_back("p=" + std::to_string(t.num_nodes()) + " < 82*d=" +
                         std::to_string(82 * t.max_degree()) +
                         " (set allow_assumption_violation to silence)");
  } catch (const std::exception& e) {
    bad.push_back(std::string("structure: ") + e.what());
  }
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw config_error(msg);
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Statistics

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval; z = 1.96 gives 95%.
inline Interval wilson_interval(std::size_t errors, std::size_t trials, double z = 1.959963984540054) {
  if (trials == 0) throw invalid_argument("wilson interval needs trials >= 1");
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (ph + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
  Interval out{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  if (errors == 0) out.lo = 0.0;
  if (errors == trials) out.hi = 1.0;
  return out;
}

struct SummaryRow {
  std::string structure;
  double rho = 0.0;
  std::uint64_t n = 0;
  std::string algorithm;  // passive | active
  std::size_t trials = 0;
  std::size_t errors = 0;
  double err_rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double mean_ptilde = 0.0;
  double mean_alpha = 1.0;
};

inline const char* kSummaryHeader =
    "structure,rho,n,algorithm,trials,errors,err_rate,ci_lo,ci_hi,mean_ptilde,mean_alpha";

inline void write_summary_row(std::ostream& os, const SummaryRow& r) {
  std::ostringstream line;
  line << std::setprecision(10);
  line << r.structure << ',' << r.rho << ',' << r.n << ',' << r.algorithm << ',' << r.trials << ','
       << r.errors << ',' << r.err_rate << ',' << r.ci_lo << ',' << r.ci_hi << ',' << r.mean_ptilde
       << ',' << r.mean_alpha << '\n';
  os << line.str();
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kSummaryHeader)
    throw config_error("summary CSV header mismatch");
  std::vector<SummaryRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 11) throw config_error("summary CSV line " + std::to_string(lineno) + ": expected 11 fields");
    SummaryRow r;
    r.structure = f[0];
    r.rho = detail::parse_number<double>("rho", f[1]);
    r.n = detail::parse_number<std::uint64_t>("n", f[2]);
    r.algorithm = f[3];
    r.trials = detail::parse_number<std::size_t>("trials", f[4]);
    r.errors = detail::parse_number<std::size_t>("errors", f[5]);
    r.err_rate = detail::parse_number<double>("err_rate", f[6]);
    r.ci_lo = detail::parse_number<double>("ci_lo", f[7]);
    r.ci_hi = detail::parse_number<double>("ci_hi", f[8]);
    r.mean_ptilde = detail::parse_number<double>("mean_ptilde", f[9]);
    r.mean_alpha = detail::parse_number<double>("mean_alpha", f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct SlopeEstimate {
  std::string structure;
  std::string algorithm;
  double rho = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the fit in log space
  std::size_t points = 0;
};

/// OLS of ln(error rate) on n over rows with 0 < errors < trials.
inline SlopeEstimate estimate_slope(std::span<const SummaryRow> rows) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (r.errors == 0 || r.errors >= r.trials) continue;
    xs.push_back(static_cast<double>(r.n));
    ys.push_back(std::log(static_cast<double>(r.errors) / static_cast<double>(r.trials)));
  }
  if (xs.size() < 3)
    throw insufficient_data("slope fit needs >= 3 rows with 0 < errors < trials, got " +
                            std::to_string(xs.size()));
  const double k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw insufficient_data("slope fit needs distinct n values");
  SlopeEstimate s;
  s.slope = sxy / sxx;
  s.intercept = my - s.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (s.intercept + s.slope * xs[i]);
    rss += e * e;
  }
  s.residual = std::sqrt(rss / k);
  s.points = xs.size();
  if (!rows.empty()) {
    s.structure = rows.front().structure;
    s.algorithm = rows.front().algorithm;
    s.rho = rows.front().rho;
  }
  return s;
}

/// Groups rows by (structure, rho, algorithm) and fits each group; groups with
/// too few usable rows are skipped.
inline std::vector<SlopeEstimate> estimate_slopes(std::span<const SummaryRow> rows) {
  std::map<std::tuple<std::string, double, std::string>, std::vector<SummaryRow>> groups;
  for (const auto& r : rows) groups[{r.structure, r.rho, r.algorithm}].push_back(r);
  std::vector<SlopeEstimate> out;
  for (auto& [key, g] : groups) {
    std::sort(g.begin(), g.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.n < b.n; });
    try {
      out.push_back(estimate_slope(g));
    } catch (const insufficient_data&) {
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runner

struct TrialOutcome {
  bool error = false;
  std::size_t p_tilde = 0;
  double alpha = 1.0;
  std::uint64_t spent = 0;
  std::uint64_t budget = 0;
};

/// Per-trial record handed to an observer, for diagnostics beyond the summary.
struct TrialRecord {
  std::size_t cell = 0;
  std::size_t trial = 0;
  double rho = 0.0;
  std::uint64_t n = 0;
  const ActiveResult* active = nullptr;
  const TreeTopology* truth = nullptr;
};

struct RunOptions {
  std::ostream* csv = nullptr;  // rows streamed here as each cell completes
  std::function<void(const TrialRecord&)> observer;  // called from worker threads, serialized
};

namespace detail {

/// Runs body(i) for i in [0, count) on `workers` threads. Exceptions are
/// rethrown on the calling thread after all workers stop.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

inline TrialOutcome run_passive_trial(const IsingTreeModel& model, std::uint64_t n, RngSeed seed) {
  IsingOracle oracle(model);
  BudgetLedger ledger(n, model.num_nodes());
  const LearnedTree learned = passive_scl(oracle, n, seed, &ledger);
  if (ledger.spent() != ledger.total()) throw ledger_violation("passive run did not spend n*p");
  return {learned.sorted_edges() != model.topology().edges(), 0, 1.0, ledger.spent(), ledger.total()};
}

inline std::vector<SummaryRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate_config(cfg);
  const TreeTopology truth = build_topology(cfg);
  const std::size_t p = truth.num_nodes();
  const RngSeed master(cfg.seed);
  const std::string structure = to_string(cfg.structure);
  std::mutex observer_mu;
  std::vector<SummaryRow> rows;

  if (opts.csv) *opts.csv << kSummaryHeader << '\n' << std::flush;
  std::size_t cell = 0;
  for (double rho : cfg.rho) {
    const IsingTreeModel model(truth, rho);
    for (std::uint64_t n : cfg.n) {
      std::vector<TrialOutcome> passive(cfg.trials), active(cfg.trials);
      detail::parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
        passive[t] = run_passive_trial(model, n, master.derive({cell, t, 0}));
        IsingOracle oracle(model);
        const ActiveResult res = active_lathe(oracle, p, n, master.derive({cell, t, 1}));
        if (res.ledger.spent() > res.ledger.total()) throw ledger_violation("active run overspent");
        active[t] = {res.tree.edges() != truth.edges(), res.confidence.p_tilde(), res.alpha.value(),
                     res.ledger.spent(), res.ledger.total()};
        if (opts.observer) {
          std::lock_guard lock(observer_mu);
          opts.observer(TrialRecord{cell, t, rho, n, &res, &truth});
        }
      });

      auto summarize = [&](const std::vector<TrialOutcome>& outs, const char* algo) {
        SummaryRow r{structure, rho, n, algo, cfg.trials};
        double ptilde = 0, alpha = 0;
        for (const auto& o : outs) {
          r.errors += o.error ? 1 : 0;
          ptilde += static_cast<double>(o.p_tilde);
          alpha += o.alpha;
        }
        const double k = static_cast<double>(cfg.trials);
        r.err_rate = static_cast<double>(r.errors) / k;
        const Interval ci = wilson_interval(r.errors, cfg.trials);
        r.ci_lo = ci.lo;
        r.ci_hi = ci.hi;
        r.mean_ptilde = ptilde / k;
        r.mean_alpha = alpha / k;
        return r;
      };
      rows.push_back(summarize(passive, "passive"));
      rows.push_back(summarize(active, "active"));
      if (opts.csv) {
        write_summary_row(*opts.csv, rows[rows.size() - 2]);
        write_summary_row(*opts.csv, rows.back());
        opts.csv->flush();
      }
      ++cell;
    }
  }
  return rows;
}

}  // namespace lathe
