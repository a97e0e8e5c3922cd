// lathe: command-line front end for the structure-learning library.
//
//   lathe simulate       passive vs active Monte Carlo, summary CSV
//   lathe exponents      exponent curves as CSV
//   lathe verify-bounds  grid check of the exponent inequalities
//   lathe packing-demo   greedy 2-packing trace
//   lathe slope          fit error-rate slopes from a summary CSV
//
// Exit status: 0 success, 1 invalid input, 2 a verify-bounds check failed.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>

#include "lathe/exponents.hpp"
#include "lathe/graph_metrics.hpp"
#include "lathe/harness.hpp"

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output file (default stdout)");
}

// Output stream that is either a file or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw lathe::config_error("cannot open output file '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct SimulateArgs {
  std::string config;
  std::optional<std::string> structure, rho, n;
  std::optional<std::size_t> p, levels, trials;
  bool allow_violation = false;
};

int run_simulate(const SimulateArgs& a, const Common& c, bool seed_given, bool workers_given,
                 bool out_given) {
  lathe::ExperimentConfig cfg;
  if (!a.config.empty()) cfg = lathe::load_config_file(a.config);
  if (a.structure) lathe::set_config_value(cfg, "structure", *a.structure);
  if (a.p) cfg.p = *a.p;
  if (a.levels) cfg.levels = *a.levels;
  if (a.rho) cfg.rho = lathe::parse_rho_list(*a.rho);
  if (a.n) cfg.n = lathe::parse_n_grid(*a.n);
  if (a.trials) cfg.trials = *a.trials;
  if (a.allow_violation) cfg.allow_assumption_violation = true;
  if (seed_given) cfg.seed = c.seed;
  if (workers_given || a.config.empty()) cfg.workers = c.workers;
  if (out_given) cfg.out = c.out;

  for (const auto& w : lathe::validate_config(cfg)) std::cerr << "warning: " << w << '\n';
  Sink sink(cfg.out);
  lathe::RunOptions opts;
  opts.csv = &sink.stream();
  const auto rows = lathe::run_experiment(cfg, opts);
  for (const auto& s : lathe::estimate_slopes(rows))
    std::cerr << "slope " << s.algorithm << " rho=" << s.rho << ": " << s.slope << " (" << s.points
              << " points)\n";
  return 0;
}

int run_exponents(std::vector<std::string> curves, double step, double lo, double hi, const Common& c) {
  if (curves.empty())
    for (const auto& [name, fn] : lathe::curve_catalog()) curves.push_back(name);
  const auto grid = lathe::make_grid(lo, hi, step);
  std::vector<lathe::ExponentCurve> out;
  for (const auto& name : curves) out.push_back(lathe::make_curve(name, grid));
  Sink sink(c.out);
  lathe::write_curve_csv(sink.stream(), out);
  return 0;
}

int run_verify(double step, double min_margin, const Common& c) {
  const auto report = lathe::verify_bounds(lathe::default_grid(step), min_margin);
  if (!c.out.empty()) {
    Sink sink(c.out);
    lathe::write_bounds_csv(sink.stream(), report);
  }
  std::cout << std::left << std::setw(14) << "check" << std::setw(8) << "points" << std::setw(10)
            << "failures" << std::setw(16) << "worst margin" << "at rho\n";
  for (const auto& [name, s] : report.summary)
    std::cout << std::setw(14) << name << std::setw(8) << s.points << std::setw(10) << s.failures
              << std::setw(16) << s.worst_margin << s.worst_rho << '\n';
  const bool ok = report.all_pass();
  std::cout << (ok ? "all checks pass" : "verification FAILED") << '\n';
  return ok ? 0 : 2;
}

int run_packing_demo(std::size_t random_p, const Common& c) {
  Sink sink(c.out);
  auto& os = sink.stream();
  if (random_p == 0) {
    // Labels 1..11 shifted to 0..10.
    const std::vector<lathe::Edge> edges = {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5},
                                            {2, 6}, {3, 7}, {4, 8}, {7, 9}, {7, 10}};
    const lathe::Forest tree(11, edges);
    const auto res = lathe::greedy_2packing(tree, edges);
    os << "11-node tree, all edges, labels 1..11\n";
    lathe::write_packing_trace(os, res, 1);
    os << "exact 2-packing number " << lathe::packing_number_bruteforce(edges, tree, 2) << '\n';
    return 0;
  }
  const auto t = lathe::build_random_tree(random_p, lathe::RngSeed(c.seed));
  const lathe::Forest tree(t);
  const auto res = lathe::greedy_2packing(tree, tree.edges());
  os << "random tree p=" << random_p << " seed=" << c.seed << " d=" << tree.max_degree() << '\n';
  lathe::write_packing_trace(os, res);
  os << "greedy bound " << lathe::greedy_packing_bound(random_p, tree.max_degree()) << '\n';
  if (tree.edges().size() <= lathe::kBruteForcePackingLimit)
    os << "exact 2-packing number " << lathe::packing_number_bruteforce(tree.edges(), tree, 2) << '\n';
  return 0;
}

int run_slope(const std::string& in_path, const Common& c) {
  std::ifstream in(in_path);
  if (!in) throw lathe::config_error("cannot open summary CSV '" + in_path + "'");
  const auto rows = lathe::read_summary_csv(in);
  const auto fits = lathe::estimate_slopes(rows);
  Sink sink(c.out);
  auto& os = sink.stream();
  os << "structure,rho,algorithm,slope,intercept,residual,points\n" << std::setprecision(10);
  for (const auto& s : fits)
    os << s.structure << ',' << s.rho << ',' << s.algorithm << ',' << s.slope << ',' << s.intercept
       << ',' << s.residual << ',' << s.points << '\n';
  for (const auto& a : fits) {
    if (a.algorithm != "active") continue;
    for (const auto& p : fits)
      if (p.algorithm == "passive" && p.structure == a.structure && p.rho == a.rho && p.slope != 0.0)
        std::cerr << a.structure << " rho=" << a.rho << " slope ratio active/passive "
                  << a.slope / p.slope << '\n';
  }
  if (fits.empty()) throw lathe::insufficient_data("no group had >= 3 usable rows");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passive and active structure learning for Ising trees"};
  app.require_subcommand(1);

  Common common;
  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo error rates, passive vs active");
  add_common(simulate, common);
  simulate->add_option("--config", sim.config, "key = value config file")->check(CLI::ExistingFile);
  simulate->add_option("--structure", sim.structure, "chain | hmm | binary-tree | random");
  simulate->add_option("--p", sim.p, "node count (chain, hmm, random)");
  simulate->add_option("--levels", sim.levels, "binary tree levels");
  simulate->add_option("--rho", sim.rho, "comma-separated correlations");
  simulate->add_option("--n", sim.n, "sample sizes: list or start:stop:step");
  simulate->add_option("--trials", sim.trials, "trials per cell");
  simulate->add_flag("--allow-assumption-violation", sim.allow_violation, "accept p < 82 d silently");

  std::vector<std::string> curves;
  double curve_step = 0.005, curve_lo = 0.01, curve_hi = 0.99;
  auto* exponents = app.add_subcommand("exponents", "emit exponent curves");
  add_common(exponents, common);
  exponents->add_option("--curve", curves, "curve label (repeatable, default all)");
  exponents->add_option("--grid-step", curve_step, "rho step");
  exponents->add_option("--rho-min", curve_lo, "first grid point");
  exponents->add_option("--rho-max", curve_hi, "last grid point");

  double verify_step = 0.005, min_margin = 0.0;
  auto* verify = app.add_subcommand("verify-bounds", "check the exponent inequalities on a grid");
  add_common(verify, common);
  verify->add_option("--grid-step", verify_step, "rho step on [0.01, 0.99]");
  verify->add_option("--min-margin", min_margin, "required lhs - rhs");

  std::size_t random_p = 0;
  auto* packing = app.add_subcommand("packing-demo", "greedy 2-packing trace");
  add_common(packing, common);
  packing->add_option("--random", random_p, "use a random tree with this many nodes");

  std::string slope_in;
  auto* slope = app.add_subcommand("slope", "fit ln(error rate) against n");
  add_common(slope, common);
  slope->add_option("csv", slope_in, "summary CSV from simulate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*simulate)
      return run_simulate(sim, common, simulate->count("--seed") > 0, simulate->count("--workers") > 0,
                          simulate->count("--out") > 0);
    if (*exponents) return run_exponents(curves, curve_step, curve_lo, curve_hi, common);
    if (*verify) return run_verify(verify_step, min_margin, common);
    if (*packing) return run_packing_demo(random_p, common);
    if (*slope) return run_slope(slope_in, common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 1;
}
