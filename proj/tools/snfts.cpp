// snfts: command-line front end (gen, tabulate, experiment, analyze).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "snfts/error.hpp"
#include "snfts/harness.hpp"
#include "snfts/nulldist.hpp"
#include "snfts/sample_io.hpp"

namespace {

using namespace snfts;

struct TabulateArgs {
  std::vector<Index> q{1};
  std::vector<double> eps{0.0};
  Index reps = 100000;
  Index grid = 5000;
  std::uint64_t seed = 1;
  std::string out;
  bool standard = false;
};

// Each q uses seed + q so tables for different dimensions are independent.
int run_tabulate(const TabulateArgs& a) {
  std::vector<Index> qs = a.q;
  std::vector<double> eps = a.eps;
  if (a.standard) {
    qs.clear();
    for (Index q = 1; q <= 21; ++q) qs.push_back(q);
    eps = {0.0, 0.05, 0.1};
  }
  QuantileCache cache;
  if (!a.out.empty() && std::filesystem::exists(a.out))
    for (auto& t : QuantileCache(a.out).tables()) cache.insert(std::move(t));
  for (Index q : qs) {
    WqSpec spec{q, 0.0, a.grid, a.reps, a.seed + static_cast<std::uint64_t>(q)};
    const auto draws = simulate_wq_multi(spec, eps);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      WqSpec s = spec;
      s.epsilon = eps[e];
      QuantileTable t = table_from_draws(s, draws[e].values);
      if (draws[e].redraws > 0) std::cerr << "q=" << q << " eps=" << eps[e] << ": " << draws[e].redraws << " redraws\n";
      const std::vector<QuantileTable> one{t};
      write_quantile_cache(std::cout, one);
      cache.insert(std::move(t));
    }
    std::cout.flush();
    if (!a.out.empty()) cache.save(a.out);
  }
  return 0;
}

struct GenArgs {
  std::string dgp = "fourier";
  DgpConfig cfg{};
  std::vector<double> b{1.0};
  Index basis = 0;
  std::string out;
};

int run_gen(GenArgs& a) {
  FunctionalSample s = [&] {
    if (a.dgp == "fourier") return gen_fourier_process(a.cfg);
    if (a.dgp == "linear") {
      LinearProcessConfig lp;
      lp.n = a.cfg.n;
      lp.b = a.b;
      lp.lambdas = a.cfg.v;
      lp.grid_size = a.cfg.grid_size;
      lp.seed = a.cfg.seed;
      return gen_linear_process(lp);
    }
    throw InvalidArgument("unknown dgp '" + a.dgp + "' (fourier, linear)");
  }();
  if (a.basis > 0) s = bspline_smooth(s, a.basis);
  if (a.out.empty()) write_sample(std::cout, s);
  else save_sample(s, a.out);
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::string format = "markdown";
  std::string out;
  bool quick = false;
  Index threads = -1;
};

int run_experiment(const ExperimentArgs& a) {
  ExperimentConfig cfg = load_experiment_config(a.config);
  if (a.quick) cfg.n_rep = 200;
  if (a.threads >= 0) cfg.threads = static_cast<unsigned>(a.threads);
  const ResultTable t = cfg.size_adjusted ? run_power_experiment(cfg) : run_size_experiment(cfg);
  const std::string text = emit_table(t, a.format == "csv" ? TableFormat::csv : TableFormat::markdown);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(a.out);
    out << text;
  }
  return 0;
}

struct AnalyzeArgs {
  std::string x, y;
  AnalysisOptions opt{};
  std::string individual = "nu_star", joint = "nu_star2";
  std::string out, map;
};

int run_analyze(AnalyzeArgs& a) {
  a.opt.individual = parse_basis_variant(a.individual);
  a.opt.joint = parse_basis_variant(a.joint);
  const AnalysisReport r = analyze_two_samples(a.x, a.y, a.opt);
  if (a.out.empty()) {
    std::cout << r.markdown;
  } else {
    std::ofstream out(a.out);
    out << r.markdown;
  }
  if (!a.map.empty()) {
    std::ofstream out(a.map);
    out << r.lag0_csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-normalized two-sample tests for functional time series"};
  app.require_subcommand(1);

  TabulateArgs tab;
  auto* tabulate = app.add_subcommand("tabulate", "Simulate quantiles of W_q(eps)");
  tabulate->add_option("--q", tab.q, "Dimension(s)")->delimiter(',');
  tabulate->add_option("--eps", tab.eps, "Trimming level(s)")->delimiter(',');
  tabulate->add_option("--reps", tab.reps, "Monte Carlo draws");
  tabulate->add_option("--grid", tab.grid, "Brownian path resolution");
  tabulate->add_option("--seed", tab.seed, "Base seed");
  tabulate->add_option("--out", tab.out, "Cache file to merge results into");
  tabulate->add_flag("--standard", tab.standard, "All q = 1..21 at eps = 0, 0.05, 0.1");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Simulate a functional time series and write it as CSV");
  gen_cmd->add_option("--dgp", gen.dgp, "fourier or linear");
  gen_cmd->add_option("--n", gen.cfg.n, "Number of curves");
  gen_cmd->add_option("--rho", gen.cfg.rho, "VAR(1) coefficient");
  gen_cmd->add_option("--mu", gen.cfg.mu, "Innovation mixing scalar");
  gen_cmd->add_option("--v", gen.cfg.v, "Variances (fourier) or eigenvalues (linear)")->delimiter(',');
  gen_cmd->add_option("--delta", gen.cfg.delta, "Phase per frequency")->delimiter(',');
  gen_cmd->add_option("--b", gen.b, "Moving-average coefficients (linear)")->delimiter(',');
  gen_cmd->add_option("--grid", gen.cfg.grid_size, "Grid points");
  gen_cmd->add_option("--seed", gen.cfg.seed, "Seed");
  gen_cmd->add_option("--basis", gen.basis, "Smooth with this many cubic B-splines (0: raw)");
  gen_cmd->add_option("--out", gen.out, "Output CSV (default stdout)");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a size or size-adjusted power experiment");
  exp_cmd->add_option("--config", exp.config, "Experiment file (key = value)")->required();
  exp_cmd->add_option("--format", exp.format, "markdown or csv");
  exp_cmd->add_option("--out", exp.out, "Output file (default stdout)");
  exp_cmd->add_flag("--quick", exp.quick, "200 replications");
  exp_cmd->add_option("--threads", exp.threads, "Worker threads (0: all cores)");

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "Compare two functional samples");
  an_cmd->add_option("--x", an.x, "First sample CSV")->required();
  an_cmd->add_option("--y", an.y, "Second sample CSV")->required();
  an_cmd->add_option("--period", an.opt.period, "Seasonal period (0: plain centering)");
  an_cmd->add_option("--p", an.opt.p, "Pooled eigenfunctions in the basis");
  an_cmd->add_option("--M", an.opt.M, "Leading components tested");
  an_cmd->add_option("--eps", an.opt.epsilon, "Trimming");
  an_cmd->add_option("--alpha", an.opt.alpha, "Level");
  an_cmd->add_option("--basis", an.opt.n_basis, "Smooth with this many cubic B-splines (0: raw)");
  an_cmd->add_option("--individual", an.individual, "Basis for single eigenfunctions");
  an_cmd->add_option("--joint", an.joint, "Basis for the joint eigenfunction test");
  an_cmd->add_option("--out", an.out, "Markdown report (default stdout)");
  an_cmd->add_option("--map", an.map, "Lag-0 cross-correlation CSV");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*tabulate) return run_tabulate(tab);
    if (*gen_cmd) return run_gen(gen);
    if (*exp_cmd) return run_experiment(exp);
    if (*an_cmd) return run_analyze(an);
  } catch (const snfts::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
