#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snfts/baselines.hpp"
#include "snfts/dgp.hpp"

namespace snfts {

/// One test column of an experiment.
struct TestSpec {
  /// sn_cov, sn_eigval, sn_eigval_ratio, sn_eigfun, pkm, clrv, subsampling, bootstrap
  std::string id = "sn_cov";
  TestConfig cfg{};
  /// When set, K is chosen per replication by select_k at this threshold.
  std::optional<double> auto_k;
  EigenTarget::Kind target = EigenTarget::Kind::eigenvalues;  // subsampling, bootstrap
  SubsampleConfig sub{};
  LrvConfig lrv{};
  Index n_boot = 250;
  /// Only the first max_reps replications run this test (0 = all).
  Index max_reps = 0;
  std::string label;

  /// Parses "id key=value ..." (keys: K, components, p, basis, eps, target,
  /// l, drop_partial, n_boot, max_reps, label; K=auto85 / auto95).
  static TestSpec parse(const std::string& text);
  std::string column() const;
};

struct ExperimentConfig {
  std::string scenario = "A";
  DgpConfig dgp_x{};
  DgpConfig dgp_y{};
  Index n_rep = 1000;
  std::vector<TestSpec> tests;
  double alpha = 0.05;
  bool size_adjusted = false;
  /// Both samples of the calibration phase come from this DGP.
  std::optional<DgpConfig> null_dgp;
  /// Project raw curves on 20 cubic B-splines before testing.
  bool smooth = true;
  Index n_basis = 20;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

/// Reads "key = value" lines; '#' starts a comment. Sample keys take the
/// prefixes x., y. and null. (n, rho, mu, v, delta, grid, burn_in); each
/// "test = ..." line adds a TestSpec.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ResultRow {
  std::string scenario;
  Index n = 0;  // per-sample size N1 (= N2 in all shipped experiments)
  std::string test;
  std::string column;
  Index n_rep = 0;       // replications with a statistic
  Index rejections = 0;
  Index degenerate = 0;  // replications with a degenerate normalizer
  Index failed = 0;      // other per-replication errors
  double rate = 0.0;
  double se = 0.0;       // sqrt(rate (1 - rate) / n_rep)
};

struct ResultTable {
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& test, const std::string& column) const;
};

/// Every replication draws both samples and runs every test at level alpha.
ResultTable run_size_experiment(const ExperimentConfig& cfg);

/// Critical values are the empirical (1 - alpha) quantiles of each statistic
/// under null_dgp; the alternative replications are rejected against them.
ResultTable run_power_experiment(const ExperimentConfig& cfg);

/// Statistic and decision of one test on one replication's pair.
TestResult run_test(const TestSpec& spec, const RecursiveFpca& fpca, double alpha, std::uint64_t seed);

enum class TableFormat { csv, markdown };
std::string emit_table(const ResultTable& t, TableFormat format);
ResultTable parse_table_csv(std::istream& in);

struct AnalysisOptions {
  Index period = 0;  // 0: plain centering
  Index p = 3;
  Index M = 3;
  BasisVariant individual = BasisVariant::nu_star;
  BasisVariant joint = BasisVariant::nu_star2;
  double epsilon = 0.0;
  double alpha = 0.05;
  Index n_basis = 0;  // 0: no smoothing
  Index summary_components = 10;
};

struct AnalysisReport {
  std::string markdown;
  /// point,statistic,p_low,p_high per grid location (equal sample sizes only).
  std::string lag0_csv;
};

AnalysisReport analyze_two_samples(const FunctionalSample& x, const FunctionalSample& y,
                                   const AnalysisOptions& options);
AnalysisReport analyze_two_samples(const std::filesystem::path& x_path, const std::filesystem::path& y_path,
                                   const AnalysisOptions& options);

}  // namespace snfts
