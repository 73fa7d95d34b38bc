#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "snfts/harness.hpp"
#include "snfts/sntest.hpp"

using namespace snfts;

namespace {

std::string data_path(const std::string& name) { return std::string(SNFTS_SOURCE_DIR) + "/tests/data/" + name; }

ExperimentConfig mini_config() { return load_experiment_config(data_path("mini.cfg")); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("test specs parse and label their columns") {
  const TestSpec cov = TestSpec::parse("sn_cov K=3");
  CHECK(cov.id == "sn_cov");
  CHECK(cov.cfg.K == 3);
  CHECK(cov.column() == "K=3");

  const TestSpec auto_k = TestSpec::parse("sn_cov K=auto95");
  REQUIRE(auto_k.auto_k.has_value());
  CHECK(*auto_k.auto_k == 0.95);

  const TestSpec joint = TestSpec::parse("sn_eigval components=1,2 eps=0.1");
  CHECK(joint.cfg.components == std::vector<Index>{1, 2});
  CHECK(joint.cfg.epsilon == 0.1);

  const TestSpec sub = TestSpec::parse("subsampling components=1 target=eigenfunctions l=12");
  CHECK(sub.target == EigenTarget::Kind::eigenfunctions);
  CHECK(sub.sub.l == 12);
  CHECK(sub.column() != TestSpec::parse("subsampling components=1 l=12").column());

  CHECK_THROWS(TestSpec::parse("sn_cov K=x"));
  CHECK_THROWS(TestSpec::parse("sn_cov bogus=1"));
}

TEST_CASE("experiment configs parse and validate") {
  const ExperimentConfig cfg = mini_config();
  CHECK(cfg.n_rep == 100);
  CHECK(cfg.dgp_x.n == 24);
  CHECK(cfg.dgp_y.grid_size == 60);
  CHECK(cfg.tests.size() == 7);
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig few = cfg;
  few.n_rep = 50;
  CHECK_THROWS_AS(few.validate(), InvalidArgument);
  ExperimentConfig adj = cfg;
  adj.size_adjusted = true;
  CHECK_THROWS_AS(adj.validate(), InvalidArgument);
  ExperimentConfig zero = cfg;
  zero.alpha = 0.0;
  CHECK_THROWS_AS(zero.validate(), InvalidArgument);

  std::istringstream bad("n_rep = 100\nwhat = 3\n");
  CHECK_THROWS(parse_experiment_config(bad));
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"table1_size_A.cfg", "table2_size_A.cfg", "table2_power_C.cfg", "table3_size_A.cfg",
                           "self_consistency.cfg"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_experiment_config(std::string(SNFTS_SOURCE_DIR) + "/configs/" + name).validate());
  }
}

TEST_CASE("experiments are reproducible and independent of the thread count") {
  ExperimentConfig cfg = mini_config();
  const ResultTable a = run_size_experiment(cfg);
  const ResultTable b = run_size_experiment(cfg);
  cfg.threads = 2;
  const ResultTable c = run_size_experiment(cfg);
  CHECK(emit_table(a, TableFormat::csv) == emit_table(b, TableFormat::csv));
  CHECK(emit_table(a, TableFormat::csv) == emit_table(c, TableFormat::csv));

  // Regression snapshot of this configuration.
  const std::string golden = read_file(data_path("mini_golden.csv"));
  CHECK(emit_table(a, TableFormat::csv) == golden);

  for (const auto& r : a.rows) {
    CAPTURE(r.test);
    CHECK(r.n_rep + r.degenerate + r.failed == (r.test == "bootstrap" ? 10 : 100));
    CHECK(r.rejections <= r.n_rep);
  }
}

TEST_CASE("alpha = 1 rejects every replication") {
  ExperimentConfig cfg = mini_config();
  cfg.alpha = 1.0;
  cfg.tests = {TestSpec::parse("sn_cov K=1"), TestSpec::parse("pkm K=1")};
  for (const auto& r : run_size_experiment(cfg).rows) {
    CHECK(r.rate == 1.0);
    CHECK(r.se == 0.0);
  }
}

TEST_CASE("result tables round-trip through csv") {
  CHECK(emit_table(ResultTable{}, TableFormat::csv) ==
        "scenario,n,test,column,n_rep,rejections,degenerate,failed,rate,se\n");
  ResultTable t;
  t.rows.push_back({"A", 100, "sn_eigval", "M=(1,2)", 998, 37, 2, 0, 37.0 / 998.0, 0.006});
  t.rows.push_back({"C", 50, "pkm", "K=2", 1000, 55, 0, 0, 0.055, 0.0072});
  const std::string csv = emit_table(t, TableFormat::csv);
  std::istringstream in(csv);
  const ResultTable back = parse_table_csv(in);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].column == "M=(1,2)");
  CHECK(back.rows[0].degenerate == 2);
  CHECK(back.rows[0].rate == doctest::Approx(37.0 / 998.0).epsilon(1e-12));
  CHECK(emit_table(back, TableFormat::csv) == csv);

  const std::string md = emit_table(t, TableFormat::markdown);
  CHECK(md.find("| A | 100 | sn_eigval |") != std::string::npos);

  std::istringstream broken("header\nA,1,pkm,K=1,1,0,0,0,0,0\n");
  CHECK_THROWS_AS(parse_table_csv(broken), ParseError);
}

TEST_CASE("size-adjusted power is alpha under the null") {
  ExperimentConfig cfg = mini_config();
  cfg.tests = {TestSpec::parse("sn_eigval components=1"), TestSpec::parse("pkm K=1")};
  cfg.size_adjusted = true;
  cfg.null_dgp = cfg.dgp_x;
  cfg.n_rep = 200;
  const ResultTable t = run_power_experiment(cfg);
  for (const auto& r : t.rows) {
    CAPTURE(r.test);
    // Three standard errors of a 5% rate over 200 draws.
    CHECK(r.rate < 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 200.0));
  }
}

TEST_CASE("analysis of identical samples flags degenerate statistics") {
  DgpConfig d;
  d.n = 40;
  d.grid_size = 50;
  d.seed = 12;
  const FunctionalSample x = gen_fourier_process(d);
  AnalysisOptions o;
  o.p = 3;
  o.M = 2;
  const AnalysisReport r = analyze_two_samples(x, x, o);
  CHECK(r.markdown.find("degenerate") != std::string::npos);
  CHECK(r.markdown.find("## Eigencomponent tests") != std::string::npos);
  CHECK_FALSE(r.lag0_csv.empty());

  DgpConfig coarse = d;
  coarse.grid_size = 30;
  CHECK_THROWS(analyze_two_samples(x, gen_fourier_process(coarse), o));
}

TEST_CASE("a scale change in the second component is detected at N = 200") {
  Index rejections = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    DgpConfig dx;
    dx.n = 200;
    dx.grid_size = 100;
    dx.mu = 0.0;
    dx.v = {10, 0.5, 5, 0.3};
    dx.seed = 1000 + s;
    DgpConfig dy = dx;
    dy.v = {10, 0.5, 1, 0.3};
    dy.seed = 2000 + s;
    const SamplePair pair(center(gen_fourier_process(dx)).first, center(gen_fourier_process(dy)).first);
    TestConfig cfg;
    cfg.components = {2};
    if (test_eigenvalues(RecursiveFpca(pair, 0), cfg).reject) ++rejections;
  }
  CHECK(rejections >= 6);
}

}  // TEST_SUITE
