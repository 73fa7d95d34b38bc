#include "snfts/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <thread>

#include "snfts/error.hpp"
#include "snfts/rng.hpp"
#include "snfts/sample_io.hpp"

namespace snfts {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument("not a number: '" + s + "'");
  }
}

Index to_index(const std::string& s) {
  const double v = to_double(s);
  if (v != std::floor(v)) throw InvalidArgument("not an integer: '" + s + "'");
  return static_cast<Index>(v);
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split(s, ',')) out.push_back(to_double(t));
  return out;
}

std::vector<Index> to_indices(const std::string& s) {
  std::string body = s;
  if (!body.empty() && body.front() == '(') body = body.substr(1);
  if (!body.empty() && body.back() == ')') body.pop_back();
  std::vector<Index> out;
  for (const auto& t : split(body, ',')) out.push_back(to_index(t));
  return out;
}

bool to_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw InvalidArgument("not a boolean: '" + s + "'");
}

void set_dgp_key(DgpConfig& d, const std::string& key, const std::string& value) {
  if (key == "n") d.n = to_index(value);
  else if (key == "rho") d.rho = to_double(value);
  else if (key == "mu") d.mu = to_double(value);
  else if (key == "v") d.v = to_doubles(value);
  else if (key == "delta") d.delta = to_doubles(value);
  else if (key == "grid") d.grid_size = to_index(value);
  else if (key == "burn_in") d.burn_in = to_index(value);
  else throw InvalidArgument("unknown sample key '" + key + "'");
}

std::string components_label(const std::vector<Index>& c) {
  if (c.size() == 1) return std::to_string(c.front());
  std::string s = "(";
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
  return s + ")";
}

enum class Status { ok, degenerate, failed, skipped };

struct Outcome {
  Status status = Status::skipped;
  double statistic = 0.0;
  bool reject = false;
};

// outcomes[rep * tests + t]
std::vector<Outcome> simulate(const ExperimentConfig& cfg, std::uint64_t phase, const DgpConfig& gx,
                              const DgpConfig& gy) {
  const Index reps = cfg.n_rep;
  const auto tests = static_cast<Index>(cfg.tests.size());
  std::vector<Outcome> out(static_cast<std::size_t>(reps * tests));
  std::optional<BsplineSmoother> smoother;
  if (cfg.smooth) smoother.emplace(Grid::uniform(gx.grid_size), cfg.n_basis);

  auto one = [&](Index rep) {
    Engine eng = derive_stream(cfg.seed, {phase, static_cast<std::uint64_t>(rep)});
    DgpConfig x = gx, y = gy;
    x.seed = eng();
    y.seed = eng();
    const std::uint64_t test_seed = eng();
    auto prepare = [&](const DgpConfig& d) {
      FunctionalSample s = gen_fourier_process(d);
      if (smoother) s = smoother->apply(s);
      return center(s).first;
    };
    const SamplePair pair(prepare(x), prepare(y));
    std::optional<RecursiveFpca> fpca;
    for (Index t = 0; t < tests; ++t) {
      const TestSpec& spec = cfg.tests[static_cast<std::size_t>(t)];
      Outcome& o = out[static_cast<std::size_t>(rep * tests + t)];
      if (spec.max_reps > 0 && rep >= spec.max_reps) continue;
      try {
        if (!fpca) fpca.emplace(pair, 0);
        const TestResult r = run_test(spec, *fpca, cfg.alpha, test_seed + static_cast<std::uint64_t>(t));
        o = {Status::ok, r.statistic, r.reject};
      } catch (const DegenerateNormalizer&) {
        o.status = Status::degenerate;
      } catch (const Error&) {
        o.status = Status::failed;
      }
    }
  };

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, reps));
  if (threads <= 1) {
    for (Index rep = 0; rep < reps; ++rep) one(rep);
    return out;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (Index rep; (rep = next.fetch_add(1)) < reps;) one(rep);
    });
  for (auto& th : pool) th.join();
  return out;
}

ResultTable tally(const ExperimentConfig& cfg, const std::vector<Outcome>& out,
                  const std::vector<double>* critical) {
  ResultTable table;
  const auto tests = cfg.tests.size();
  for (std::size_t t = 0; t < tests; ++t) {
    ResultRow row;
    row.scenario = cfg.scenario;
    row.n = cfg.dgp_x.n;
    row.test = cfg.tests[t].id;
    row.column = cfg.tests[t].column();
    for (Index rep = 0; rep < cfg.n_rep; ++rep) {
      const Outcome& o = out[static_cast<std::size_t>(rep) * tests + t];
      switch (o.status) {
        case Status::ok:
          ++row.n_rep;
          if (critical ? o.statistic > (*critical)[t] : o.reject) ++row.rejections;
          break;
        case Status::degenerate: ++row.degenerate; break;
        case Status::failed: ++row.failed; break;
        case Status::skipped: break;
      }
    }
    if (row.n_rep > 0) {
      row.rate = static_cast<double>(row.rejections) / static_cast<double>(row.n_rep);
      row.se = std::sqrt(row.rate * (1.0 - row.rate) / static_cast<double>(row.n_rep));
    }
    table.rows.push_back(row);
  }
  return table;
}

std::string percent(double rate) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * rate;
  return s.str();
}

}  // namespace

TestSpec TestSpec::parse(const std::string& text) {
  std::istringstream in(text);
  TestSpec s;
  if (!(in >> s.id)) throw InvalidArgument("empty test specification");
  static const std::vector<std::string> ids{"sn_cov", "sn_eigval", "sn_eigval_ratio", "sn_eigfun",
                                            "pkm",    "clrv",      "subsampling",     "bootstrap"};
  if (std::find(ids.begin(), ids.end(), s.id) == ids.end()) throw InvalidArgument("unknown test '" + s.id + "'");
  if (s.id == "sn_eigfun") s.target = EigenTarget::Kind::eigenfunctions;
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw InvalidArgument("expected key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "K") {
      if (value == "auto85") s.auto_k = 0.85;
      else if (value == "auto95") s.auto_k = 0.95;
      else s.cfg.K = to_index(value);
    } else if (key == "components" || key == "M") {
      s.cfg.components = to_indices(value);
    } else if (key == "p") {
      s.cfg.p = to_index(value);
    } else if (key == "basis") {
      s.cfg.basis = parse_basis_variant(value);
    } else if (key == "eps") {
      s.cfg.epsilon = to_double(value);
    } else if (key == "target") {
      if (value == "eigenvalues") s.target = EigenTarget::Kind::eigenvalues;
      else if (value == "eigenfunctions") s.target = EigenTarget::Kind::eigenfunctions;
      else throw InvalidArgument("unknown target '" + value + "'");
    } else if (key == "l") {
      s.sub.l = to_index(value);
    } else if (key == "drop_partial") {
      s.sub.drop_partial = to_bool(value);
    } else if (key == "bandwidth") {
      s.lrv.andrews = false;
      s.lrv.bandwidth = to_double(value);
    } else if (key == "n_boot") {
      s.n_boot = to_index(value);
    } else if (key == "max_reps") {
      s.max_reps = to_index(value);
    } else if (key == "label") {
      s.label = value;
    } else {
      throw InvalidArgument("unknown test key '" + key + "'");
    }
  }
  return s;
}

std::string TestSpec::column() const {
  if (!label.empty()) return label;
  if (id == "sn_cov" || id == "pkm" || id == "clrv") {
    if (auto_k) return *auto_k < 0.9 ? "K=auto85" : "K=auto95";
    return "K=" + std::to_string(cfg.K);
  }
  std::string c = "M=" + components_label(cfg.components);
  if (id == "subsampling") c += " l=" + std::to_string(sub.l);
  if ((id == "subsampling" || id == "bootstrap") && target == EigenTarget::Kind::eigenfunctions) c += " eigfun";
  return c;
}

void ExperimentConfig::validate() const {
  if (n_rep < 100) throw InvalidArgument("experiment: n_rep must be >= 100");
  if (tests.empty()) throw InvalidArgument("experiment: no tests configured");
  if (size_adjusted && !null_dgp) throw InvalidArgument("experiment: size_adjusted requires a null DGP");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("experiment: alpha must lie in (0, 1]");
  dgp_x.validate();
  dgp_y.validate();
  if (dgp_x.grid_size != dgp_y.grid_size) throw DimensionError("experiment: samples need the same grid");
  if (null_dgp) null_dgp->validate();
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      if (key == "scenario") cfg.scenario = value;
      else if (key == "n_rep") cfg.n_rep = to_index(value);
      else if (key == "alpha") cfg.alpha = to_double(value);
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_index(value));
      else if (key == "size_adjusted") cfg.size_adjusted = to_bool(value);
      else if (key == "smooth") cfg.smooth = to_bool(value);
      else if (key == "n_basis") cfg.n_basis = to_index(value);
      else if (key == "threads") cfg.threads = static_cast<unsigned>(to_index(value));
      else if (key == "test") cfg.tests.push_back(TestSpec::parse(value));
      else if (key.rfind("x.", 0) == 0) set_dgp_key(cfg.dgp_x, key.substr(2), value);
      else if (key.rfind("y.", 0) == 0) set_dgp_key(cfg.dgp_y, key.substr(2), value);
      else if (key.rfind("null.", 0) == 0) {
        if (!cfg.null_dgp) cfg.null_dgp = DgpConfig{};
        set_dgp_key(*cfg.null_dgp, key.substr(5), value);
      } else {
        throw InvalidArgument("unknown key '" + key + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return parse_experiment_config(in);
}

const ResultRow* ResultTable::find(const std::string& test, const std::string& column) const {
  for (const auto& r : rows)
    if (r.test == test && r.column == column) return &r;
  return nullptr;
}

TestResult run_test(const TestSpec& spec, const RecursiveFpca& fpca, double alpha, std::uint64_t seed) {
  TestConfig cfg = spec.cfg;
  cfg.alpha = alpha;
  if (spec.auto_k) {
    Vector padded = Vector::Zero(std::max<Index>(20, fpca.pooled_spectrum().size()));
    padded.head(fpca.pooled_spectrum().size()) = fpca.pooled_spectrum();
    cfg.K = select_k(padded, *spec.auto_k, 20);
  }
  const EigenTarget target{spec.target, cfg};
  if (spec.id == "sn_cov") return test_cov_operator(fpca, cfg);
  if (spec.id == "sn_eigval") return test_eigenvalues(fpca, cfg);
  if (spec.id == "sn_eigval_ratio") return test_eigenvalue_ratios(fpca, cfg);
  if (spec.id == "sn_eigfun") return test_eigenfunctions(fpca, cfg);
  if (spec.id == "pkm") return pkm_test(fpca, cfg.K, alpha);
  if (spec.id == "clrv") return clrv_test(fpca, cfg.K, spec.lrv, alpha);
  if (spec.id == "subsampling") return subsampling_test(fpca, target, spec.sub, alpha);
  if (spec.id == "bootstrap") return iid_bootstrap_test(fpca, target, spec.n_boot, seed, alpha);
  throw InvalidArgument("unknown test '" + spec.id + "'");
}

ResultTable run_size_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return tally(cfg, simulate(cfg, 1, cfg.dgp_x, cfg.dgp_y), nullptr);
}

ResultTable run_power_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.null_dgp) throw InvalidArgument("power experiment: null DGP missing");
  const auto null = simulate(cfg, 0, *cfg.null_dgp, *cfg.null_dgp);
  const auto tests = cfg.tests.size();
  std::vector<double> critical(tests, std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < tests; ++t) {
    std::vector<double> stats;
    for (Index rep = 0; rep < cfg.n_rep; ++rep) {
      const Outcome& o = null[static_cast<std::size_t>(rep) * tests + t];
      if (o.status == Status::ok) stats.push_back(o.statistic);
    }
    if (stats.empty()) continue;
    std::sort(stats.begin(), stats.end());
    if (cfg.alpha >= 1.0) {
      critical[t] = -std::numeric_limits<double>::infinity();
      continue;
    }
    // Exceeding this order statistic happens for floor(alpha n) null draws.
    const auto idx = static_cast<std::size_t>(
        std::max(0.0, std::ceil((1.0 - cfg.alpha) * static_cast<double>(stats.size()) - 1e-9) - 1.0));
    critical[t] = stats[std::min(idx, stats.size() - 1)];
  }
  return tally(cfg, simulate(cfg, 1, cfg.dgp_x, cfg.dgp_y), &critical);
}

std::string emit_table(const ResultTable& t, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::csv) {
    out << "scenario,n,test,column,n_rep,rejections,degenerate,failed,rate,se\n";
    for (const auto& r : t.rows)
      out << r.scenario << ',' << r.n << ',' << r.test << ",\"" << r.column << "\"," << r.n_rep << ','
          << r.rejections << ',' << r.degenerate << ',' << r.failed << ',' << format_double(r.rate) << ','
          << format_double(r.se) << '\n';
    return out.str();
  }
  // Wide layout: one row per (scenario, N, test), one column per K / M setting.
  std::vector<std::string> columns;
  std::vector<std::tuple<std::string, Index, std::string>> keys;
  std::map<std::tuple<std::string, Index, std::string, std::string>, const ResultRow*> cells;
  for (const auto& r : t.rows) {
    if (std::find(columns.begin(), columns.end(), r.column) == columns.end()) columns.push_back(r.column);
    const auto key = std::make_tuple(r.scenario, r.n, r.test);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    cells[{r.scenario, r.n, r.test, r.column}] = &r;
  }
  out << "| scenario | N | test |";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|---|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& [sc, n, test] : keys) {
    out << "| " << sc << " | " << n << " | " << test << " |";
    for (const auto& c : columns) {
      const auto it = cells.find({sc, n, test, c});
      out << ' ' << (it == cells.end() ? std::string("") : percent(it->second->rate)) << " |";
    }
    out << '\n';
  }
  return out.str();
}

ResultTable parse_table_csv(std::istream& in) {
  ResultTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || trim(line).empty()) continue;
    // The column label is quoted and may contain commas.
    const auto q1 = line.find('"'), q2 = line.find('"', q1 + 1);
    if (q1 == std::string::npos || q2 == std::string::npos) throw ParseError("missing quoted column", lineno);
    const auto head = split(line.substr(0, q1), ',');
    const auto tail = split(line.substr(q2 + 2), ',');
    if (head.size() < 3 || tail.size() != 6) throw ParseError("wrong field count", lineno);
    try {
      ResultRow r;
      r.scenario = head[0];
      r.n = to_index(head[1]);
      r.test = head[2];
      r.column = line.substr(q1 + 1, q2 - q1 - 1);
      r.n_rep = to_index(tail[0]);
      r.rejections = to_index(tail[1]);
      r.degenerate = to_index(tail[2]);
      r.failed = to_index(tail[3]);
      r.rate = to_double(tail[4]);
      r.se = to_double(tail[5]);
      t.rows.push_back(r);
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return t;
}

AnalysisReport analyze_two_samples(const FunctionalSample& x_raw, const FunctionalSample& y_raw,
                                   const AnalysisOptions& o) {
  if (!(x_raw.grid() == y_raw.grid())) throw DimensionError("analyze: samples are on different grids");
  const Index need = std::max<Index>(10, 2 * o.period);
  if (x_raw.n() < need || y_raw.n() < need) throw InvalidArgument("analyze: samples too short");
  if (o.M < 1 || o.M > o.p) throw InvalidArgument("analyze: need 1 <= M <= p");

  auto prepare = [&](const FunctionalSample& s) {
    const FunctionalSample smooth = o.n_basis > 0 ? bspline_smooth(s, o.n_basis) : s;
    return o.period > 0 ? seasonal_demean(smooth, o.period) : center(smooth).first;
  };
  const SamplePair pair(prepare(x_raw), prepare(y_raw));
  const RecursiveFpca fpca(pair, std::max(o.p, o.M));
  const CurveSpan& span = fpca.span();

  std::ostringstream md;
  md << "# Two-sample analysis\n\n";
  md << "- X: " << (x_raw.label().empty() ? "x" : x_raw.label()) << ", " << pair.n1() << " curves\n";
  md << "- Y: " << (y_raw.label().empty() ? "y" : y_raw.label()) << ", " << pair.n2() << " curves\n";
  md << "- grid points: " << pair.grid().size() << "\n";
  md << "- seasonal period: " << (o.period > 0 ? std::to_string(o.period) : std::string("none")) << "\n\n";

  const Index show = std::min(o.summary_components, span.r());
  const SpanEigen ex = span.decompose_range(0, pair.n1(), show, true);
  const SpanEigen ey = span.decompose_range(pair.n1(), pair.n2(), show, true);
  const auto total = [&](Index first, Index count) {
    return span.coords().middleRows(first, count).squaredNorm() / static_cast<double>(count);
  };
  const double tx = total(0, pair.n1()), ty = total(pair.n1(), pair.n2());
  const double txy = span.coords().squaredNorm() / static_cast<double>(pair.n());
  md << "## Principal components\n\n";
  md << "| j | lambda_X | share_X | lambda_Y | share_Y | lambda_XY | share_XY |\n|---|---|---|---|---|---|---|\n";
  double cx = 0, cy = 0, cxy = 0;
  for (Index j = 0; j < show; ++j) {
    cx += ex.values(j);
    cy += ey.values(j);
    cxy += fpca.pooled_spectrum()(j);
    md << "| " << j + 1 << " | " << format_double(ex.values(j)) << " | " << percent(cx / tx) << "% | "
       << format_double(ey.values(j)) << " | " << percent(cy / ty) << "% | "
       << format_double(fpca.pooled_spectrum()(j)) << " | " << percent(cxy / txy) << "% |\n";
  }

  auto cell = [&](auto&& run) -> std::pair<std::string, std::string> {
    try {
      const TestResult r = run();
      return {format_double(r.statistic),
              "[" + format_double(r.p_bracket.first) + ", " + format_double(r.p_bracket.second) + "]"};
    } catch (const DegenerateNormalizer&) {
      return {"degenerate", "-"};
    } catch (const SingularityError&) {
      return {"singular", "-"};
    }
  };
  md << "\n## Eigencomponent tests\n\n";
  md << "| K | G2(M) | p-value | G3(M0) | p-value |\n|---|---|---|---|---|\n";
  TestConfig cfg;
  cfg.p = o.p;
  cfg.epsilon = o.epsilon;
  cfg.alpha = o.alpha;
  for (Index j = 1; j <= o.M; ++j) {
    cfg.components = {j};
    cfg.basis = o.individual;
    const auto g2 = cell([&] { return test_eigenvalues(fpca, cfg); });
    const auto g3 = cell([&] { return test_eigenfunctions(fpca, cfg); });
    md << "| " << j << " | " << g2.first << " | " << g2.second << " | " << g3.first << " | " << g3.second
       << " |\n";
  }
  cfg.components.clear();
  for (Index j = 1; j <= o.M; ++j) cfg.components.push_back(j);
  cfg.basis = o.joint;
  const auto g2 = cell([&] { return test_eigenvalues(fpca, cfg); });
  const auto g3 = cell([&] { return test_eigenfunctions(fpca, cfg); });
  md << "| joint " << components_label(cfg.components) << " | " << g2.first << " | " << g2.second << " | "
     << g3.first << " | " << g3.second << " |\n";

  AnalysisReport report;
  if (pair.n1() == pair.n2()) {
    std::ostringstream csv;
    csv << "point,statistic,p_low,p_high\n";
    std::map<std::pair<double, double>, Index> bins;
    const Matrix& gp = pair.grid().points();
    for (Index t = 0; t < pair.grid().size(); ++t) {
      std::string point = format_double(gp(t, 0));
      if (gp.cols() > 1) point += ' ' + format_double(gp(t, 1));
      try {
        const TestResult r = lag0_crosscorr_sn(pair.x().values().col(t), pair.y().values().col(t), o.alpha);
        csv << point << ',' << format_double(r.statistic) << ',' << format_double(r.p_bracket.first) << ','
            << format_double(r.p_bracket.second) << '\n';
        ++bins[r.p_bracket];
      } catch (const Error&) {
        csv << point << ",nan,nan,nan\n";
      }
    }
    report.lag0_csv = csv.str();
    md << "\n## Lag-0 cross-correlation\n\n| p-value range | grid points |\n|---|---|\n";
    for (auto it = bins.rbegin(); it != bins.rend(); ++it)
      md << "| [" << format_double(it->first.first) << ", " << format_double(it->first.second) << "] | "
         << it->second << " |\n";
  }
  report.markdown = md.str();
  return report;
}

AnalysisReport analyze_two_samples(const std::filesystem::path& x_path, const std::filesystem::path& y_path,
                                   const AnalysisOptions& options) {
  FunctionalSample x = load_sample(x_path);
  FunctionalSample y = load_sample(y_path);
  return analyze_two_samples(x, y, options);
}

}  // namespace snfts
