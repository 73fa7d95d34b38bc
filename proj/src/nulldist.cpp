#include "snfts/nulldist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>

#include "snfts/error.hpp"
#include "snfts/rng.hpp"
#include "snfts/sample_io.hpp"

#ifndef SNFTS_WQ_CACHE_PATH
#define SNFTS_WQ_CACHE_PATH ""
#endif

namespace snfts {

namespace {

constexpr double kPivotTol = 1e-14;

// Stream tags keep bootstrap resampling independent of the path draws.
constexpr std::uint64_t kPathTag = 0;
constexpr std::uint64_t kBootstrapTag = 1;

Index first_riemann_index(double epsilon, Index n_grid) {
  return static_cast<Index>(std::ceil(epsilon * static_cast<double>(n_grid) - 1e-9));
}

// `scale` is the mean squared path norm; J far below it is rounding noise.
std::optional<double> quadratic_form(const Matrix& j, const Vector& b1, double scale) {
  Eigen::LLT<Matrix> llt(j);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  if (diag.minCoeff() <= 0.0) return std::nullopt;
  const double ratio = diag.minCoeff() / diag.maxCoeff();
  if (ratio * ratio < kPivotTol) return std::nullopt;
  if (diag.minCoeff() * diag.minCoeff() < kPivotTol * scale) return std::nullopt;
  return b1.dot(llt.solve(b1));
}

// J(eps) for each requested eps (`starts` sorted descending), accumulated
// backwards from r = 1 so one pass serves every trimming level. Increments
// are stored q x n_grid, one column per time step.
void trimmed_gram(const Matrix& inc, std::span<const Index> starts, std::vector<Matrix>& out, Matrix& path,
                  Vector& b1) {
  const Index q = inc.rows();
  const Index n = inc.cols();
  path.resize(q, n + 1);
  path.col(0).setZero();
  for (Index i = 0; i < n; ++i) path.col(i + 1) = path.col(i) + inc.col(i);
  b1 = path.col(n);

  Matrix acc = Matrix::Zero(q, q);
  Vector bridge(q);
  const double inv_n = 1.0 / static_cast<double>(n);
  Index i = n - 1;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    if (q == 1) {
      double a = 0.0;
      for (; i >= starts[s]; --i) {
        const double b = path(0, i) - static_cast<double>(i) * inv_n * b1(0);
        a += b * b;
      }
      acc(0, 0) += a;
    } else {
      for (; i >= starts[s]; --i) {
        bridge = path.col(i) - (static_cast<double>(i) * inv_n) * b1;
        acc.selfadjointView<Eigen::Lower>().rankUpdate(bridge);
      }
    }
    out[s] = acc.selfadjointView<Eigen::Lower>();
    out[s] *= inv_n;
  }
}

void fill_increments(Engine& eng, Matrix& inc) {
  StandardNormal normal;
  const double scale = 1.0 / std::sqrt(static_cast<double>(inc.cols()));
  double* p = inc.data();
  for (Index i = 0; i < inc.size(); ++i) p[i] = scale * normal(eng);
}

double empirical_quantile(std::vector<double>& scratch, double level) {
  // Linear interpolation between order statistics (type 7).
  const double h = (static_cast<double>(scratch.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(scratch.begin(), scratch.begin() + lo, scratch.end());
  const double a = scratch[lo];
  if (lo + 1 >= scratch.size()) return a;
  const double b = *std::min_element(scratch.begin() + lo + 1, scratch.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

}  // namespace

void WqSpec::validate() const {
  if (q < 1) throw InvalidArgument("WqSpec: q must be >= 1");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("WqSpec: epsilon must lie in [0, 1)");
  if (n_grid < 1000) throw InvalidArgument("WqSpec: n_grid must be >= 1000");
  if (n_rep < 10000) throw InvalidArgument("WqSpec: n_rep must be >= 10000");
}

std::optional<double> wq_from_increments(const Matrix& increments, double epsilon) {
  if (increments.rows() < 2 || increments.cols() < 1) throw DimensionError("wq_from_increments: empty path");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("wq_from_increments: epsilon must lie in [0, 1)");
  const Index start = first_riemann_index(epsilon, increments.rows());
  std::vector<Matrix> j(1);
  Matrix path;
  Vector b1;
  trimmed_gram(increments.transpose(), std::span<const Index>(&start, 1), j, path, b1);
  return quadratic_form(j[0], b1, path.squaredNorm() / static_cast<double>(path.cols()));
}

std::vector<WqDraws> simulate_wq_multi(const WqSpec& spec, std::span<const double> epsilons) {
  if (epsilons.empty()) throw InvalidArgument("simulate_wq_multi: no trimming levels");
  std::vector<std::size_t> order(epsilons.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    WqSpec s = spec;
    s.epsilon = epsilons[i];
    s.validate();
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return epsilons[a] > epsilons[b]; });
  std::vector<Index> starts;
  for (auto o : order) starts.push_back(first_riemann_index(epsilons[o], spec.n_grid));

  std::vector<WqDraws> out(epsilons.size());
  for (auto& d : out) d.values.resize(spec.n_rep);
  Matrix inc(spec.q, spec.n_grid);
  std::vector<Matrix> grams(starts.size());
  Matrix path;
  Vector b1;
  for (Index rep = 0; rep < spec.n_rep; ++rep) {
    Engine eng = derive_stream(spec.seed, {kPathTag, static_cast<std::uint64_t>(rep)});
    // A singular J at one level redraws the path for every level so the draws stay coupled.
    for (;;) {
      fill_increments(eng, inc);
      trimmed_gram(inc, starts, grams, path, b1);
      std::vector<double> vals(starts.size());
      bool ok = true;
      const double scale = path.squaredNorm() / static_cast<double>(path.cols());
      for (std::size_t s = 0; s < starts.size() && ok; ++s) {
        auto v = quadratic_form(grams[s], b1, scale);
        if (v) vals[s] = *v;
        else ok = false;
      }
      if (ok) {
        for (std::size_t s = 0; s < starts.size(); ++s) out[order[s]].values(rep) = vals[s];
        break;
      }
      for (auto& d : out) ++d.redraws;
    }
  }
  return out;
}

WqDraws simulate_wq(const WqSpec& spec) {
  spec.validate();
  const double eps = spec.epsilon;
  return std::move(simulate_wq_multi(spec, std::span<const double>(&eps, 1))[0]);
}

QuantileTable table_from_draws(const WqSpec& spec, const Vector& draws, std::span<const double> levels,
                               Index n_bootstrap) {
  if (draws.size() < 2) throw InvalidArgument("table_from_draws: need at least two draws");
  if (levels.empty()) throw InvalidArgument("table_from_draws: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) throw InvalidArgument("table_from_draws: level outside (0, 1)");
    if (i > 0 && levels[i] <= levels[i - 1]) throw InvalidArgument("table_from_draws: levels must increase");
  }
  const Index L = static_cast<Index>(levels.size());
  QuantileTable t;
  t.spec = spec;
  t.levels = Eigen::Map<const Vector>(levels.data(), L);
  t.quantiles.resize(L);
  t.standard_error = Vector::Zero(L);

  std::vector<double> scratch(draws.data(), draws.data() + draws.size());
  for (Index l = 0; l < L; ++l) t.quantiles(l) = empirical_quantile(scratch, levels[l]);

  if (n_bootstrap >= 2) {
    Engine eng = derive_stream(spec.seed, {kBootstrapTag});
    std::uniform_int_distribution<Index> pick(0, draws.size() - 1);
    Matrix boot(n_bootstrap, L);
    for (Index b = 0; b < n_bootstrap; ++b) {
      for (auto& v : scratch) v = draws(pick(eng));
      for (Index l = 0; l < L; ++l) boot(b, l) = empirical_quantile(scratch, levels[l]);
    }
    const RowVector mean = boot.colwise().mean();
    for (Index l = 0; l < L; ++l)
      t.standard_error(l) =
          std::sqrt((boot.col(l).array() - mean(l)).square().sum() / static_cast<double>(n_bootstrap - 1));
  }
  return t;
}

QuantileTable tabulate(const WqSpec& spec, std::span<const double> levels, Index n_bootstrap) {
  const WqDraws d = simulate_wq(spec);
  return table_from_draws(spec, d.values, levels, n_bootstrap);
}

double quantile(const QuantileTable& table, double level) {
  const Vector& lv = table.levels;
  if (lv.size() == 0) throw InvalidArgument("quantile: empty table");
  if (level < lv(0) || level > lv(lv.size() - 1))
    throw InvalidArgument("quantile: level " + format_double(level) + " outside tabulated range");
  for (Index i = 0; i < lv.size(); ++i)
    if (level == lv(i)) return table.quantiles(i);
  Index hi = 1;
  while (lv(hi) < level) ++hi;
  const double w = (level - lv(hi - 1)) / (lv(hi) - lv(hi - 1));
  return (1.0 - w) * table.quantiles(hi - 1) + w * table.quantiles(hi);
}

double chi_sq_quantile(Index df, double level) {
  if (df < 1) throw InvalidArgument("chi_sq_quantile: df must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("chi_sq_quantile: level must lie in (0, 1)");
  return boost::math::quantile(boost::math::chi_squared(static_cast<double>(df)), level);
}

double chi_sq_cdf(Index df, double x) {
  if (df < 1) throw InvalidArgument("chi_sq_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared(static_cast<double>(df)), x);
}

std::vector<QuantileTable> read_quantile_cache(std::istream& in) {
  std::vector<QuantileTable> out;
  std::vector<double> lv, qv, se;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (out.empty()) return;
    auto& t = out.back();
    const Index L = static_cast<Index>(lv.size());
    if (L == 0) throw ParseError("quantile cache record without rows", lineno);
    t.levels = Eigen::Map<Vector>(lv.data(), L);
    t.quantiles = Eigen::Map<Vector>(qv.data(), L);
    t.standard_error = Eigen::Map<Vector>(se.data(), L);
    lv.clear();
    qv.clear();
    se.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string w; ss >> w;) tok.push_back(w);
    try {
      if (tok.size() == 5) {
        flush();
        QuantileTable t;
        t.spec.q = std::stoll(tok[0]);
        t.spec.epsilon = std::stod(tok[1]);
        t.spec.n_grid = std::stoll(tok[2]);
        t.spec.n_rep = std::stoll(tok[3]);
        t.spec.seed = std::stoull(tok[4]);
        out.push_back(t);
      } else if (tok.size() == 3) {
        if (out.empty()) throw ParseError("quantile row before header", lineno);
        lv.push_back(std::stod(tok[0]));
        qv.push_back(std::stod(tok[1]));
        se.push_back(std::stod(tok[2]));
      } else {
        throw ParseError("expected 5 header fields or 3 row fields", lineno);
      }
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", lineno);
    }
  }
  flush();
  return out;
}

void write_quantile_cache(std::ostream& out, std::span<const QuantileTable> tables) {
  for (const auto& t : tables) {
    out << t.spec.q << ' ' << format_double(t.spec.epsilon) << ' ' << t.spec.n_grid << ' ' << t.spec.n_rep << ' '
        << t.spec.seed << '\n';
    for (Index l = 0; l < t.levels.size(); ++l)
      out << format_double(t.levels(l)) << ' ' << format_double(t.quantiles(l)) << ' '
          << format_double(t.standard_error(l)) << '\n';
  }
}

QuantileCache::QuantileCache(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidArgument("cannot open quantile cache " + file.string());
  for (auto& t : read_quantile_cache(in)) insert(std::move(t));
}

QuantileCache& QuantileCache::shared() {
  static QuantileCache cache = [] {
    std::filesystem::path path = SNFTS_WQ_CACHE_PATH;
    if (const char* env = std::getenv("SNFTS_WQ_CACHE"); env && *env) {
      if (std::filesystem::exists(env)) path = env;
      else std::cerr << "snfts: SNFTS_WQ_CACHE=" << env << " not found, using " << path << '\n';
    }
    if (!path.empty() && std::filesystem::exists(path)) return QuantileCache(path);
    return QuantileCache();
  }();
  return cache;
}

QuantileCache::Key QuantileCache::key(Index q, double epsilon) {
  return {q, std::llround(epsilon * 1e9)};
}

bool QuantileCache::contains(Index q, double epsilon) const {
  std::lock_guard lock(mutex_);
  return tables_.count(key(q, epsilon)) > 0;
}

void QuantileCache::insert(QuantileTable table) {
  std::lock_guard lock(mutex_);
  tables_[key(table.spec.q, table.spec.epsilon)] = std::move(table);
}

QuantileTable QuantileCache::table(Index q, double epsilon) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = tables_.find(key(q, epsilon)); it != tables_.end()) return it->second;
  }
  WqSpec spec = fallback;
  spec.q = q;
  spec.epsilon = epsilon;
  QuantileTable t = tabulate(spec);
  insert(t);
  return t;
}

std::vector<QuantileTable> QuantileCache::tables() const {
  std::lock_guard lock(mutex_);
  std::vector<QuantileTable> out;
  for (const auto& [k, t] : tables_) out.push_back(t);
  return out;
}

void QuantileCache::save(const std::filesystem::path& file) const {
  const auto all = tables();
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    write_quantile_cache(out, all);
    if (!out.flush()) throw InvalidArgument("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace snfts
