#include "snfts/sntest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "snfts/error.hpp"
#include "snfts/sample_io.hpp"

namespace snfts {

namespace {

constexpr double kMaxCondition = 1e12;

TestResult finish(std::string name, const RecursiveTrack& track, double epsilon, const Vector& center,
                  double alpha, QuantileCache& cache) {
  const SnMatrix v = sn_matrix(track, epsilon);
  TestResult r;
  r.test = std::move(name);
  r.statistic = sn_quadratic_form(track, v, center);
  r.q = track.dim();
  r.epsilon = epsilon;
  r.alpha = alpha;
  r.condition_number = v.condition_number;
  r.k_first = v.k_first;
  r.k_last = v.k_last;
  calibrate(r, cache.table(r.q, epsilon));
  return r;
}

}  // namespace

std::string to_string(BasisVariant v) {
  switch (v) {
    case BasisVariant::nu: return "nu";
    case BasisVariant::nu_tilde: return "nu_tilde";
    case BasisVariant::nu_star: return "nu_star";
    case BasisVariant::nu_star2: return "nu_star2";
  }
  return "?";
}

BasisVariant parse_basis_variant(const std::string& s) {
  if (s == "nu") return BasisVariant::nu;
  if (s == "nu_tilde") return BasisVariant::nu_tilde;
  if (s == "nu_star") return BasisVariant::nu_star;
  if (s == "nu_star2") return BasisVariant::nu_star2;
  throw InvalidArgument("unknown basis variant '" + s + "'");
}

std::string format_result(const TestResult& r) {
  std::ostringstream out;
  out << "test=" << r.test << " statistic=" << format_double(r.statistic) << " q=" << r.q
      << " eps=" << format_double(r.epsilon) << " alpha=" << format_double(r.alpha)
      << " critical=" << format_double(r.critical_value) << " p=[" << format_double(r.p_bracket.first) << ','
      << format_double(r.p_bracket.second) << "] reject=" << (r.reject ? 1 : 0) << " k=" << r.k_first << ".."
      << r.k_last;
  return out.str();
}

SnMatrix sn_matrix(const RecursiveTrack& track, double epsilon) {
  if (track.count() == 0) throw InvalidArgument("sn_matrix: empty track");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("sn_matrix: epsilon must lie in [0, 1)");
  const Index n = track.n;
  const auto k_min = static_cast<Index>(std::floor(static_cast<double>(n) * epsilon));
  const Vector last = track.last();
  const Index d = track.dim();

  SnMatrix out;
  out.v = Matrix::Zero(d, d);
  out.k_first = -1;
  for (Index c = 0; c < track.count(); ++c) {
    const Index k = track.k[static_cast<std::size_t>(c)];
    if (k < k_min) continue;
    if (out.k_first < 0) out.k_first = k;
    out.k_last = k;
    const double kk = static_cast<double>(k);
    out.v.selfadjointView<Eigen::Lower>().rankUpdate(track.vectors.col(c) - last, kk * kk);
  }
  if (out.k_first < 0) throw InvalidArgument("sn_matrix: trimming removes every recursive estimate");
  out.v.triangularView<Eigen::StrictlyUpper>() = out.v.transpose();
  out.v /= static_cast<double>(n) * static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(out.v, Eigen::EigenvaluesOnly);
  const double lo = solver.eigenvalues()(0);
  const double hi = solver.eigenvalues()(d - 1);
  out.condition_number = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(out.condition_number <= kMaxCondition)) throw DegenerateNormalizer(out.condition_number);
  return out;
}

double sn_quadratic_form(const RecursiveTrack& track, const SnMatrix& v, const Vector& center) {
  if (center.size() != track.dim()) throw DimensionError("sn_quadratic_form: center has wrong length");
  const Vector a = track.last() - center;
  return static_cast<double>(track.n) * a.dot(v.v.ldlt().solve(a));
}

std::pair<double, double> p_bracket(const QuantileTable& table, double statistic) {
  // Rounded so that 1 - 0.9 reports as 0.1.
  auto tail = [&](Index i) { return std::round((1.0 - table.levels(i)) * 1e12) / 1e12; };
  const Index L = table.levels.size();
  if (statistic <= table.quantiles(0)) return {tail(0), 1.0};
  for (Index i = 1; i < L; ++i)
    if (statistic <= table.quantiles(i)) return {tail(i), tail(i - 1)};
  return {0.0, tail(L - 1)};
}

void calibrate(TestResult& r, const QuantileTable& table) {
  r.p_bracket = p_bracket(table, r.statistic);
  if (r.alpha >= 1.0) {
    r.critical_value = -std::numeric_limits<double>::infinity();
    r.reject = true;
    return;
  }
  r.critical_value = quantile(table, 1.0 - r.alpha);
  r.reject = r.statistic > r.critical_value;
}

Matrix basis_weights(BasisVariant variant, Index j, Index p) {
  if (p < 1 || j < 1 || j > p) throw InvalidArgument("basis: need 1 <= j <= p");
  std::vector<Index> others;
  for (Index i = 1; i <= p; ++i) {
    if (i == j) continue;
    const bool after = i > j;
    if (variant == BasisVariant::nu || variant == BasisVariant::nu_star2) {
      if (after) others.push_back(i);
    } else {
      others.push_back(i);
    }
  }
  if (others.empty()) throw InvalidArgument("basis: empty basis for j = " + std::to_string(j));
  const bool add_j = variant == BasisVariant::nu_star || variant == BasisVariant::nu_star2;
  Matrix w = Matrix::Zero(p, static_cast<Index>(others.size()));
  for (std::size_t c = 0; c < others.size(); ++c) {
    w(others[c] - 1, static_cast<Index>(c)) = 1.0;
    if (add_j) w(j - 1, static_cast<Index>(c)) = 1.0;
  }
  return w;
}

Matrix build_basis(const EigenSystem& pooled, BasisVariant variant, Index j, Index p) {
  if (pooled.size() < p) throw InvalidArgument("build_basis: pooled rank below p");
  return basis_weights(variant, j, p).transpose() * pooled.functions.topRows(p);
}

std::vector<ProjectionBlock> projection_blocks(const TestConfig& cfg) {
  if (cfg.components.empty()) throw InvalidArgument("eigenfunction test: no components");
  std::vector<ProjectionBlock> blocks;
  if (cfg.components.size() == 1) {
    const Index j = cfg.components.front();
    blocks.push_back({j, basis_weights(cfg.basis, j, cfg.p)});
    return blocks;
  }
  for (Index j : cfg.components) {
    if (j < 1 || j > cfg.p) throw InvalidArgument("basis: need 1 <= j <= p");
    const bool empty =
        (cfg.basis == BasisVariant::nu || cfg.basis == BasisVariant::nu_star2) ? j == cfg.p : cfg.p == 1;
    if (empty) continue;
    blocks.push_back({j, basis_weights(cfg.basis, j, cfg.p)});
  }
  if (blocks.empty()) throw InvalidArgument("eigenfunction test: every basis block is empty");
  return blocks;
}

Index required_rank(TrackMode mode, const TestConfig& cfg) {
  const Index top =
      cfg.components.empty() ? 1 : *std::max_element(cfg.components.begin(), cfg.components.end());
  switch (mode) {
    case TrackMode::cov_projection: return cfg.K;
    case TrackMode::eigval_diff:
    case TrackMode::eigval_ratio: return top;
    case TrackMode::eigfun_projection: return std::max(cfg.p, top);
  }
  return top;
}

RecursiveTrack recursive_track(const RecursiveFpca& fpca, const TestConfig& cfg, TrackMode mode) {
  switch (mode) {
    case TrackMode::cov_projection: return fpca.cov_projection(cfg.K);
    case TrackMode::eigval_diff: return fpca.eigval_diff(cfg.components);
    case TrackMode::eigval_ratio: return fpca.eigval_ratio(cfg.components);
    case TrackMode::eigfun_projection: {
      const auto blocks = projection_blocks(cfg);
      return fpca.eigfun_projection(blocks);
    }
  }
  throw InvalidArgument("recursive_track: unknown mode");
}

RecursiveTrack recursive_track(const SamplePair& pair, const TestConfig& cfg, TrackMode mode) {
  const RecursiveFpca fpca(pair, required_rank(mode, cfg));
  return recursive_track(fpca, cfg, mode);
}

TestResult test_cov_operator(const RecursiveFpca& fpca, const TestConfig& cfg, QuantileCache& cache) {
  const auto track = fpca.cov_projection(cfg.K);
  return finish("sn_cov", track, 0.0, Vector::Zero(track.dim()), cfg.alpha, cache);
}

TestResult test_eigenvalues(const RecursiveFpca& fpca, const TestConfig& cfg, QuantileCache& cache) {
  const auto track = fpca.eigval_diff(cfg.components);
  return finish("sn_eigval", track, cfg.epsilon, Vector::Zero(track.dim()), cfg.alpha, cache);
}

TestResult test_eigenvalue_ratios(const RecursiveFpca& fpca, const TestConfig& cfg, QuantileCache& cache) {
  const auto track = fpca.eigval_ratio(cfg.components);
  return finish("sn_eigval_ratio", track, cfg.epsilon, Vector::Ones(track.dim()), cfg.alpha, cache);
}

TestResult test_eigenfunctions(const RecursiveFpca& fpca, const TestConfig& cfg, QuantileCache& cache) {
  const auto track = recursive_track(fpca, cfg, TrackMode::eigfun_projection);
  return finish("sn_eigfun", track, cfg.epsilon, Vector::Zero(track.dim()), cfg.alpha, cache);
}

TestResult test_cov_operator(const SamplePair& pair, const TestConfig& cfg, QuantileCache& cache) {
  return test_cov_operator(RecursiveFpca(pair, required_rank(TrackMode::cov_projection, cfg)), cfg, cache);
}

TestResult test_eigenvalues(const SamplePair& pair, const TestConfig& cfg, QuantileCache& cache) {
  return test_eigenvalues(RecursiveFpca(pair, required_rank(TrackMode::eigval_diff, cfg)), cfg, cache);
}

TestResult test_eigenvalue_ratios(const SamplePair& pair, const TestConfig& cfg, QuantileCache& cache) {
  return test_eigenvalue_ratios(RecursiveFpca(pair, required_rank(TrackMode::eigval_ratio, cfg)), cfg,
                                cache);
}

TestResult test_eigenfunctions(const SamplePair& pair, const TestConfig& cfg, QuantileCache& cache) {
  return test_eigenfunctions(RecursiveFpca(pair, required_rank(TrackMode::eigfun_projection, cfg)), cfg,
                             cache);
}

TestResult lag0_crosscorr_sn(const Vector& x, const Vector& y, double alpha, QuantileCache& cache) {
  const Index n = x.size();
  if (y.size() != n) throw DimensionError("lag0_crosscorr_sn: series lengths differ");
  if (n < 10) throw InvalidArgument("lag0_crosscorr_sn: need at least 10 observations");
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double vx = xc.squaredNorm(), vy = yc.squaredNorm();
  if (!(vx > 0.0) || !(vy > 0.0)) throw InvalidArgument("lag0_crosscorr_sn: zero-variance series");

  // Prefix correlations; prefixes whose variance is still zero are skipped.
  std::vector<Index> ks;
  std::vector<double> rho;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (Index k = 1; k <= n; ++k) {
    const double a = xc(k - 1), b = yc(k - 1);
    sx += a;
    sy += b;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
    if (k < 2) continue;
    const double kk = static_cast<double>(k);
    const double cxx = sxx - sx * sx / kk, cyy = syy - sy * sy / kk, cxy = sxy - sx * sy / kk;
    if (cxx <= 1e-14 * vx || cyy <= 1e-14 * vy) continue;
    ks.push_back(k);
    rho.push_back(cxy / std::sqrt(cxx * cyy));
  }
  const double rn = rho.back();

  TestResult r;
  r.test = "lag0_crosscorr";
  r.q = 1;
  r.alpha = alpha;
  r.k_first = ks.front();
  r.k_last = ks.back();
  double v = 0.0;
  for (std::size_t c = 0; c < ks.size(); ++c) {
    const double kk = static_cast<double>(ks[c]);
    v += kk * kk * (rho[c] - rn) * (rho[c] - rn);
  }
  v /= static_cast<double>(n) * static_cast<double>(n);
  if (v <= 1e-20 * rn * rn) {
    if (rn == 0.0) throw DegenerateNormalizer(std::numeric_limits<double>::infinity());
    r.statistic = std::numeric_limits<double>::infinity();
    r.condition_number = std::numeric_limits<double>::infinity();
  } else {
    r.statistic = static_cast<double>(n) * rn * rn / v;
    r.condition_number = 1.0;
  }
  calibrate(r, cache.table(1, 0.0));
  return r;
}

}  // namespace snfts
