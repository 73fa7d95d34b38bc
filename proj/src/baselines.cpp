#include "snfts/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "snfts/error.hpp"
#include "snfts/rng.hpp"

namespace snfts {

namespace {

constexpr double kRhoClip = 0.999;

// Exact chi-square calibration; the p-value is reported as a point bracket.
void calibrate_chi_sq(TestResult& r) {
  const double p = 1.0 - chi_sq_cdf(r.q, r.statistic);
  r.p_bracket = {p, p};
  if (r.alpha >= 1.0) {
    r.critical_value = -std::numeric_limits<double>::infinity();
    r.reject = true;
    return;
  }
  r.critical_value = chi_sq_quantile(r.q, 1.0 - r.alpha);
  r.reject = r.statistic > r.critical_value;
}

// Scores of one sample (first K columns), centered at their mean when the
// engine recenters.
Matrix sample_scores(const RecursiveFpca& fpca, Index first, Index count, Index K) {
  Matrix out = fpca.pooled_scores().block(first, 0, count, K);
  if (fpca.recenter()) out.rowwise() -= out.colwise().mean();
  return out;
}

// vech(s s') for each row of `scores`.
Matrix vech_outer_rows(const Matrix& scores) {
  const Index count = scores.rows(), K = scores.cols();
  Matrix out(count, K * (K + 1) / 2);
  for (Index i = 0; i < count; ++i) {
    const auto row = scores.row(i);
    Index pos = 0;
    for (Index c = 0; c < K; ++c)
      for (Index r = c; r < K; ++r) out(i, pos++) = row(r) * row(c);
  }
  return out;
}

Matrix pseudo_inverse(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  const Vector& ev = solver.eigenvalues();
  const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Vector inv = Vector::Zero(ev.size());
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) inv(i) = 1.0 / ev(i);
  return solver.eigenvectors() * inv.asDiagonal() * solver.eigenvectors().transpose();
}

void check_target(const RecursiveFpca& fpca, const EigenTarget& target) {
  if (required_rank(target) > fpca.rank()) throw InvalidArgument("baseline: target needs more eigenpairs than retained");
}

// Stacked coordinate differences of the target eigenfunctions; the squared
// norm is the summed squared L2 distance.
Vector eigenfunction_gap(const SpanEigen& x, const SpanEigen& y, const std::vector<Index>& components) {
  const Index r = x.vectors.rows();
  Vector out(r * static_cast<Index>(components.size()));
  for (std::size_t c = 0; c < components.size(); ++c)
    out.segment(static_cast<Index>(c) * r, r) = x.vectors.col(components[c] - 1) - y.vectors.col(components[c] - 1);
  return out;
}

}  // namespace

Index required_rank(const EigenTarget& target) {
  return required_rank(target.kind == EigenTarget::Kind::eigenvalues ? TrackMode::eigval_diff
                                                                     : TrackMode::eigfun_projection,
                       target.cfg);
}

TestResult pkm_test(const RecursiveFpca& fpca, Index K, double alpha) {
  if (K < 1 || K > fpca.rank()) throw InvalidArgument("pkm_test: K outside the retained rank");
  const Index n1 = fpca.n1(), n2 = fpca.n2(), n = fpca.n();
  const Matrix sx = sample_scores(fpca, 0, n1, K);
  const Matrix sy = sample_scores(fpca, n1, n2, K);
  const Matrix c = sx.transpose() * sx / static_cast<double>(n1) - sy.transpose() * sy / static_cast<double>(n2);
  const Vector varrho =
      (sx.colwise().squaredNorm() + sy.colwise().squaredNorm()).transpose() / static_cast<double>(n);
  if (varrho.minCoeff() <= 0.0) throw SingularityError("pkm_test: zero pooled score variance");

  double sum = 0.0;
  for (Index i = 0; i < K; ++i)
    for (Index j = 0; j < K; ++j) sum += c(i, j) * c(i, j) / (varrho(i) * varrho(j));

  TestResult r;
  r.test = "pkm";
  r.statistic = static_cast<double>(n1) * static_cast<double>(n2) / (2.0 * static_cast<double>(n)) * sum;
  r.q = K * (K + 1) / 2;
  r.alpha = alpha;
  r.k_first = r.k_last = n;
  calibrate_chi_sq(r);
  return r;
}

TestResult pkm_test(const SamplePair& pair, Index K, double alpha) {
  return pkm_test(RecursiveFpca(pair, K), K, alpha);
}

Matrix bartlett_lrv(const Matrix& series, double bandwidth) {
  const Index T = series.rows();
  if (T < 4) throw InvalidArgument("bartlett_lrv: need at least 4 observations");
  if (!(bandwidth >= 0.0)) throw InvalidArgument("bartlett_lrv: bandwidth must be non-negative");
  const Matrix x = series.rowwise() - series.colwise().mean();
  const double t = static_cast<double>(T);
  Matrix out = x.transpose() * x / t;
  const Index hmax = std::min<Index>(static_cast<Index>(std::floor(bandwidth)), T - 1);
  for (Index h = 1; h <= hmax; ++h) {
    const Matrix g = x.bottomRows(T - h).transpose() * x.topRows(T - h) / t;
    const double w = 1.0 - static_cast<double>(h) / (bandwidth + 1.0);
    out += w * (g + g.transpose());
  }
  return out;
}

Bandwidth andrews_bandwidth(const Matrix& series) {
  const Index T = series.rows();
  if (T < 8) throw InvalidArgument("andrews_bandwidth: need at least 8 observations");
  const Matrix x = series.rowwise() - series.colwise().mean();
  Bandwidth out;
  double num = 0.0, den = 0.0;
  for (Index c = 0; c < x.cols(); ++c) {
    const auto lag = x.col(c).head(T - 1);
    const auto lead = x.col(c).tail(T - 1);
    const double ss = lag.squaredNorm();
    // A constant column has no AR(1) fit; treat it as a unit root.
    double rho = ss > 0.0 ? lead.dot(lag) / ss : 1.0;
    if (std::abs(rho) >= kRhoClip) {
      rho = std::copysign(kRhoClip, rho);
      out.clipped = true;
    }
    double sigma2 = (lead - rho * lag).squaredNorm() / static_cast<double>(T - 1);
    if (!(sigma2 > 0.0)) sigma2 = 1.0;
    const double s4 = sigma2 * sigma2;
    num += 4.0 * rho * rho * s4 / (std::pow(1.0 - rho, 6) * std::pow(1.0 + rho, 2));
    den += s4 / std::pow(1.0 - rho, 4);
  }
  const double a1 = num / den;
  out.value = std::min(1.1447 * std::cbrt(a1 * static_cast<double>(T)), static_cast<double>(T - 1));
  return out;
}

TestResult clrv_test(const RecursiveFpca& fpca, Index K, const LrvConfig& lrv, double alpha) {
  if (K < 1 || K > fpca.rank()) throw InvalidArgument("clrv_test: K outside the retained rank");
  const Index n1 = fpca.n1(), n2 = fpca.n2(), n = fpca.n();
  const Matrix ux = vech_outer_rows(sample_scores(fpca, 0, n1, K));
  const Matrix uy = vech_outer_rows(sample_scores(fpca, n1, n2, K));
  const Vector a = ux.colwise().mean().transpose() - uy.colwise().mean().transpose();

  auto lrv_of = [&](const Matrix& series) {
    const double b = lrv.andrews ? andrews_bandwidth(series).value : lrv.bandwidth;
    return bartlett_lrv(series, b);
  };
  Matrix sigma;
  if (n1 == n2) {
    // Paired summands x_l - y_l have mean alpha_N.
    sigma = static_cast<double>(n) / static_cast<double>(n1) * lrv_of(ux - uy);
  } else {
    sigma = static_cast<double>(n) *
            (lrv_of(ux) / static_cast<double>(n1) + lrv_of(uy) / static_cast<double>(n2));
  }

  TestResult r;
  r.test = "clrv";
  r.q = a.size();
  r.alpha = alpha;
  r.k_first = r.k_last = n;
  if (a.isZero(0.0)) {
    r.statistic = 0.0;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma, Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues()(0), hi = solver.eigenvalues()(sigma.rows() - 1);
    r.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(r.condition_number <= 1e12)) throw DegenerateNormalizer(r.condition_number);
    r.statistic = static_cast<double>(n) * a.dot(sigma.ldlt().solve(a));
  }
  calibrate_chi_sq(r);
  return r;
}

TestResult clrv_test(const SamplePair& pair, Index K, const LrvConfig& lrv, double alpha) {
  return clrv_test(RecursiveFpca(pair, K), K, lrv, alpha);
}

Vector target_difference(const RecursiveFpca& fpca, const SpanEigen& x, const SpanEigen& y,
                         const EigenTarget& target) {
  const auto& comps = target.cfg.components;
  if (target.kind == EigenTarget::Kind::eigenvalues) {
    Vector out(static_cast<Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) out(static_cast<Index>(c)) = x.values(comps[c] - 1) - y.values(comps[c] - 1);
    return out;
  }
  const auto blocks = projection_blocks(target.cfg);
  Index dim = 0;
  for (const auto& b : blocks) dim += b.weights.cols();
  Vector out(dim);
  Index pos = 0;
  for (const auto& b : blocks) {
    const Index j = b.component - 1;
    const Vector proj =
        fpca.pooled().vectors.leftCols(b.weights.rows()).transpose() * (x.vectors.col(j) - y.vectors.col(j));
    out.segment(pos, b.weights.cols()) = b.weights.transpose() * proj;
    pos += b.weights.cols();
  }
  return out;
}

TestResult subsampling_test(const RecursiveFpca& fpca, const EigenTarget& target, const SubsampleConfig& sub,
                            double alpha) {
  check_target(fpca, target);
  const Index n0 = fpca.n1();
  if (fpca.n2() != n0) throw InvalidArgument("subsampling_test: requires equal sample sizes");
  if (sub.l < 2 || sub.l > n0 / 2) throw InvalidArgument("subsampling_test: need 2 <= l <= N0/2");
  const Index complete = n0 / sub.l;
  if (complete < 3) throw InvalidArgument("subsampling_test: fewer than 3 complete blocks");
  const bool partial = !sub.drop_partial && n0 % sub.l != 0;
  const Index blocks = complete + (partial ? 1 : 0);

  const CurveSpan& span = fpca.span();
  const Index rank = fpca.rank();
  const Vector d = target_difference(fpca, fpca.x_prefix(n0), fpca.y_prefix(n0), target);

  Matrix v(d.size(), blocks);
  for (Index b = 0; b < blocks; ++b) {
    const Index first = b * sub.l;
    const Index len = std::min(sub.l, n0 - first);
    SpanEigen ex = span.decompose_range(first, len, rank, fpca.recenter());
    SpanEigen ey = span.decompose_range(n0 + first, len, rank, fpca.recenter());
    align_to(ex, fpca.x_full().vectors);
    align_to(ey, fpca.x_full().vectors);
    v.col(b) = target_difference(fpca, ex, ey, target);
  }
  const Matrix centered = v.colwise() - v.rowwise().mean();
  const Matrix cov = static_cast<double>(sub.l) / static_cast<double>(blocks) * centered * centered.transpose();

  TestResult r;
  r.test = "subsampling";
  r.q = d.size();
  r.alpha = alpha;
  r.k_first = r.k_last = fpca.n();
  r.statistic = d.isZero(0.0) ? 0.0 : static_cast<double>(n0) * d.dot(pseudo_inverse(cov) * d);
  calibrate_chi_sq(r);
  return r;
}

TestResult subsampling_test(const SamplePair& pair, const EigenTarget& target, const SubsampleConfig& sub,
                            double alpha) {
  return subsampling_test(RecursiveFpca(pair, required_rank(target)), target, sub, alpha);
}

TestResult iid_bootstrap_test(const RecursiveFpca& fpca, const EigenTarget& target, Index n_boot,
                              std::uint64_t seed, double alpha) {
  check_target(fpca, target);
  if (n_boot < 200) throw InvalidArgument("iid_bootstrap_test: need at least 200 bootstrap draws");
  const Index n1 = fpca.n1(), n2 = fpca.n2(), rank = fpca.rank();
  const CurveSpan& span = fpca.span();
  const SpanEigen& x0 = fpca.x_prefix(n1);
  const SpanEigen& y0 = fpca.y_prefix(n2);
  const bool values = target.kind == EigenTarget::Kind::eigenvalues;
  const Vector d0 = values ? target_difference(fpca, x0, y0, target)
                           : eigenfunction_gap(x0, y0, target.cfg.components);

  std::vector<double> dist(static_cast<std::size_t>(n_boot));
  std::vector<Index> rx(static_cast<std::size_t>(n1)), ry(static_cast<std::size_t>(n2));
  for (Index b = 0; b < n_boot; ++b) {
    Engine eng = derive_stream(seed, {static_cast<std::uint64_t>(b)});
    std::uniform_int_distribution<Index> px(0, n1 - 1), py(n1, n1 + n2 - 1);
    for (auto& i : rx) i = px(eng);
    for (auto& i : ry) i = py(eng);
    SpanEigen ex = span.decompose(rx, rank, fpca.recenter());
    SpanEigen ey = span.decompose(ry, rank, fpca.recenter());
    align_to(ex, fpca.x_full().vectors);
    align_to(ey, fpca.x_full().vectors);
    const Vector db = values ? target_difference(fpca, ex, ey, target)
                             : eigenfunction_gap(ex, ey, target.cfg.components);
    dist[static_cast<std::size_t>(b)] = (db - d0).squaredNorm();
  }

  TestResult r;
  r.test = "bootstrap";
  r.q = d0.size();
  r.alpha = alpha;
  r.k_first = r.k_last = fpca.n();
  r.statistic = d0.squaredNorm();
  const auto exceed = std::count_if(dist.begin(), dist.end(), [&](double v) { return v >= r.statistic; });
  const double p = static_cast<double>(exceed) / static_cast<double>(n_boot);
  r.p_bracket = {p, p};
  if (alpha >= 1.0) {
    r.critical_value = -std::numeric_limits<double>::infinity();
    r.reject = true;
    return r;
  }
  std::sort(dist.begin(), dist.end());
  // Smallest order statistic with empirical CDF >= 1 - alpha.
  const auto idx = static_cast<std::size_t>(
      std::max<double>(0.0, std::ceil((1.0 - alpha) * static_cast<double>(n_boot) - 1e-9) - 1.0));
  r.critical_value = dist[std::min(idx, dist.size() - 1)];
  r.reject = r.statistic > r.critical_value;
  return r;
}

TestResult iid_bootstrap_test(const SamplePair& pair, const EigenTarget& target, Index n_boot,
                              std::uint64_t seed, double alpha) {
  return iid_bootstrap_test(RecursiveFpca(pair, required_rank(target)), target, n_boot, seed, alpha);
}

}  // namespace snfts
