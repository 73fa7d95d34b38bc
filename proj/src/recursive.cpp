#include "snfts/recursive.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

namespace snfts {

namespace {

// Gram eigenvalues below this fraction of the largest carry only rounding noise.
constexpr double kSpanRankTol = 1e-13;

}  // namespace

CurveSpan::CurveSpan(const SamplePair& pair) : grid_(pair.grid()), n1_(pair.n1()) {
  const Index n = pair.n();
  Matrix z(n, pair.grid().size());
  z << pair.x().values(), pair.y().values();
  const Vector sw = grid_.weights().cwiseSqrt();
  const Matrix a = z * sw.asDiagonal();
  Matrix gram = Matrix::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success) throw Error("CurveSpan: eigensolver did not converge");
  const Vector& lam = solver.eigenvalues();  // ascending
  const double top = lam(n - 1);
  Index r = 0;
  while (r < n && lam(n - 1 - r) > kSpanRankTol * top) ++r;
  if (r == 0) throw InvalidArgument("CurveSpan: all curves are zero");

  basis_.resize(r, z.cols());
  for (Index a_ = 0; a_ < r; ++a_) {
    const Index src = n - 1 - a_;
    basis_.row(a_) = (solver.eigenvectors().col(src).transpose() * z) / std::sqrt(lam(src));
  }
  // Projected one curve at a time so that equal curves get bitwise equal coordinates.
  coords_.resize(n, r);
  const Matrix wb = basis_ * grid_.weights().asDiagonal();
  for (Index i = 0; i < n; ++i) coords_.row(i).noalias() = (wb * z.row(i).transpose()).transpose();
}

SpanEigen CurveSpan::eigen_of(const Matrix& cov, Index k_max) const {
  const Index r = cov.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("CurveSpan: eigensolver did not converge");
  SpanEigen out{Vector::Zero(k_max), Matrix::Zero(r, k_max)};
  for (Index j = 0; j < std::min(k_max, r); ++j) {
    out.values(j) = solver.eigenvalues()(r - 1 - j);
    out.vectors.col(j) = solver.eigenvectors().col(r - 1 - j);
  }
  return out;
}

Matrix CurveSpan::covariance(std::span<const Index> rows, bool center) const {
  if (rows.empty()) throw InvalidArgument("CurveSpan::covariance: empty subset");
  Matrix cov = Matrix::Zero(r(), r());
  Vector mean = Vector::Zero(r());
  for (Index i : rows) {
    cov.selfadjointView<Eigen::Lower>().rankUpdate(coords_.row(i).transpose());
    mean += coords_.row(i).transpose();
  }
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  const auto m = static_cast<double>(rows.size());
  cov /= m;
  if (center) {
    mean /= m;
    cov -= mean * mean.transpose();
  }
  return cov;
}

SpanEigen CurveSpan::decompose(std::span<const Index> rows, Index k_max, bool center) const {
  return eigen_of(covariance(rows, center), k_max);
}

SpanEigen CurveSpan::decompose_range(Index first, Index count, Index k_max, bool center) const {
  std::vector<Index> rows(static_cast<std::size_t>(count));
  std::iota(rows.begin(), rows.end(), first);
  return decompose(rows, k_max, center);
}

Matrix CurveSpan::evaluate(const Matrix& coordinates) const { return coordinates.transpose() * basis_; }

EigenSystem CurveSpan::materialize(const SpanEigen& e) const {
  EigenSystem out{e.values, evaluate(e.vectors), grid_, false,
                  std::vector<bool>(static_cast<std::size_t>(e.values.size()), false)};
  return out;
}

void align_to(SpanEigen& e, const Matrix& reference) {
  const Index k = std::min(e.vectors.cols(), reference.cols());
  for (Index j = 0; j < k; ++j)
    if (e.vectors.col(j).dot(reference.col(j)) < 0.0) e.vectors.col(j) *= -1.0;
}

struct RecursiveFpca::PrefixCache {
  std::once_flag once;
  std::vector<SpanEigen> x;  // index m - 2
  std::vector<SpanEigen> y;
};

RecursiveFpca::RecursiveFpca(const SamplePair& pair, Index rank, bool recenter)
    : span_(std::make_shared<const CurveSpan>(pair)),
      rank_(rank),
      recenter_(recenter),
      prefixes_(std::make_shared<PrefixCache>()) {
  if (rank < 0) throw InvalidArgument("RecursiveFpca: rank must be non-negative");
  if (rank == 0) rank_ = rank = span_->r();
  if (rank > span_->r())
    throw InvalidArgument("RecursiveFpca: requested " + std::to_string(rank) +
                          " eigenpairs but the pooled curves span only " + std::to_string(span_->r()) +
                          " dimensions");
  std::vector<Index> xs(static_cast<std::size_t>(n1())), ys(static_cast<std::size_t>(n2()));
  std::iota(xs.begin(), xs.end(), Index{0});
  std::iota(ys.begin(), ys.end(), n1());
  const Matrix cx = span_->covariance(xs, recenter);
  const Matrix cy = span_->covariance(ys, recenter);
  x_full_ = span_->eigen_of(cx, rank);
  // Solver signs are arbitrary; fix each function's largest grid value to be positive.
  const Matrix f = span_->evaluate(x_full_.vectors);
  for (Index j = 0; j < rank; ++j) {
    Index at = 0;
    f.row(j).cwiseAbs().maxCoeff(&at);
    if (f(j, at) < 0.0) x_full_.vectors.col(j) *= -1.0;
  }
  const double w = static_cast<double>(n1()) / static_cast<double>(n());
  const auto all = span_->eigen_of(w * cx + (1.0 - w) * cy, span_->r());
  pooled_spectrum_ = all.values;
  pooled_ = SpanEigen{all.values.head(rank), all.vectors.leftCols(rank)};
  align_to(pooled_, x_full_.vectors);
  pooled_scores_ = span_->coords() * pooled_.vectors;
}

RecursiveFpca RecursiveFpca::with_pooled_signs(std::span<const int> signs) const {
  RecursiveFpca copy = *this;
  for (std::size_t j = 0; j < signs.size() && static_cast<Index>(j) < rank_; ++j)
    if (signs[j] < 0) copy.pooled_.vectors.col(static_cast<Index>(j)) *= -1.0;
  copy.pooled_scores_ = span_->coords() * copy.pooled_.vectors;
  return copy;
}

Index RecursiveFpca::component_floor(Index component) const {
  // A centered subsample of size m spans at most m - 1 dimensions.
  return std::max<Index>(2, component + (recenter_ ? 1 : 0));
}

Index RecursiveFpca::first_index(Index floor) const {
  if (floor > n1() || floor > n2())
    throw InvalidArgument("RecursiveFpca: subsample floor exceeds a sample size");
  for (Index k = 1; k <= n(); ++k)
    if (subsample_x(k) >= floor && subsample_y(k) >= floor) return k;
  throw InvalidArgument("RecursiveFpca: empty recursive range");
}

void RecursiveFpca::ensure_prefixes() const {
  std::call_once(prefixes_->once, [this] {
    const Index r = span_->r();
    const Matrix& z = span_->coords();
    auto build = [&](Index first, Index count, std::vector<SpanEigen>& out) {
      out.reserve(static_cast<std::size_t>(count));
      Matrix sum = Matrix::Zero(r, r);
      Vector msum = Vector::Zero(r);
      for (Index m = 1; m <= count; ++m) {
        sum.selfadjointView<Eigen::Lower>().rankUpdate(z.row(first + m - 1).transpose());
        msum += z.row(first + m - 1).transpose();
        if (m < 2) continue;
        Matrix cov = sum;
        cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
        cov /= static_cast<double>(m);
        if (recenter_) {
          const Vector mu = msum / static_cast<double>(m);
          cov -= mu * mu.transpose();
        }
        SpanEigen e = span_->eigen_of(cov, rank_);
        align_to(e, x_full_.vectors);
        out.push_back(std::move(e));
      }
    };
    build(0, n1(), prefixes_->x);
    build(n1(), n2(), prefixes_->y);
  });
}

const SpanEigen& RecursiveFpca::x_prefix(Index m) const {
  if (m < 2 || m > n1()) throw InvalidArgument("x_prefix: subsample size out of range");
  ensure_prefixes();
  return prefixes_->x[static_cast<std::size_t>(m - 2)];
}

const SpanEigen& RecursiveFpca::y_prefix(Index m) const {
  if (m < 2 || m > n2()) throw InvalidArgument("y_prefix: subsample size out of range");
  ensure_prefixes();
  return prefixes_->y[static_cast<std::size_t>(m - 2)];
}

namespace {

void check_components(std::span<const Index> components, Index rank) {
  if (components.empty()) throw InvalidArgument("recursive track: no components requested");
  for (Index c : components)
    if (c < 1 || c > rank) throw InvalidArgument("recursive track: component outside the retained rank");
}

}  // namespace

RecursiveTrack RecursiveFpca::cov_projection(Index K) const {
  if (K < 1 || K > rank_) throw InvalidArgument("cov_projection: K outside the retained rank");
  const Index d = K * (K + 1) / 2;
  const Matrix& s = pooled_scores_;

  // Running sums of vech(s_i s_i') and of s_i for each sample.
  struct Sums {
    Matrix second;
    Matrix first;
  };
  auto prefix_sums = [&](Index from, Index count) {
    Sums out{Matrix::Zero(d, count + 1), Matrix::Zero(K, count + 1)};
    Vector acc = Vector::Zero(d);
    for (Index i = 0; i < count; ++i) {
      const auto row = s.row(from + i).head(K);
      Index pos = 0;
      for (Index c = 0; c < K; ++c)
        for (Index r = c; r < K; ++r) acc(pos++) += row(r) * row(c);
      out.second.col(i + 1) = acc;
      out.first.col(i + 1) = out.first.col(i) + row.transpose();
    }
    return out;
  };
  const Sums px = prefix_sums(0, n1());
  const Sums py = prefix_sums(n1(), n2());
  auto moment = [&](const Sums& p, Index m) {
    const double dm = static_cast<double>(m);
    Vector out = p.second.col(m) / dm;
    if (recenter_) {
      const Vector mu = p.first.col(m) / dm;
      out -= vech(mu * mu.transpose());
    }
    return out;
  };

  const Index k0 = first_index(2);
  RecursiveTrack t{{}, Matrix(d, n() - k0 + 1), TrackMode::cov_projection, n()};
  for (Index k = k0; k <= n(); ++k) {
    const Index m = subsample_x(k), mp = subsample_y(k);
    t.k.push_back(k);
    t.vectors.col(k - k0) = moment(px, m) - moment(py, mp);
  }
  return t;
}

RecursiveTrack RecursiveFpca::eigval_diff(std::span<const Index> components) const {
  check_components(components, rank_);
  const Index k0 = first_index(2);
  const auto dim = static_cast<Index>(components.size());
  RecursiveTrack t{{}, Matrix(dim, n() - k0 + 1), TrackMode::eigval_diff, n()};
  for (Index k = k0; k <= n(); ++k) {
    const auto& ex = x_prefix(subsample_x(k));
    const auto& ey = y_prefix(subsample_y(k));
    t.k.push_back(k);
    for (Index c = 0; c < dim; ++c) {
      const Index j = components[static_cast<std::size_t>(c)] - 1;
      t.vectors(c, k - k0) = ex.values(j) - ey.values(j);
    }
  }
  return t;
}

RecursiveTrack RecursiveFpca::eigval_ratio(std::span<const Index> components) const {
  check_components(components, rank_);
  const Index k0 = first_index(component_floor(*std::max_element(components.begin(), components.end())));
  const auto dim = static_cast<Index>(components.size());
  RecursiveTrack t{{}, Matrix(dim, n() - k0 + 1), TrackMode::eigval_ratio, n()};
  for (Index k = k0; k <= n(); ++k) {
    const auto& ex = x_prefix(subsample_x(k));
    const auto& ey = y_prefix(subsample_y(k));
    t.k.push_back(k);
    for (Index c = 0; c < dim; ++c) {
      const Index j = components[static_cast<std::size_t>(c)] - 1;
      if (!(ey.values(j) > 1e-10 * ey.values(0)))
        throw SingularityError("eigval_ratio: second-sample eigenvalue " + std::to_string(j + 1) +
                               " vanishes at k = " + std::to_string(k));
      t.vectors(c, k - k0) = ex.values(j) / ey.values(j);
    }
  }
  return t;
}

RecursiveTrack RecursiveFpca::eigfun_projection(std::span<const ProjectionBlock> blocks) const {
  if (blocks.empty()) throw InvalidArgument("eigfun_projection: no blocks");
  Index dim = 0, top = 1;
  for (const auto& b : blocks) {
    if (b.component < 1 || b.component > rank_)
      throw InvalidArgument("eigfun_projection: component outside the retained rank");
    if (b.weights.rows() > rank_)
      throw InvalidArgument("eigfun_projection: basis uses more pooled eigenfunctions than retained");
    dim += b.weights.cols();
    top = std::max(top, b.component);
  }
  if (dim == 0) throw InvalidArgument("eigfun_projection: empty basis");
  const Index k0 = first_index(component_floor(top));
  RecursiveTrack t{{}, Matrix(dim, n() - k0 + 1), TrackMode::eigfun_projection, n()};
  for (Index k = k0; k <= n(); ++k) {
    const auto& ex = x_prefix(subsample_x(k));
    const auto& ey = y_prefix(subsample_y(k));
    t.k.push_back(k);
    Index pos = 0;
    for (const auto& b : blocks) {
      const Index j = b.component - 1;
      const Index p = b.weights.rows();
      // <phi_X^j - phi_Y^j, phi_XY^i>, i = 1..p
      const Vector proj = pooled_.vectors.leftCols(p).transpose() * (ex.vectors.col(j) - ey.vectors.col(j));
      t.vectors.col(k - k0).segment(pos, b.weights.cols()) = b.weights.transpose() * proj;
      pos += b.weights.cols();
    }
  }
  return t;
}

}  // namespace snfts
