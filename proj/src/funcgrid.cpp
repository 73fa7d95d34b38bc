#include "snfts/funcgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace snfts {

namespace {

constexpr double kWeightSumTol = 1e-12;

bool lex_less(const Matrix& p, Index a, Index b) {
  for (Index d = 0; d < p.cols(); ++d) {
    if (p(a, d) < p(b, d)) return true;
    if (p(a, d) > p(b, d)) return false;
  }
  return false;
}

}  // namespace

Grid::Grid(Matrix points, Vector weights) : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() != weights_.size())
    throw DimensionError("Grid: points and weights differ in length");
  if (points_.rows() < 1) throw DimensionError("Grid: empty grid");
  if (points_.cols() != 1 && points_.cols() != 2)
    throw DimensionError("Grid: only 1-D and 2-D domains are supported");
  if (!points_.allFinite() || !weights_.allFinite())
    throw InvalidArgument("Grid: non-finite point or weight");
  if ((weights_.array() <= 0.0).any()) throw InvalidArgument("Grid: weights must be positive");
  const double tol = std::max(kWeightSumTol, 4.0 * static_cast<double>(weights_.size()) *
                                                  std::numeric_limits<double>::epsilon());
  if (std::abs(weights_.sum() - 1.0) > tol)
    throw InvalidArgument("Grid: weights must sum to the domain measure 1");
  for (Index i = 1; i < points_.rows(); ++i)
    if (!lex_less(points_, i - 1, i)) throw InvalidArgument("Grid: points must be strictly increasing");
}

Grid Grid::uniform(Index n) {
  if (n < 1) throw InvalidArgument("Grid::uniform: n must be positive");
  Matrix p(n, 1);
  for (Index i = 0; i < n; ++i) p(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return Grid(std::move(p), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

Grid Grid::trapezoid(Index n) {
  if (n < 2) throw InvalidArgument("Grid::trapezoid: n must be at least 2");
  Matrix p(n, 1);
  Vector w(n);
  const double h = 1.0 / static_cast<double>(n - 1);
  for (Index i = 0; i < n; ++i) {
    p(i, 0) = static_cast<double>(i) * h;
    w(i) = (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
  p(n - 1, 0) = 1.0;
  return Grid(std::move(p), std::move(w));
}

Grid Grid::product(const Grid& rows, const Grid& cols) {
  if (rows.dim() != 1 || cols.dim() != 1) throw DimensionError("Grid::product: needs two 1-D grids");
  const Index nr = rows.size(), nc = cols.size();
  Matrix p(nr * nc, 2);
  Vector w(nr * nc);
  for (Index i = 0; i < nr; ++i)
    for (Index j = 0; j < nc; ++j) {
      p(i * nc + j, 0) = rows.points()(i, 0);
      p(i * nc + j, 1) = cols.points()(j, 0);
      w(i * nc + j) = rows.weights()(i) * cols.weights()(j);
    }
  // Products of weights need not sum to 1 to the last ulp.
  w /= w.sum();
  return Grid(std::move(p), std::move(w));
}

FunctionalSample::FunctionalSample(Matrix values, Grid grid, std::string label, SampleMetadata meta)
    : values_(std::move(values)), grid_(std::move(grid)), label_(std::move(label)), meta_(meta) {
  if (values_.cols() != grid_.size())
    throw DimensionError("FunctionalSample: row length " + std::to_string(values_.cols()) +
                         " does not match grid size " + std::to_string(grid_.size()));
  if (values_.rows() < 2) throw InvalidArgument("FunctionalSample: need at least 2 curves");
  if (!values_.allFinite()) throw InvalidArgument("FunctionalSample: non-finite value");
}

FunctionalSample FunctionalSample::head(Index count) const {
  return FunctionalSample(values_.topRows(count), grid_, label_, meta_);
}

FunctionalSample FunctionalSample::scaled(double c) const {
  return FunctionalSample(values_ * c, grid_, label_, meta_);
}

SamplePair::SamplePair(FunctionalSample x, FunctionalSample y) : x_(std::move(x)), y_(std::move(y)) {
  if (!(x_.grid() == y_.grid())) throw DimensionError("SamplePair: samples are on different grids");
  gamma1_ = static_cast<double>(x_.n()) / static_cast<double>(x_.n() + y_.n());
}

Vector bspline_basis(double t, Index n_basis, int order, double lo, double hi) {
  const Index n_knots = n_basis + order;
  const Index n_interior = n_basis - order;
  Vector knots(n_knots);
  for (Index i = 0; i < order; ++i) {
    knots(i) = lo;
    knots(n_knots - 1 - i) = hi;
  }
  for (Index i = 1; i <= n_interior; ++i)
    knots(order - 1 + i) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_interior + 1);

  // Cox-de Boor, starting from order-1 indicator functions.
  Vector b = Vector::Zero(n_knots - 1);
  if (t >= hi) {
    b(n_basis - 1) = 1.0;  // right end belongs to the last non-degenerate span
  } else {
    for (Index i = 0; i < n_knots - 1; ++i)
      if (knots(i) <= t && t < knots(i + 1)) b(i) = 1.0;
  }
  for (int k = 2; k <= order; ++k) {
    Vector next = Vector::Zero(n_knots - k);
    for (Index i = 0; i < n_knots - k; ++i) {
      double v = 0.0;
      const double d1 = knots(i + k - 1) - knots(i);
      const double d2 = knots(i + k) - knots(i + 1);
      if (d1 > 0.0) v += (t - knots(i)) / d1 * b(i);
      if (d2 > 0.0) v += (knots(i + k) - t) / d2 * b(i + 1);
      next(i) = v;
    }
    b = std::move(next);
  }
  return b.head(n_basis);
}

BsplineSmoother::BsplineSmoother(const Grid& grid, Index n_basis, int order) : grid_(grid) {
  if (grid.dim() != 1) throw DimensionError("bspline_smooth: only curves on 1-D grids are supported");
  if (order < 1) throw InvalidArgument("bspline_smooth: order must be positive");
  if (n_basis < order) throw InvalidArgument("bspline_smooth: n_basis must be at least the order");
  const Index p = grid.size();
  if (n_basis > p) throw InvalidArgument("bspline_smooth: underdetermined (n_basis > number of points)");
  const double lo = std::min(0.0, grid.points().col(0).minCoeff());
  const double hi = std::max(1.0, grid.points().col(0).maxCoeff());
  design_.resize(p, n_basis);
  for (Index i = 0; i < p; ++i) design_.row(i) = bspline_basis(grid.points()(i, 0), n_basis, order, lo, hi);
  Eigen::ColPivHouseholderQR<Matrix> qr(design_);
  if (qr.rank() < n_basis)
    throw InvalidArgument("bspline_smooth: underdetermined (design matrix is rank deficient)");
  Eigen::HouseholderQR<Matrix> hqr(design_);
  q_ = hqr.householderQ() * Matrix::Identity(p, n_basis);
}

Matrix BsplineSmoother::apply(const Matrix& raw) const {
  if (raw.cols() != design_.rows()) throw DimensionError("bspline_smooth: raw width does not match grid");
  return (raw * q_) * q_.transpose();
}

FunctionalSample BsplineSmoother::apply(const FunctionalSample& raw) const {
  if (!(raw.grid() == grid_)) throw DimensionError("bspline_smooth: sample is on a different grid");
  return FunctionalSample(apply(raw.values()), raw.grid(), raw.label(), raw.metadata());
}

FunctionalSample bspline_smooth(const FunctionalSample& raw, Index n_basis, int order) {
  return BsplineSmoother(raw.grid(), n_basis, order).apply(raw);
}

std::pair<FunctionalSample, Vector> center(const FunctionalSample& s) {
  Vector mean = s.values().colwise().mean().transpose();
  Matrix centered = s.values().rowwise() - mean.transpose();
  return {FunctionalSample(std::move(centered), s.grid(), s.label(), s.metadata()), std::move(mean)};
}

FunctionalSample seasonal_demean(const FunctionalSample& s, Index period) {
  if (period < 1) throw InvalidArgument("seasonal_demean: period must be positive");
  if (period >= s.n() || s.n() < 2 * period)
    throw InvalidArgument("seasonal_demean: need at least two full periods");
  Matrix out = s.values();
  for (Index r = 0; r < period; ++r) {
    RowVector mean = RowVector::Zero(s.grid_size());
    Index count = 0;
    for (Index i = r; i < s.n(); i += period, ++count) mean += s.values().row(i);
    mean /= static_cast<double>(count);
    for (Index i = r; i < s.n(); i += period) out.row(i) -= mean;
  }
  return FunctionalSample(std::move(out), s.grid(), s.label(), s.metadata());
}

}  // namespace snfts
