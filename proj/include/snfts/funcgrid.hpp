#pragma once

#include <string>
#include <utility>

#include "snfts/error.hpp"
#include "snfts/types.hpp"

namespace snfts {

/// Quadrature grid on [0,1] or [0,1]^2.
///
/// Points are stored one per row (G x dim). Two-dimensional grids are
/// flattened row-major, so downstream code only ever sees (points, weights).
class Grid {
 public:
  /// Validates: weights > 0 summing to 1, points strictly increasing
  /// (lexicographically for 2-D).
  Grid(Matrix points, Vector weights);

  /// Midpoint rule: points (i + 1/2)/n, weights 1/n.
  static Grid uniform(Index n);
  /// Trapezoid rule on i/(n-1).
  static Grid trapezoid(Index n);
  /// Row-major tensor product of two 1-D grids with product weights.
  static Grid product(const Grid& rows, const Grid& cols);

  Index size() const noexcept { return weights_.size(); }
  int dim() const noexcept { return static_cast<int>(points_.cols()); }
  const Matrix& points() const noexcept { return points_; }
  const Vector& weights() const noexcept { return weights_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
           a.points_ == b.points_ && a.weights_ == b.weights_;
  }

 private:
  Matrix points_;
  Vector weights_;
};

/// Quadrature inner product sum_t f(t) g(t) w(t).
template <typename DerivedF, typename DerivedG, typename DerivedW>
double inner_product(const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedG>& g,
                     const Eigen::MatrixBase<DerivedW>& weights) {
  if (f.size() != weights.size() || g.size() != weights.size())
    throw DimensionError("inner_product: function length does not match grid");
  double acc = 0.0;
  for (Index t = 0; t < weights.size(); ++t)
    acc += f.derived().coeff(t) * g.derived().coeff(t) * weights.derived().coeff(t);
  return acc;
}

template <typename DerivedF, typename DerivedG>
double inner_product(const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedG>& g,
                     const Grid& grid) {
  return inner_product(f, g, grid.weights());
}

struct SampleMetadata {
  /// Set when weights were not present in the source file and 1/G was assumed.
  bool weights_inferred = false;
};

/// N curves evaluated on a shared grid; row i is curve i.
class FunctionalSample {
 public:
  FunctionalSample(Matrix values, Grid grid, std::string label = {}, SampleMetadata meta = {});

  Index n() const noexcept { return values_.rows(); }
  Index grid_size() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const Grid& grid() const noexcept { return grid_; }
  const std::string& label() const noexcept { return label_; }
  const SampleMetadata& metadata() const noexcept { return meta_; }

  /// Curves [first, first + count).
  FunctionalSample head(Index count) const;
  FunctionalSample scaled(double c) const;

 private:
  Matrix values_;
  Grid grid_;
  std::string label_;
  SampleMetadata meta_;
};

/// Two samples on a common grid with their pooled proportions.
class SamplePair {
 public:
  SamplePair(FunctionalSample x, FunctionalSample y);

  const FunctionalSample& x() const noexcept { return x_; }
  const FunctionalSample& y() const noexcept { return y_; }
  Index n1() const noexcept { return x_.n(); }
  Index n2() const noexcept { return y_.n(); }
  Index n() const noexcept { return x_.n() + y_.n(); }
  double gamma1() const noexcept { return gamma1_; }
  double gamma2() const noexcept { return 1.0 - gamma1_; }
  const Grid& grid() const noexcept { return x_.grid(); }

 private:
  FunctionalSample x_;
  FunctionalSample y_;
  double gamma1_;
};

/// Least-squares projection of every curve onto a clamped B-spline basis,
/// re-evaluated on the sample's own grid. The projector is built once and
/// can be applied to any sample on the same grid.
class BsplineSmoother {
 public:
  BsplineSmoother(const Grid& grid, Index n_basis, int order = 4);

  FunctionalSample apply(const FunctionalSample& raw) const;
  Matrix apply(const Matrix& raw) const;
  /// P x n_basis design matrix of basis evaluations.
  const Matrix& design() const noexcept { return design_; }
  Index n_basis() const noexcept { return design_.cols(); }

 private:
  Grid grid_;
  Matrix design_;
  Matrix q_;  // orthonormal basis of the design's column space (P x n_basis)
};

/// Evaluates the `n_basis` clamped B-splines of the given order on [lo, hi] at t.
Vector bspline_basis(double t, Index n_basis, int order, double lo = 0.0, double hi = 1.0);

FunctionalSample bspline_smooth(const FunctionalSample& raw, Index n_basis, int order = 4);

/// Subtracts the pointwise mean. Returns the centered sample and the mean curve.
std::pair<FunctionalSample, Vector> center(const FunctionalSample& s);

/// Removes the mean of each phase i mod period.
FunctionalSample seasonal_demean(const FunctionalSample& s, Index period);

}  // namespace snfts
