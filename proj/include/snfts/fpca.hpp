#pragma once

#include <vector>

#include "snfts/funcgrid.hpp"

namespace snfts {

/// Discretized covariance kernel C(t,s) on a grid.
class CovOperator {
 public:
  /// Throws DimensionError on shape mismatch and InvalidArgument when the
  /// kernel is not symmetric within 1e-12 (relative to its largest entry).
  CovOperator(Matrix kernel, Grid grid, Index m);

  const Matrix& kernel() const noexcept { return kernel_; }
  const Grid& grid() const noexcept { return grid_; }
  Index m() const noexcept { return m_; }

  /// Integral of C(t,t).
  double trace() const { return kernel_.diagonal().dot(grid_.weights()); }

 private:
  Matrix kernel_;
  Grid grid_;
  Index m_;
};

/// Leading eigenpairs of a covariance operator, eigenvalues descending and
/// eigenfunctions (rows of `functions`) orthonormal in the quadrature inner product.
struct EigenSystem {
  Vector values;
  Matrix functions;  // K x G
  Grid grid;
  /// Set when two retained eigenvalues coincide to relative 1e-12.
  bool ties = false;
  /// Per-function flag set by align_signs when the reference inner product is zero.
  std::vector<bool> sign_degenerate;

  Index size() const noexcept { return values.size(); }
};

/// (1/m) sum_{i<m} X_i(t) X_i(s) over the first m curves.
CovOperator empirical_cov(const FunctionalSample& s, Index m);
/// (N1 C_X + N2 C_Y) / (N1 + N2).
CovOperator pooled_cov(const SamplePair& pair);

/// Top-k eigenpairs, solved in the weight-symmetrized form W^{1/2} K W^{1/2}.
EigenSystem eigen(const CovOperator& c, Index k_max);

/// Flips each function so that its inner product with the same-index
/// reference function is non-negative.
EigenSystem align_signs(const EigenSystem& e, const EigenSystem& reference);

/// N x K matrix of scores <X_i, phi_j>.
Matrix scores(const FunctionalSample& s, const EigenSystem& e);

/// Smallest J <= j_max whose cumulative share of the first j_max eigenvalues
/// strictly exceeds `threshold`.
Index select_k(const Vector& pooled_values, double threshold, Index j_max = 20);

}  // namespace snfts
