#include "snfts/fpca.hpp"

#include <cmath>

namespace snfts {

CovOperator::CovOperator(Matrix kernel, Grid grid, Index m)
    : kernel_(std::move(kernel)), grid_(std::move(grid)), m_(m) {
  if (kernel_.rows() != grid_.size() || kernel_.cols() != grid_.size())
    throw DimensionError("CovOperator: kernel does not match grid");
  const double scale = std::max(1.0, kernel_.cwiseAbs().maxCoeff());
  if ((kernel_ - kernel_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("CovOperator: kernel is not symmetric");
}

CovOperator empirical_cov(const FunctionalSample& s, Index m) {
  if (m < 2) throw InvalidArgument("empirical_cov: subsample size must be at least 2");
  if (m > s.n()) throw InvalidArgument("empirical_cov: subsample size exceeds sample size");
  const auto x = s.values().topRows(m);
  Matrix k = Matrix::Zero(s.grid_size(), s.grid_size());
  k.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(m));
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return CovOperator(std::move(k), s.grid(), m);
}

CovOperator pooled_cov(const SamplePair& pair) {
  const double n = static_cast<double>(pair.n());
  const auto cx = empirical_cov(pair.x(), pair.n1());
  const auto cy = empirical_cov(pair.y(), pair.n2());
  Matrix k = (static_cast<double>(pair.n1()) * cx.kernel() + static_cast<double>(pair.n2()) * cy.kernel()) / n;
  return CovOperator(std::move(k), pair.grid(), pair.n());
}

EigenSystem eigen(const CovOperator& c, Index k_max) {
  const Index g = c.grid().size();
  if (k_max < 1 || k_max > g) throw InvalidArgument("eigen: k_max must lie in [1, G]");
  const Vector sw = c.grid().weights().cwiseSqrt();
  const Matrix sym = sw.asDiagonal() * c.kernel() * sw.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw Error("eigen: eigensolver did not converge");

  EigenSystem out{Vector(k_max), Matrix(k_max, g), c.grid(), false, std::vector<bool>(k_max, false)};
  const Vector inv_sw = sw.cwiseInverse();
  for (Index j = 0; j < k_max; ++j) {
    const Index src = g - 1 - j;  // solver sorts ascending
    out.values(j) = solver.eigenvalues()(src);
    out.functions.row(j) = (inv_sw.asDiagonal() * solver.eigenvectors().col(src)).transpose();
  }
  const double top = std::abs(out.values(0));
  for (Index j = 1; j < k_max; ++j)
    if (top > 0.0 && std::abs(out.values(j - 1) - out.values(j)) <= 1e-12 * top) out.ties = true;
  return out;
}

EigenSystem align_signs(const EigenSystem& e, const EigenSystem& reference) {
  if (!(e.grid == reference.grid)) throw DimensionError("align_signs: grids differ");
  if (e.size() > reference.size()) throw DimensionError("align_signs: reference has fewer functions");
  EigenSystem out = e;
  out.sign_degenerate.assign(static_cast<std::size_t>(e.size()), false);
  for (Index j = 0; j < e.size(); ++j) {
    const double ip = inner_product(e.functions.row(j), reference.functions.row(j), e.grid);
    if (ip < 0.0)
      out.functions.row(j) *= -1.0;
    else if (ip == 0.0)
      out.sign_degenerate[static_cast<std::size_t>(j)] = true;
  }
  return out;
}

Matrix scores(const FunctionalSample& s, const EigenSystem& e) {
  if (!(s.grid() == e.grid)) throw DimensionError("scores: grids differ");
  return s.values() * e.grid.weights().asDiagonal() * e.functions.transpose();
}

Index select_k(const Vector& pooled_values, double threshold, Index j_max) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("select_k: threshold must lie in (0,1)");
  if (j_max < 1 || pooled_values.size() < j_max)
    throw InvalidArgument("select_k: need at least j_max eigenvalues");
  const double total = pooled_values.head(j_max).sum();
  if (!(total > 0.0)) throw InvalidArgument("select_k: eigenvalues sum to zero");
  double cum = 0.0;
  for (Index j = 0; j < j_max; ++j) {
    cum += pooled_values(j);
    if (cum / total > threshold) return j + 1;
  }
  return j_max;
}

}  // namespace snfts
