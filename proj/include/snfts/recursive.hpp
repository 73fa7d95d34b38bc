#pragma once

#include <memory>
#include <span>
#include <vector>

#include "snfts/fpca.hpp"

namespace snfts {

enum class TrackMode { cov_projection, eigval_diff, eigval_ratio, eigfun_projection };

/// Recursive estimates indexed by the pooled index k; column c of `vectors`
/// belongs to k[c]. The last column is the full-sample estimate (k = N).
struct RecursiveTrack {
  std::vector<Index> k;
  Matrix vectors;  // dim x count
  TrackMode mode = TrackMode::cov_projection;
  Index n = 0;

  Index dim() const noexcept { return vectors.rows(); }
  Index count() const noexcept { return vectors.cols(); }
  Vector last() const { return vectors.col(vectors.cols() - 1); }
};

/// Eigenpairs of the covariance of some pooled curves, expressed in the
/// orthonormal span coordinates of a CurveSpan.
struct SpanEigen {
  Vector values;   // descending
  Matrix vectors;  // r x k; column j holds the coordinates of phi_j
};

/// Orthonormal coordinates of the pooled curves Z = [X; Y] within their span.
///
/// Any covariance operator built from pooled curves acts inside the span, so
/// its eigenpairs follow from an r x r matrix, r = rank of the curves. Inner
/// products of functions in the span are dot products of their coordinates.
class CurveSpan {
 public:
  explicit CurveSpan(const SamplePair& pair);

  /// N x r; row i holds the coordinates of pooled curve i (X rows first).
  const Matrix& coords() const noexcept { return coords_; }
  Index n1() const noexcept { return n1_; }
  Index n() const noexcept { return coords_.rows(); }
  Index r() const noexcept { return coords_.cols(); }
  const Grid& grid() const noexcept { return grid_; }

  /// Covariance (1/m) sum over the listed curves (repeats allowed); with
  /// `center` the curves are first centered at their own mean.
  Matrix covariance(std::span<const Index> rows, bool center = false) const;
  SpanEigen decompose(std::span<const Index> rows, Index k_max, bool center = false) const;
  SpanEigen decompose_range(Index first, Index count, Index k_max, bool center = false) const;

  /// Grid evaluations (k x G) of functions given by coordinates (r x k).
  Matrix evaluate(const Matrix& coordinates) const;
  EigenSystem materialize(const SpanEigen& e) const;

  /// Eigenpairs of an r x r covariance in span coordinates.
  SpanEigen eigen_of(const Matrix& cov, Index k_max) const;

 private:

  Matrix coords_;
  Matrix basis_;  // r x G, quadrature-orthonormal rows
  Grid grid_;
  Index n1_;
};

/// Flips each eigenvector so its coordinate dot product with the matching
/// reference column is non-negative.
void align_to(SpanEigen& e, const Matrix& reference);

/// Block of an eigenfunction projection vector: differences of the
/// `component`-th recursive eigenfunctions projected on combinations of the
/// pooled eigenfunctions (columns of `weights`, p x B).
struct ProjectionBlock {
  Index component = 1;  // 1-based
  Matrix weights;
};

/// Pooled and recursive FPCA of a sample pair, shared by every recursive
/// statistic. Prefix eigendecompositions are computed once, on first use.
class RecursiveFpca {
 public:
  /// `rank` is the number of pooled and recursive eigenpairs retained;
  /// 0 keeps one per dimension of the curve span. With `recenter` every
  /// sample and subsample covariance is taken about its own mean; the pooled
  /// covariance is then the size-weighted average of the two sample ones.
  RecursiveFpca(const SamplePair& pair, Index rank, bool recenter = true);

  Index n1() const noexcept { return span_->n1(); }
  Index n2() const noexcept { return span_->n() - span_->n1(); }
  Index n() const noexcept { return span_->n(); }
  Index rank() const noexcept { return rank_; }
  bool recenter() const noexcept { return recenter_; }
  const CurveSpan& span() const noexcept { return *span_; }

  /// Pooled eigenpairs, signs aligned to the full first-sample eigenfunctions.
  const SpanEigen& pooled() const noexcept { return pooled_; }
  /// Full first-sample eigenpairs (the alignment reference).
  const SpanEigen& x_full() const noexcept { return x_full_; }
  /// Nonzero spectrum of the pooled operator (r values, descending).
  const Vector& pooled_spectrum() const noexcept { return pooled_spectrum_; }
  /// Curve scores against the pooled eigenfunctions (N x rank).
  const Matrix& pooled_scores() const noexcept { return pooled_scores_; }

  /// Copy with pooled eigenfunction j multiplied by signs[j].
  RecursiveFpca with_pooled_signs(std::span<const int> signs) const;

  Index subsample_x(Index k) const noexcept { return k * n1() / n(); }
  Index subsample_y(Index k) const noexcept { return k * n2() / n(); }
  /// Smallest k whose subsample sizes are both >= floor.
  Index first_index(Index floor) const;
  /// Smallest subsample size whose covariance determines eigenpair `component`.
  Index component_floor(Index component) const;

  /// alpha_k = vech of the K x K projected covariance difference.
  RecursiveTrack cov_projection(Index K) const;
  /// theta_k: differences of the listed eigenvalues (1-based components).
  RecursiveTrack eigval_diff(std::span<const Index> components) const;
  /// zeta_k: ratios of the listed eigenvalues.
  RecursiveTrack eigval_ratio(std::span<const Index> components) const;
  /// eta_k: stacked eigenfunction-difference projections.
  RecursiveTrack eigfun_projection(std::span<const ProjectionBlock> blocks) const;

  /// Prefix eigendecompositions, signs aligned to x_full. Sizes 2..N1 / 2..N2.
  const SpanEigen& x_prefix(Index m) const;
  const SpanEigen& y_prefix(Index m) const;

 private:
  struct PrefixCache;
  void ensure_prefixes() const;

  std::shared_ptr<const CurveSpan> span_;
  Index rank_;
  bool recenter_;
  SpanEigen pooled_;
  SpanEigen x_full_;
  Vector pooled_spectrum_;
  Matrix pooled_scores_;
  std::shared_ptr<PrefixCache> prefixes_;
};

/// vech: lower triangle stacked column by column.
template <typename Derived>
Vector vech(const Eigen::MatrixBase<Derived>& a) {
  const Index k = a.rows();
  Vector out(k * (k + 1) / 2);
  Index pos = 0;
  for (Index c = 0; c < k; ++c)
    for (Index r = c; r < k; ++r) out(pos++) = a(r, c);
  return out;
}

}  // namespace snfts
