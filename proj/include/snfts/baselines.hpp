#pragma once

#include <cstdint>

#include "snfts/sntest.hpp"

namespace snfts {

/// Nonoverlapping-block layout for the subsampling test.
struct SubsampleConfig {
  Index l = 8;
  bool drop_partial = true;  // a trailing partial block is ignored
};

/// Bartlett-kernel LRV; Andrews' AR(1) plug-in bandwidth unless `andrews` is off.
struct LrvConfig {
  bool andrews = true;
  double bandwidth = 0.0;
};

/// Eigencomponent compared by the subsampling and bootstrap tests: the
/// eigenvalues in cfg.components, or the eigenfunctions in cfg.components
/// (projected on cfg.basis for subsampling, L2 distance for the bootstrap).
struct EigenTarget {
  enum class Kind { eigenvalues, eigenfunctions };
  Kind kind = Kind::eigenvalues;
  TestConfig cfg{};
};

/// Chi-square calibrated covariance test for independent Gaussian samples.
TestResult pkm_test(const RecursiveFpca& fpca, Index K, double alpha = 0.05);
TestResult pkm_test(const SamplePair& pair, Index K, double alpha = 0.05);

/// Sigma = Gamma_0 + sum_{h <= floor(b)} (1 - h/(b+1)) (Gamma_h + Gamma_h'),
/// autocovariances of the column-demeaned T x d series divided by T.
Matrix bartlett_lrv(const Matrix& series, double bandwidth);

struct Bandwidth {
  double value = 0.0;
  bool clipped = false;  // some AR(1) coefficient had |rho| >= 0.999
};

/// 1.1447 (alpha(1) T)^{1/3} from per-column AR(1) fits with equal weights,
/// capped at T - 1.
Bandwidth andrews_bandwidth(const Matrix& series);

/// Covariance test normalized by a Bartlett LRV of the per-observation
/// projection summands, vs chi-square with K(K+1)/2 degrees of freedom.
TestResult clrv_test(const RecursiveFpca& fpca, Index K, const LrvConfig& lrv = {}, double alpha = 0.05);
TestResult clrv_test(const SamplePair& pair, Index K, const LrvConfig& lrv = {}, double alpha = 0.05);

/// Target difference (X minus Y) from two eigendecompositions in span coordinates.
Vector target_difference(const RecursiveFpca& fpca, const SpanEigen& x, const SpanEigen& y,
                         const EigenTarget& target);

/// N0 d' S^+ d with S the block-subsampling covariance, vs chi-square(dim).
/// Requires equal sample sizes.
TestResult subsampling_test(const RecursiveFpca& fpca, const EigenTarget& target, const SubsampleConfig& sub,
                            double alpha = 0.05);
TestResult subsampling_test(const SamplePair& pair, const EigenTarget& target, const SubsampleConfig& sub,
                            double alpha = 0.05);

/// Benko-style i.i.d. bootstrap: curves resampled within each sample, the
/// squared distance of the observed difference compared with the (1 - alpha)
/// quantile of the squared distance of the centered bootstrap differences.
TestResult iid_bootstrap_test(const RecursiveFpca& fpca, const EigenTarget& target, Index n_boot,
                              std::uint64_t seed, double alpha = 0.05);
TestResult iid_bootstrap_test(const SamplePair& pair, const EigenTarget& target, Index n_boot,
                              std::uint64_t seed, double alpha = 0.05);

/// Rank needed by a baseline target.
Index required_rank(const EigenTarget& target);

}  // namespace snfts
