#pragma once

#include <string>
#include <utility>
#include <vector>

#include "snfts/nulldist.hpp"
#include "snfts/recursive.hpp"

namespace snfts {

/// Basis families for the eigenfunction test, built from pooled eigenfunctions.
///   nu        (phi^{j+1}, ..., phi^p)
///   nu_tilde  phi^1..phi^p without phi^j
///   nu_star   phi^i + phi^j for every i != j
///   nu_star2  phi^i + phi^j for i > j
enum class BasisVariant { nu, nu_tilde, nu_star, nu_star2 };

std::string to_string(BasisVariant v);
BasisVariant parse_basis_variant(const std::string& s);

struct TestConfig {
  Index K = 1;                       // covariance test: projection dimension
  std::vector<Index> components{1};  // eigen tests: 1-based components, tested jointly
  Index p = 4;                       // eigenfunction test: pooled functions in the basis
  BasisVariant basis = BasisVariant::nu_star;
  double epsilon = 0.0;
  double alpha = 0.05;
};

/// Outcome of one test. `p_bracket` is the p-value interval implied by the
/// tabulated levels, e.g. [0.025, 0.05].
struct TestResult {
  std::string test;
  double statistic = 0.0;
  Index q = 0;
  double epsilon = 0.0;
  double alpha = 0.05;
  double critical_value = 0.0;
  std::pair<double, double> p_bracket{0.0, 1.0};
  bool reject = false;
  double condition_number = 0.0;
  Index k_first = 0;
  Index k_last = 0;
};

/// One line, fixed field order.
std::string format_result(const TestResult& r);

/// Self-normalizer N^{-2} sum_k k^2 (v_k - v_N)(v_k - v_N)' over the track
/// entries with k >= floor(N eps).
struct SnMatrix {
  Matrix v;
  double condition_number = 0.0;
  Index k_first = 0;
  Index k_last = 0;
};

/// Throws DegenerateNormalizer when the condition number exceeds 1e12.
SnMatrix sn_matrix(const RecursiveTrack& track, double epsilon = 0.0);

/// N (v_N - center)' V^{-1} (v_N - center).
double sn_quadratic_form(const RecursiveTrack& track, const SnMatrix& v, const Vector& center);

/// Critical value and p-value bracket from a tabulated null. alpha = 1
/// gives -inf; other levels must lie inside the tabulated range.
void calibrate(TestResult& r, const QuantileTable& table);

/// Bins between consecutive standard levels: [0.1,1], [0.05,0.1], ...,
/// [0,0.005].
std::pair<double, double> p_bracket(const QuantileTable& table, double statistic);

/// Coefficients (p x B) of a basis in terms of the first p pooled eigenfunctions.
Matrix basis_weights(BasisVariant variant, Index j, Index p);
/// Basis functions (B x G) on the grid.
Matrix build_basis(const EigenSystem& pooled, BasisVariant variant, Index j, Index p);

/// Stacked eigenfunction blocks for cfg.components; with several components
/// blocks that come out empty (e.g. nu at j = p) are skipped.
std::vector<ProjectionBlock> projection_blocks(const TestConfig& cfg);

/// Number of pooled eigenpairs a test needs.
Index required_rank(TrackMode mode, const TestConfig& cfg);

RecursiveTrack recursive_track(const RecursiveFpca& fpca, const TestConfig& cfg, TrackMode mode);
RecursiveTrack recursive_track(const SamplePair& pair, const TestConfig& cfg, TrackMode mode);

/// G1: covariance operators projected on K pooled eigenfunctions, vs W_d(0), d = K(K+1)/2.
TestResult test_cov_operator(const RecursiveFpca& fpca, const TestConfig& cfg,
                             QuantileCache& cache = QuantileCache::shared());
/// G2: eigenvalue differences, vs W_M(eps).
TestResult test_eigenvalues(const RecursiveFpca& fpca, const TestConfig& cfg,
                            QuantileCache& cache = QuantileCache::shared());
/// Eigenvalue ratios centered at one, vs W_M(eps).
TestResult test_eigenvalue_ratios(const RecursiveFpca& fpca, const TestConfig& cfg,
                                  QuantileCache& cache = QuantileCache::shared());
/// G3: eigenfunction differences projected on the configured basis, vs W_M0(eps).
TestResult test_eigenfunctions(const RecursiveFpca& fpca, const TestConfig& cfg,
                               QuantileCache& cache = QuantileCache::shared());

TestResult test_cov_operator(const SamplePair& pair, const TestConfig& cfg,
                             QuantileCache& cache = QuantileCache::shared());
TestResult test_eigenvalues(const SamplePair& pair, const TestConfig& cfg,
                            QuantileCache& cache = QuantileCache::shared());
TestResult test_eigenvalue_ratios(const SamplePair& pair, const TestConfig& cfg,
                                  QuantileCache& cache = QuantileCache::shared());
TestResult test_eigenfunctions(const SamplePair& pair, const TestConfig& cfg,
                               QuantileCache& cache = QuantileCache::shared());

/// Self-normalized test of zero lag-0 cross-correlation between two scalar
/// series, from recursive Pearson correlations. A perfectly correlated pair
/// (zero normalizer, nonzero correlation) gives +inf.
TestResult lag0_crosscorr_sn(const Vector& x, const Vector& y, double alpha = 0.05,
                             QuantileCache& cache = QuantileCache::shared());

}  // namespace snfts
