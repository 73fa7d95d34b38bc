#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "snfts/types.hpp"

namespace snfts {

/// Upper quantile levels tabulated for every null distribution.
inline constexpr std::array<double, 5> kStandardLevels{0.90, 0.95, 0.975, 0.99, 0.995};

/// Monte Carlo specification for W_q(eps) = B(1)' J(eps)^{-1} B(1), where
/// J(eps) = int_eps^1 (B(r) - r B(1))(B(r) - r B(1))' dr.
struct WqSpec {
  Index q = 1;
  double epsilon = 0.0;
  Index n_grid = 5000;
  Index n_rep = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct WqDraws {
  Vector values;
  Index redraws = 0;  // draws replaced because J was numerically singular
};

/// W_q(eps) for one path given by its Gaussian increments (n_grid x q, each
/// N(0, 1/n_grid)). J is a left Riemann sum over r = i/n_grid >= eps.
/// Returns nullopt when J is numerically singular.
std::optional<double> wq_from_increments(const Matrix& increments, double epsilon);

/// n_rep independent draws; draw i uses the stream derived from (seed, i).
WqDraws simulate_wq(const WqSpec& spec);

/// Draws for several trimming levels from the same Brownian paths.
std::vector<WqDraws> simulate_wq_multi(const WqSpec& spec, std::span<const double> epsilons);

struct QuantileTable {
  WqSpec spec;
  Vector levels;
  Vector quantiles;
  Vector standard_error;
};

/// Empirical quantiles of `draws` at `levels` with bootstrap standard errors.
QuantileTable table_from_draws(const WqSpec& spec, const Vector& draws,
                               std::span<const double> levels = kStandardLevels,
                               Index n_bootstrap = 200);
QuantileTable tabulate(const WqSpec& spec, std::span<const double> levels = kStandardLevels,
                       Index n_bootstrap = 200);

/// Linear interpolation between tabulated levels; exact at tabulated levels.
double quantile(const QuantileTable& table, double level);

/// Inverse chi-square CDF.
double chi_sq_quantile(Index df, double level);
double chi_sq_cdf(Index df, double x);

std::vector<QuantileTable> read_quantile_cache(std::istream& in);
void write_quantile_cache(std::ostream& out, std::span<const QuantileTable> tables);

/// Quantile tables keyed by (q, eps). Missing entries are simulated on
/// demand with `fallback` and memoized. Thread-safe.
class QuantileCache {
 public:
  QuantileCache() = default;
  explicit QuantileCache(const std::filesystem::path& file);

  /// Process-wide cache loaded from $SNFTS_WQ_CACHE or the shipped table.
  static QuantileCache& shared();

  QuantileTable table(Index q, double epsilon);
  bool contains(Index q, double epsilon) const;
  void insert(QuantileTable table);
  std::vector<QuantileTable> tables() const;

  /// Writes a temporary file next to `file`, then renames it into place.
  void save(const std::filesystem::path& file) const;

  WqSpec fallback{};

 private:
  using Key = std::pair<Index, long long>;
  static Key key(Index q, double epsilon);

  mutable std::mutex mutex_;
  std::map<Key, QuantileTable> tables_;
};

}  // namespace snfts
