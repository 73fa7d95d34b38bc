#pragma once

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "snfts/funcgrid.hpp"

namespace testing_support {

// Fixed toy pair: N1 = N2 = n0 curves on a G-point trapezoid grid. Columns
// carry decreasing scales so the leading eigenvalues are well separated;
// `shift` changes the second sample's spectrum.
struct Toy {
  snfts::SamplePair pair;
  oracle::Pair plain;
};

inline snfts::Matrix toy_values(snfts::Index n, snfts::Index g, std::uint64_t seed, double tilt) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal;
  snfts::Matrix v(n, g);
  for (snfts::Index i = 0; i < n; ++i)
    for (snfts::Index t = 0; t < g; ++t) v(i, t) = normal(eng) * (1.0 + tilt * static_cast<double>(g - t)) + 0.3 * std::sin(static_cast<double>(i * t));
  return v;
}

inline Toy make_toy(snfts::Index n0 = 6, snfts::Index g = 8, std::uint64_t seed = 11) {
  const snfts::Grid grid = snfts::Grid::trapezoid(g);
  const snfts::Matrix x = toy_values(n0, g, seed, 0.5);
  const snfts::Matrix y = toy_values(n0, g, seed + 1, 0.35);
  return Toy{snfts::SamplePair(snfts::FunctionalSample(x, grid), snfts::FunctionalSample(y, grid)),
             oracle::Pair{x, y, grid.weights()}};
}

inline snfts::SamplePair scaled(const snfts::SamplePair& p, double c) {
  return snfts::SamplePair(p.x().scaled(c), p.y().scaled(c));
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace testing_support
