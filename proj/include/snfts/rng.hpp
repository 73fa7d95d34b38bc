#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace snfts {

using Engine = std::mt19937_64;

/// Independent generator for the stream addressed by (seed, path...).
///
/// Every replication, draw and sample gets its own stream, so results do not
/// depend on evaluation order or the number of worker threads.
inline Engine derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

/// Standard normal sampler (ziggurat; platform-independent output for a given engine).
using StandardNormal = boost::random::normal_distribution<double>;

}  // namespace snfts
