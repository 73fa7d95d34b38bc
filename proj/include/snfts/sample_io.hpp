#pragma once

#include <filesystem>
#include <iosfwd>

#include "snfts/funcgrid.hpp"

namespace snfts {

// Sample CSV layout:
//   # grid: p1,p2,...          (2-D points as "x y" pairs)
//   # weights: w1,w2,...       (optional; uniform 1/G when absent)
//   v11,v12,...                (one curve per line)

FunctionalSample read_sample(std::istream& in, const std::string& label = {});
void write_sample(std::ostream& out, const FunctionalSample& s);

FunctionalSample load_sample(const std::filesystem::path& path);
void save_sample(const FunctionalSample& s, const std::filesystem::path& path);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace snfts
