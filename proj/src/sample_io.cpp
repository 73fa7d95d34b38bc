#include "snfts/sample_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace snfts {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view tok, std::size_t line) {
  tok = trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || tok.empty())
    throw ParseError("invalid number '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite entry", line);
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_row(std::string_view body, std::size_t line) {
  std::vector<double> row;
  for (auto tok : split(body, ',')) row.push_back(parse_double(tok, line));
  return row;
}

bool take_directive(std::string_view line, std::string_view key, std::string_view& body) {
  line = trim(line);
  if (line.empty() || line.front() != '#') return false;
  line = trim(line.substr(1));
  if (line.substr(0, key.size()) != key) return false;
  line = trim(line.substr(key.size()));
  if (line.empty() || line.front() != ':') return false;
  body = trim(line.substr(1));
  return true;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

FunctionalSample read_sample(std::istream& in, const std::string& label) {
  std::string line;
  std::size_t lineno = 0;
  std::string_view body;

  if (!std::getline(in, line)) throw ParseError("empty file", 0);
  ++lineno;
  if (!take_directive(line, "grid", body)) throw ParseError("expected '# grid:' header", lineno);

  std::vector<std::vector<double>> pts;
  int dim = 0;
  for (auto field : split(body, ',')) {
    std::vector<double> p;
    std::istringstream ss{std::string(trim(field))};
    std::string tok;
    while (ss >> tok) p.push_back(parse_double(tok, lineno));
    if (p.empty() || p.size() > 2) throw ParseError("grid point must have 1 or 2 coordinates", lineno);
    if (dim == 0) dim = static_cast<int>(p.size());
    if (static_cast<int>(p.size()) != dim) throw ParseError("mixed grid dimensions", lineno);
    pts.push_back(std::move(p));
  }
  const auto g = static_cast<Index>(pts.size());
  Matrix points(g, dim);
  for (Index i = 0; i < g; ++i)
    for (int d = 0; d < dim; ++d) points(i, d) = pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];

  Vector weights = Vector::Constant(g, 1.0 / static_cast<double>(g));
  SampleMetadata meta{.weights_inferred = true};
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> row_lines;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (lineno == 2 && take_directive(t, "weights", body)) {
      auto w = parse_row(body, lineno);
      if (static_cast<Index>(w.size()) != g)
        throw ParseError("weights line has " + std::to_string(w.size()) + " entries, grid has " +
                             std::to_string(g),
                         lineno);
      weights = Eigen::Map<Vector>(w.data(), g);
      meta.weights_inferred = false;
      continue;
    }
    if (t.front() == '#') throw ParseError("unexpected directive", lineno);
    auto r = parse_row(t, lineno);
    if (static_cast<Index>(r.size()) != g)
      throw ParseError("row has " + std::to_string(r.size()) + " entries, grid has " + std::to_string(g),
                       lineno);
    rows.push_back(std::move(r));
    row_lines.push_back(lineno);
  }
  if (rows.size() < 2) throw ParseError("need at least 2 curves", lineno);

  Matrix values(static_cast<Index>(rows.size()), g);
  for (std::size_t i = 0; i < rows.size(); ++i)
    values.row(static_cast<Index>(i)) = Eigen::Map<const RowVector>(rows[i].data(), g);

  try {
    return FunctionalSample(std::move(values), Grid(std::move(points), std::move(weights)), label, meta);
  } catch (const Error& e) {
    throw ParseError(e.what(), 1);
  }
}

void write_sample(std::ostream& out, const FunctionalSample& s) {
  const auto& grid = s.grid();
  out << "# grid: ";
  for (Index i = 0; i < grid.size(); ++i) {
    if (i) out << ',';
    out << format_double(grid.points()(i, 0));
    if (grid.dim() == 2) out << ' ' << format_double(grid.points()(i, 1));
  }
  out << "\n# weights: ";
  for (Index i = 0; i < grid.size(); ++i) {
    if (i) out << ',';
    out << format_double(grid.weights()(i));
  }
  out << '\n';
  for (Index r = 0; r < s.n(); ++r) {
    for (Index c = 0; c < s.grid_size(); ++c) {
      if (c) out << ',';
      out << format_double(s.values()(r, c));
    }
    out << '\n';
  }
}

FunctionalSample load_sample(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_sample(in, path.stem().string());
}

void save_sample(const FunctionalSample& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_sample(out, s);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace snfts
