#include "snfts/dgp.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "snfts/error.hpp"
#include "snfts/rng.hpp"

namespace snfts {

namespace {

Matrix sigma_factor(const DgpConfig& cfg) {
  Eigen::LLT<Matrix> llt(sigma_e(cfg.v, cfg.mu));
  if (llt.info() != Eigen::Success) throw InvalidArgument("sigma_e is not positive definite");
  return llt.matrixL();
}

// Standard normal innovations: row 0 seeds the stationary start, then
// burn_in + n steps.
Matrix innovations(const DgpConfig& cfg, Engine& eng) {
  StandardNormal normal;
  const Index dim = static_cast<Index>(cfg.v.size());
  Matrix z(1 + cfg.burn_in + cfg.n, dim);
  for (Index i = 0; i < z.rows(); ++i)
    for (Index c = 0; c < dim; ++c) z(i, c) = normal(eng);
  return z;
}

Matrix run_var1(const DgpConfig& cfg, const Matrix& z) {
  const Matrix l = sigma_factor(cfg);
  const double scale = std::sqrt(1.0 - cfg.rho * cfg.rho);
  Vector xi = l * z.row(0).transpose();
  Matrix out(cfg.n, xi.size());
  for (Index i = 1; i < z.rows(); ++i) {
    xi = cfg.rho * xi + scale * (l * z.row(i).transpose());
    const Index keep = i - 1 - cfg.burn_in;
    if (keep >= 0) out.row(keep) = xi.transpose();
  }
  return out;
}

FunctionalSample curves(const DgpConfig& cfg, const Matrix& coef) {
  const Grid grid = Grid::uniform(cfg.grid_size);
  const Matrix basis = fourier_basis(grid, cfg.frequencies(), cfg.delta);
  return FunctionalSample(coef * basis, grid);
}

}  // namespace

void DgpConfig::validate() const {
  if (n < 2) throw InvalidArgument("dgp: n must be >= 2");
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("dgp: |rho| must be < 1");
  if (v.empty() || v.size() % 2 != 0) throw DimensionError("dgp: v must hold two entries per frequency");
  for (double x : v)
    if (!(x > 0.0)) throw InvalidArgument("dgp: v entries must be positive");
  if (!delta.empty() && static_cast<Index>(delta.size()) != frequencies())
    throw DimensionError("dgp: delta needs one phase per frequency");
  if (grid_size < 2) throw InvalidArgument("dgp: grid_size must be >= 2");
  if (burn_in < 0) throw InvalidArgument("dgp: burn_in must be >= 0");
}

Matrix sigma_e(const std::vector<double>& v, double mu) {
  const auto d = static_cast<Index>(v.size());
  const double m2 = mu * mu;
  Matrix s = Matrix::Constant(d, d, m2 / (1.0 + m2));
  for (Index i = 0; i < d; ++i) s(i, i) += v[static_cast<std::size_t>(i)] / (1.0 + m2);
  return s;
}

Matrix gen_var1(const DgpConfig& cfg) {
  cfg.validate();
  Engine eng = derive_stream(cfg.seed, {0});
  return run_var1(cfg, innovations(cfg, eng));
}

Matrix fourier_basis(const Grid& grid, Index frequencies, const std::vector<double>& delta) {
  if (grid.dim() != 1) throw DimensionError("fourier_basis: needs a 1-D grid");
  const Index g = grid.size();
  Matrix out(2 * frequencies, g);
  const double two_pi = 2.0 * std::numbers::pi;
  for (Index j = 1; j <= frequencies; ++j) {
    const double phase = delta.empty() ? 0.0 : delta[static_cast<std::size_t>(j - 1)];
    for (Index t = 0; t < g; ++t) {
      const double arg = two_pi * static_cast<double>(j) * grid.points()(t, 0) + phase;
      out(j - 1, t) = std::numbers::sqrt2 * std::sin(arg);
      out(frequencies + j - 1, t) = std::numbers::sqrt2 * std::cos(arg);
    }
  }
  return out;
}

FunctionalSample gen_fourier_process(const DgpConfig& cfg) {
  return curves(cfg, gen_var1(cfg));
}

SamplePair gen_coupled_pair(const DgpConfig& x, const DgpConfig& y, double coupling) {
  x.validate();
  y.validate();
  if (!(std::abs(coupling) <= 1.0)) throw InvalidArgument("gen_coupled_pair: |coupling| must be <= 1");
  if (x.v.size() != y.v.size() || x.n != y.n || x.burn_in != y.burn_in)
    throw DimensionError("gen_coupled_pair: samples need matching dimension, length and burn-in");
  Engine ex = derive_stream(x.seed, {0});
  Engine ey = derive_stream(y.seed, {1});
  const Matrix zx = innovations(x, ex);
  const Matrix zy = coupling * zx + std::sqrt(1.0 - coupling * coupling) * innovations(y, ey);
  return SamplePair(curves(x, run_var1(x, zx)), curves(y, run_var1(y, zy)));
}

FunctionalSample gen_linear_process(const LinearProcessConfig& cfg) {
  if (cfg.n < 2) throw InvalidArgument("linear process: n must be >= 2");
  if (cfg.b.empty()) throw InvalidArgument("linear process: empty coefficient list");
  if (cfg.lambdas.empty()) throw InvalidArgument("linear process: empty eigenvalue list");
  for (double l : cfg.lambdas)
    if (!(l >= 0.0)) throw InvalidArgument("linear process: eigenvalues must be non-negative");

  const auto terms = static_cast<Index>(cfg.lambdas.size());
  const Grid grid = Grid::uniform(cfg.grid_size);
  const Matrix fourier = fourier_basis(grid, (terms + 1) / 2);
  // Interleave so phi_1 = sin(2 pi t), phi_2 = cos(2 pi t), phi_3 = sin(4 pi t), ...
  Matrix phi(terms, grid.size());
  const Index f = fourier.rows() / 2;
  for (Index i = 0; i < terms; ++i) phi.row(i) = fourier.row(i % 2 == 0 ? i / 2 : f + i / 2);

  const auto lag = static_cast<Index>(cfg.b.size());
  Engine eng = derive_stream(cfg.seed, {0});
  StandardNormal normal;
  Matrix scores(cfg.n + lag - 1, terms);
  for (Index i = 0; i < scores.rows(); ++i)
    for (Index j = 0; j < terms; ++j) scores(i, j) = std::sqrt(cfg.lambdas[static_cast<std::size_t>(j)]) * normal(eng);

  Matrix coef = Matrix::Zero(cfg.n, terms);
  for (Index i = 0; i < cfg.n; ++i)
    for (Index h = 0; h < lag; ++h) coef.row(i) += cfg.b[static_cast<std::size_t>(h)] * scores.row(i + lag - 1 - h);
  return FunctionalSample(coef * phi, grid);
}

}  // namespace snfts
