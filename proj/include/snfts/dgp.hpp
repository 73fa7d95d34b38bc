#pragma once

#include <cstdint>
#include <vector>

#include "snfts/funcgrid.hpp"

namespace snfts {

/// VAR(1)-driven Fourier process
///   X_i(t) = sum_j xi_{j,1} sqrt2 sin(2 pi j t + delta_j) + xi_{j,2} sqrt2 cos(2 pi j t + delta_j),
///   xi_i = rho xi_{i-1} + sqrt(1 - rho^2) e_i,  e_i ~ N(0, sigma_e(v, mu)).
/// The coefficient vector lists the sine coefficients of every frequency first.
struct DgpConfig {
  Index n = 100;
  double rho = 0.5;
  double mu = 1.0;
  std::vector<double> v{12, 7, 0.5, 9, 5, 0.3};
  std::vector<double> delta;  // one phase per frequency; empty means zeros
  Index grid_size = 1000;
  std::uint64_t seed = 1;
  Index burn_in = 200;

  Index frequencies() const { return static_cast<Index>(v.size()) / 2; }
  void validate() const;
};

/// diag(v) / (1 + mu^2) + mu^2 / (1 + mu^2) 11'.
Matrix sigma_e(const std::vector<double>& v, double mu);

/// n x dim coefficient path, started from the stationary law N(0, sigma_e).
Matrix gen_var1(const DgpConfig& cfg);

/// Fourier functions in coefficient order (2F x G), with phases.
Matrix fourier_basis(const Grid& grid, Index frequencies, const std::vector<double>& delta = {});

/// Curves on the midpoint grid of size cfg.grid_size.
FunctionalSample gen_fourier_process(const DgpConfig& cfg);

/// Two samples whose standardized innovations are correlated by `coupling`
/// (z_Y = c z_X + sqrt(1 - c^2) z'). coupling = 0 gives independent samples.
SamplePair gen_coupled_pair(const DgpConfig& x, const DgpConfig& y, double coupling);

/// Linear functional process X_i = sum_h b_h eps_{i-h}, with
/// eps_j = sum_i sqrt(lambda_i) z_{i,j} phi_i and phi_i the Fourier functions
/// sqrt2 sin(2 pi t), sqrt2 cos(2 pi t), sqrt2 sin(4 pi t), ...
struct LinearProcessConfig {
  Index n = 200;
  std::vector<double> b{1.0};
  std::vector<double> lambdas{1.0, 0.5};
  Index grid_size = 1000;
  std::uint64_t seed = 1;
};

FunctionalSample gen_linear_process(const LinearProcessConfig& cfg);

}  // namespace snfts
