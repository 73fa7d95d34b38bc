#pragma once

// Straight-line reference implementations on dense G x G kernels. They share
// no code with the span-coordinate engine and exist only to check it.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline double ip(const Vector& f, const Vector& g, const Vector& w) {
  double s = 0.0;
  for (Index t = 0; t < w.size(); ++t) s += f(t) * g(t) * w(t);
  return s;
}

// Kernel (1/m) sum (x_i - xbar)(x_i - xbar)' over rows[first, first + m).
inline Matrix cov(const Matrix& values, Index first, Index m, bool center = true) {
  const Index g = values.cols();
  Vector mean = Vector::Zero(g);
  if (center)
    for (Index i = 0; i < m; ++i) mean += values.row(first + i).transpose() / static_cast<double>(m);
  Matrix k = Matrix::Zero(g, g);
  for (Index i = 0; i < m; ++i) {
    const Vector x = values.row(first + i).transpose() - mean;
    for (Index t = 0; t < g; ++t)
      for (Index s = 0; s < g; ++s) k(t, s) += x(t) * x(s) / static_cast<double>(m);
  }
  return k;
}

inline Matrix cov_rows(const Matrix& values, const std::vector<Index>& rows) {
  Matrix sub(static_cast<Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Index>(i)) = values.row(rows[i]);
  return cov(sub, 0, sub.rows());
}

struct Eig {
  Vector values;     // descending
  Matrix functions;  // k x G
};

// Eigenpairs of the integral operator: W^{1/2} K W^{1/2} u = lambda u, phi = W^{-1/2} u.
inline Eig eig(const Matrix& kernel, const Vector& w, Index k) {
  const Vector sw = w.cwiseSqrt();
  const Matrix a = sw.asDiagonal() * kernel * sw.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
  const Index g = kernel.rows();
  Eig out{Vector(k), Matrix(k, kernel.cols())};
  for (Index j = 0; j < k; ++j) {
    out.values(j) = solver.eigenvalues()(g - 1 - j);
    out.functions.row(j) = solver.eigenvectors().col(g - 1 - j).cwiseQuotient(sw).transpose();
  }
  return out;
}

inline void align(Eig& e, const Eig& ref, const Vector& w) {
  for (Index j = 0; j < std::min(e.functions.rows(), ref.functions.rows()); ++j)
    if (ip(e.functions.row(j).transpose(), ref.functions.row(j).transpose(), w) < 0.0) e.functions.row(j) *= -1.0;
}

// <C phi_i, phi_j> with both integrals done by quadrature.
inline double project(const Matrix& kernel, const Vector& fi, const Vector& fj, const Vector& w) {
  double s = 0.0;
  for (Index t = 0; t < w.size(); ++t)
    for (Index u = 0; u < w.size(); ++u) s += kernel(t, u) * fi(u) * w(u) * fj(t) * w(t);
  return s;
}

struct Pair {
  Matrix x, y;  // N1 x G, N2 x G
  Vector w;
  Index n1() const { return x.rows(); }
  Index n2() const { return y.rows(); }
  Index n() const { return n1() + n2(); }
};

struct Setup {
  Eig xfull, pooled;
};

inline Setup setup(const Pair& p, Index rank) {
  const Matrix cx = cov(p.x, 0, p.n1());
  const Matrix cy = cov(p.y, 0, p.n2());
  const double n = static_cast<double>(p.n());
  Setup s{eig(cx, p.w, rank), eig((static_cast<double>(p.n1()) * cx + static_cast<double>(p.n2()) * cy) / n, p.w, rank)};
  for (Index j = 0; j < s.xfull.functions.rows(); ++j) {
    Index at = 0;
    s.xfull.functions.row(j).cwiseAbs().maxCoeff(&at);
    if (s.xfull.functions(j, at) < 0.0) s.xfull.functions.row(j) *= -1.0;
  }
  align(s.pooled, s.xfull, p.w);
  return s;
}

inline Index sub_x(const Pair& p, Index k) { return k * p.n1() / p.n(); }
inline Index sub_y(const Pair& p, Index k) { return k * p.n2() / p.n(); }

struct Track {
  std::vector<Index> k;
  std::vector<Vector> v;
};

// SN statistic N (v_N - c)' V^{-1} (v_N - c), V = N^-2 sum_{k >= floor(N eps)} k^2 (v_k - v_N)(v_k - v_N)'.
inline double sn_stat(const Track& t, Index n, const Vector& c, double eps = 0.0) {
  const Vector last = t.v.back();
  const Index d = last.size();
  Matrix v = Matrix::Zero(d, d);
  const auto kmin = static_cast<Index>(std::floor(static_cast<double>(n) * eps));
  for (std::size_t i = 0; i < t.k.size(); ++i) {
    if (t.k[i] < kmin) continue;
    const Vector e = t.v[i] - last;
    v += static_cast<double>(t.k[i] * t.k[i]) * e * e.transpose();
  }
  v /= static_cast<double>(n * n);
  const Vector a = last - c;
  return static_cast<double>(n) * a.dot(v.fullPivLu().solve(a));
}

inline Track cov_track(const Pair& p, Index K) {
  const Setup s = setup(p, K);
  Track t;
  for (Index k = 1; k <= p.n(); ++k) {
    const Index m = sub_x(p, k), mp = sub_y(p, k);
    if (m < 2 || mp < 2) continue;
    const Matrix diff = cov(p.x, 0, m) - cov(p.y, 0, mp);
    Vector a(K * (K + 1) / 2);
    Index pos = 0;
    for (Index j = 0; j < K; ++j)
      for (Index i = j; i < K; ++i)
        a(pos++) = project(diff, s.pooled.functions.row(i).transpose(), s.pooled.functions.row(j).transpose(), p.w);
    t.k.push_back(k);
    t.v.push_back(a);
  }
  return t;
}

inline Track eigval_track(const Pair& p, const std::vector<Index>& comps, bool ratio) {
  const Index top = *std::max_element(comps.begin(), comps.end());
  const Index floor = ratio ? std::max<Index>(2, top + 1) : 2;
  Track t;
  for (Index k = 1; k <= p.n(); ++k) {
    const Index m = sub_x(p, k), mp = sub_y(p, k);
    if (m < floor || mp < floor) continue;
    const Eig ex = eig(cov(p.x, 0, m), p.w, top);
    const Eig ey = eig(cov(p.y, 0, mp), p.w, top);
    Vector a(static_cast<Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) {
      const Index j = comps[c] - 1;
      a(static_cast<Index>(c)) = ratio ? ex.values(j) / ey.values(j) : ex.values(j) - ey.values(j);
    }
    t.k.push_back(k);
    t.v.push_back(a);
  }
  return t;
}

enum class Basis { nu, nu_tilde, nu_star, nu_star2 };

// Basis functions (rows) for eigenfunction j (1-based) built from pooled phi^1..phi^p.
inline Matrix basis(const Eig& pooled, Basis b, Index j, Index p) {
  std::vector<Vector> out;
  for (Index i = 1; i <= p; ++i) {
    if (i == j) continue;
    const Vector phi_i = pooled.functions.row(i - 1).transpose();
    const Vector phi_j = pooled.functions.row(j - 1).transpose();
    switch (b) {
      case Basis::nu:
        if (i > j) out.push_back(phi_i);
        break;
      case Basis::nu_tilde: out.push_back(phi_i); break;
      case Basis::nu_star: out.push_back(phi_i + phi_j); break;
      case Basis::nu_star2:
        if (i > j) out.push_back(phi_i + phi_j);
        break;
    }
  }
  Matrix m(static_cast<Index>(out.size()), pooled.functions.cols());
  for (std::size_t r = 0; r < out.size(); ++r) m.row(static_cast<Index>(r)) = out[r].transpose();
  return m;
}

inline Track eigfun_track(const Pair& p, const std::vector<Index>& comps, Basis b, Index pdim) {
  const Index top = *std::max_element(comps.begin(), comps.end());
  const Index rank = std::max(top, pdim);
  const Setup s = setup(p, rank);
  Track t;
  for (Index k = 1; k <= p.n(); ++k) {
    const Index m = sub_x(p, k), mp = sub_y(p, k);
    if (m < top + 1 || mp < top + 1 || m < 2 || mp < 2) continue;
    Eig ex = eig(cov(p.x, 0, m), p.w, rank);
    Eig ey = eig(cov(p.y, 0, mp), p.w, rank);
    align(ex, s.xfull, p.w);
    align(ey, s.xfull, p.w);
    std::vector<double> a;
    for (Index j : comps) {
      const Matrix nu = basis(s.pooled, b, j, pdim);
      const Vector diff = (ex.functions.row(j - 1) - ey.functions.row(j - 1)).transpose();
      for (Index r = 0; r < nu.rows(); ++r) a.push_back(ip(diff, nu.row(r).transpose(), p.w));
    }
    t.k.push_back(k);
    t.v.push_back(Eigen::Map<Vector>(a.data(), static_cast<Index>(a.size())));
  }
  return t;
}

// Scores of the centered curves of one sample against pooled eigenfunctions.
inline Matrix centered_scores(const Matrix& values, const Eig& pooled, const Vector& w, Index K) {
  const Vector mean = values.colwise().mean().transpose();
  Matrix s(values.rows(), K);
  for (Index i = 0; i < values.rows(); ++i)
    for (Index j = 0; j < K; ++j)
      s(i, j) = ip(values.row(i).transpose() - mean, pooled.functions.row(j).transpose(), w);
  return s;
}

inline double pkm(const Pair& p, Index K) {
  const Setup st = setup(p, K);
  const Matrix sx = centered_scores(p.x, st.pooled, p.w, K);
  const Matrix sy = centered_scores(p.y, st.pooled, p.w, K);
  const double n1 = static_cast<double>(p.n1()), n2 = static_cast<double>(p.n2()), n = n1 + n2;
  double total = 0.0;
  for (Index i = 0; i < K; ++i)
    for (Index j = 0; j < K; ++j) {
      double cx = 0, cy = 0;
      for (Index l = 0; l < sx.rows(); ++l) cx += sx(l, i) * sx(l, j) / n1;
      for (Index l = 0; l < sy.rows(); ++l) cy += sy(l, i) * sy(l, j) / n2;
      double ri = 0, rj = 0;
      for (Index l = 0; l < sx.rows(); ++l) {
        ri += sx(l, i) * sx(l, i);
        rj += sx(l, j) * sx(l, j);
      }
      for (Index l = 0; l < sy.rows(); ++l) {
        ri += sy(l, i) * sy(l, i);
        rj += sy(l, j) * sy(l, j);
      }
      total += (cx - cy) * (cx - cy) / ((ri / n) * (rj / n));
    }
  return n1 * n2 / (2.0 * n) * total;
}

inline Matrix bartlett(const Matrix& series, double b) {
  const Index T = series.rows(), d = series.cols();
  Vector mean = Vector::Zero(d);
  for (Index t = 0; t < T; ++t) mean += series.row(t).transpose() / static_cast<double>(T);
  Matrix out = Matrix::Zero(d, d);
  for (Index h = 0; h <= std::min<Index>(static_cast<Index>(std::floor(b)), T - 1); ++h) {
    Matrix g = Matrix::Zero(d, d);
    for (Index t = h; t < T; ++t)
      g += (series.row(t).transpose() - mean) * (series.row(t - h) - mean.transpose()) / static_cast<double>(T);
    if (h == 0)
      out += g;
    else
      out += (1.0 - static_cast<double>(h) / (b + 1.0)) * (g + g.transpose());
  }
  return out;
}

// Andrews (1991) AR(1) plug-in with unit weights, Bartlett kernel.
inline double andrews(const Matrix& series) {
  const Index T = series.rows();
  double num = 0.0, den = 0.0;
  for (Index c = 0; c < series.cols(); ++c) {
    const double mean = series.col(c).mean();
    double sxy = 0, sxx = 0;
    for (Index t = 1; t < T; ++t) {
      sxy += (series(t, c) - mean) * (series(t - 1, c) - mean);
      sxx += (series(t - 1, c) - mean) * (series(t - 1, c) - mean);
    }
    double rho = sxx > 0 ? sxy / sxx : 1.0;
    rho = std::clamp(rho, -0.999, 0.999);
    double s2 = 0;
    for (Index t = 1; t < T; ++t) {
      const double e = (series(t, c) - mean) - rho * (series(t - 1, c) - mean);
      s2 += e * e / static_cast<double>(T - 1);
    }
    if (!(s2 > 0)) s2 = 1.0;
    num += 4 * rho * rho * s2 * s2 / (std::pow(1 - rho, 6) * std::pow(1 + rho, 2));
    den += s2 * s2 / std::pow(1 - rho, 4);
  }
  return std::min(1.1447 * std::cbrt(num / den * static_cast<double>(T)), static_cast<double>(T - 1));
}

// Equal sample sizes: paired summands u_l = vech(sx sx') - vech(sy sy').
inline double clrv(const Pair& p, Index K, double bandwidth, bool use_andrews) {
  const Setup st = setup(p, K);
  const Matrix sx = centered_scores(p.x, st.pooled, p.w, K);
  const Matrix sy = centered_scores(p.y, st.pooled, p.w, K);
  const Index d = K * (K + 1) / 2, n0 = p.n1();
  Matrix u(n0, d);
  for (Index l = 0; l < n0; ++l) {
    Index pos = 0;
    for (Index j = 0; j < K; ++j)
      for (Index i = j; i < K; ++i) u(l, pos++) = sx(l, i) * sx(l, j) - sy(l, i) * sy(l, j);
  }
  const Vector a = u.colwise().mean().transpose();
  const double b = use_andrews ? andrews(u) : bandwidth;
  const Matrix sigma = static_cast<double>(p.n()) / static_cast<double>(n0) * bartlett(u, b);
  return static_cast<double>(p.n()) * a.dot(sigma.fullPivLu().solve(a));
}

// Subsampling with l-blocks, eigenvalue components.
inline double subsampling_eigval(const Pair& p, const std::vector<Index>& comps, Index l) {
  const Index n0 = p.n1(), top = *std::max_element(comps.begin(), comps.end());
  auto diff = [&](Index first, Index m) {
    const Eig ex = eig(cov(p.x, first, m), p.w, top);
    const Eig ey = eig(cov(p.y, first, m), p.w, top);
    Vector d(static_cast<Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) d(static_cast<Index>(c)) = ex.values(comps[c] - 1) - ey.values(comps[c] - 1);
    return d;
  };
  const Vector d = diff(0, n0);
  const Index s = n0 / l;
  std::vector<Vector> v;
  for (Index b = 0; b < s; ++b) v.push_back(diff(b * l, l));
  Vector mean = Vector::Zero(d.size());
  for (const auto& x : v) mean += x / static_cast<double>(s);
  Matrix sig = Matrix::Zero(d.size(), d.size());
  for (const auto& x : v) sig += (x - mean) * (x - mean).transpose();
  sig *= static_cast<double>(l) / static_cast<double>(s);
  const Matrix pinv = sig.completeOrthogonalDecomposition().pseudoInverse();
  return static_cast<double>(n0) * d.dot(pinv * d);
}

// Subsampling with an eigenfunction target projected on a basis of pooled eigenfunctions.
inline double subsampling_eigfun(const Pair& p, Index j, Basis bt, Index pdim, Index l) {
  const Index n0 = p.n1(), rank = std::max(j, pdim);
  const Setup st = setup(p, rank);
  const Matrix nu = basis(st.pooled, bt, j, pdim);
  auto diff = [&](Index first, Index m) {
    Eig ex = eig(cov(p.x, first, m), p.w, rank);
    Eig ey = eig(cov(p.y, first, m), p.w, rank);
    align(ex, st.xfull, p.w);
    align(ey, st.xfull, p.w);
    const Vector g = (ex.functions.row(j - 1) - ey.functions.row(j - 1)).transpose();
    Vector d(nu.rows());
    for (Index r = 0; r < nu.rows(); ++r) d(r) = ip(g, nu.row(r).transpose(), p.w);
    return d;
  };
  const Vector d = diff(0, n0);
  const Index s = n0 / l;
  std::vector<Vector> v;
  for (Index b = 0; b < s; ++b) v.push_back(diff(b * l, l));
  Vector mean = Vector::Zero(d.size());
  for (const auto& x : v) mean += x / static_cast<double>(s);
  Matrix sig = Matrix::Zero(d.size(), d.size());
  for (const auto& x : v) sig += (x - mean) * (x - mean).transpose();
  sig *= static_cast<double>(l) / static_cast<double>(s);
  const Matrix pinv = sig.completeOrthogonalDecomposition().pseudoInverse();
  return static_cast<double>(n0) * d.dot(pinv * d);
}

// W_q(eps) for a single path given by increments (n x q): left Riemann sum of
// the Brownian bridge outer products over r_i = i/n >= eps.
inline double wq(const Matrix& inc, double eps) {
  const Index n = inc.rows(), q = inc.cols();
  Matrix b = Matrix::Zero(n + 1, q);
  for (Index i = 0; i < n; ++i) b.row(i + 1) = b.row(i) + inc.row(i);
  const Vector b1 = b.row(n).transpose();
  Matrix j = Matrix::Zero(q, q);
  for (Index i = 0; i < n; ++i) {
    const double r = static_cast<double>(i) / static_cast<double>(n);
    if (r < eps - 1e-12) continue;
    const Vector br = b.row(i).transpose() - r * b1;
    j += br * br.transpose() / static_cast<double>(n);
  }
  return b1.dot(j.inverse() * b1);
}

}  // namespace oracle
