#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>

#include "snfts/funcgrid.hpp"
#include "snfts/sample_io.hpp"

using namespace snfts;

namespace {

Vector eval(const Grid& g, double (*f)(double)) {
  Vector out(g.size());
  for (Index t = 0; t < g.size(); ++t) out(t) = f(g.points()(t, 0));
  return out;
}

double s2sin(double t) { return std::numbers::sqrt2 * std::sin(2 * std::numbers::pi * t); }
double s2cos(double t) { return std::numbers::sqrt2 * std::cos(2 * std::numbers::pi * t); }
double ident(double t) { return t; }
double square(double t) { return t * t; }

}  // namespace

TEST_SUITE("funcgrid") {

TEST_CASE("fourier functions are orthonormal under quadrature") {
  const Grid g = Grid::uniform(1000);
  CHECK(std::abs(inner_product(eval(g, s2sin), eval(g, s2cos), g)) < 1e-6);
  CHECK(inner_product(eval(g, s2sin), eval(g, s2sin), g) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("inner product of t and t^2 integrates t^3") {
  const Grid g = Grid::uniform(1000);
  CHECK(std::abs(inner_product(eval(g, ident), eval(g, square), g) - 0.25) < 1e-5);
}

TEST_CASE("inner product is invariant under a common reordering of points and weights") {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> normal;
  const Grid g = Grid::trapezoid(37);
  Vector f(g.size()), h(g.size());
  for (Index t = 0; t < g.size(); ++t) {
    f(t) = normal(eng);
    h(t) = normal(eng);
  }
  std::vector<Index> perm(static_cast<std::size_t>(g.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), eng);
  Vector fp(g.size()), hp(g.size()), wp(g.size());
  for (Index t = 0; t < g.size(); ++t) {
    fp(t) = f(perm[static_cast<std::size_t>(t)]);
    hp(t) = h(perm[static_cast<std::size_t>(t)]);
    wp(t) = g.weights()(perm[static_cast<std::size_t>(t)]);
  }
  CHECK(std::abs(inner_product(f, h, g.weights()) - inner_product(fp, hp, wp)) < 1e-12);
}

TEST_CASE("grid validation") {
  Matrix p(3, 1);
  p << 0.1, 0.5, 0.9;
  CHECK_THROWS_AS(Grid(p, Vector::Constant(3, 0.5)), InvalidArgument);
  Matrix q(3, 1);
  q << 0.1, 0.1, 0.9;
  CHECK_THROWS_AS(Grid(q, Vector::Constant(3, 1.0 / 3.0)), InvalidArgument);
  const Grid t = Grid::trapezoid(11);
  CHECK(t.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  const Grid sq = Grid::product(Grid::uniform(4), Grid::uniform(5));
  CHECK(sq.size() == 20);
  CHECK(sq.dim() == 2);
  CHECK(sq.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sample pair proportions and grid agreement") {
  const Grid g = Grid::uniform(5);
  const SamplePair p(FunctionalSample(Matrix::Ones(3, 5), g), FunctionalSample(Matrix::Ones(4, 5), g));
  CHECK(p.gamma1() + p.gamma2() == 1.0);
  CHECK(p.gamma1() == doctest::Approx(3.0 / 7.0));
  CHECK_THROWS_AS(SamplePair(FunctionalSample(Matrix::Ones(3, 5), g),
                             FunctionalSample(Matrix::Ones(3, 6), Grid::uniform(6))),
                  DimensionError);
  CHECK_THROWS(FunctionalSample(Matrix::Ones(1, 5), g));
  Matrix bad = Matrix::Ones(3, 5);
  bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(FunctionalSample(bad, g));
}

TEST_CASE("B-spline smoothing reproduces spline-span curves and constants") {
  const Grid g = Grid::uniform(200);
  const BsplineSmoother smoother(g, 20);
  std::mt19937_64 eng(5);
  std::normal_distribution<double> normal;
  Matrix coef(3, 20);
  for (Index i = 0; i < coef.size(); ++i) coef.data()[i] = normal(eng);
  const Matrix in_span = coef * smoother.design().transpose();
  CHECK((smoother.apply(in_span) - in_span).cwiseAbs().maxCoeff() < 1e-8);

  const Matrix constant = Matrix::Constant(2, 200, 2.75);
  CHECK((smoother.apply(constant) - constant).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("B-spline basis is a partition of unity") {
  for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) CHECK(bspline_basis(t, 12, 4).sum() == doctest::Approx(1.0));
}

TEST_CASE("B-spline smoothing of a noisy sine") {
  const Grid g = Grid::uniform(1000);
  std::mt19937_64 eng(9);
  std::normal_distribution<double> normal(0.0, 0.01);
  Matrix raw(2, 1000);
  Vector truth(1000);
  for (Index t = 0; t < 1000; ++t) {
    truth(t) = std::sin(2 * std::numbers::pi * g.points()(t, 0));
    raw(0, t) = truth(t) + normal(eng);
    raw(1, t) = -truth(t) + normal(eng);
  }
  const FunctionalSample s = bspline_smooth(FunctionalSample(raw, g), 20);
  CHECK((s.values().row(0).transpose() - truth).cwiseAbs().maxCoeff() < 0.02);
  CHECK((s.values().row(1).transpose() + truth).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("centering") {
  const Grid g = Grid::uniform(4);
  Matrix zero_mean(2, 4);
  zero_mean << 1, 2, 3, 4, -1, -2, -3, -4;
  auto [c, m] = center(FunctionalSample(zero_mean, g));
  CHECK(c.values() == zero_mean);
  CHECK(m.isZero(0.0));

  Matrix same(2, 4);
  same << 1, 5, 2, 7, 1, 5, 2, 7;
  auto [c2, m2] = center(FunctionalSample(same, g));
  CHECK(c2.values().isZero(0.0));
  CHECK(m2 == same.row(0).transpose());

  std::mt19937_64 eng(1);
  std::normal_distribution<double> normal(3.0, 2.0);
  Matrix r(5, 7);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = normal(eng);
  const auto c3 = center(FunctionalSample(r, Grid::uniform(7))).first;
  CHECK(c3.values().colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("seasonal demeaning") {
  const Grid g = Grid::uniform(6);
  std::mt19937_64 eng(2);
  std::normal_distribution<double> normal;
  Matrix r(36, 6);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = normal(eng);
  const FunctionalSample s(r, g);
  CHECK((seasonal_demean(s, 1).values() - center(s).first.values()).cwiseAbs().maxCoeff() < 1e-14);

  Matrix phase(48, 6);
  for (Index i = 0; i < 48; ++i)
    for (Index t = 0; t < 6; ++t) phase(i, t) = std::cos(static_cast<double>((i % 12) * (t + 1)));
  CHECK(seasonal_demean(FunctionalSample(phase, g), 12).values().cwiseAbs().maxCoeff() < 1e-12);

  const Matrix d = seasonal_demean(FunctionalSample(r, g), 12).values();
  for (Index ph = 0; ph < 12; ++ph) {
    RowVector mean = RowVector::Zero(6);
    for (Index i = ph; i < 36; i += 12) mean += d.row(i) / 3.0;
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sample files round-trip bitwise") {
  std::mt19937_64 eng(4);
  std::normal_distribution<double> normal;
  Matrix v(10, 50);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = normal(eng) * 1e3;
  const FunctionalSample s(v, Grid::trapezoid(50));
  const auto path = std::filesystem::temp_directory_path() / "snfts_roundtrip.csv";
  save_sample(s, path);
  const FunctionalSample back = load_sample(path);
  std::filesystem::remove(path);
  CHECK(back.values() == v);
  CHECK(back.grid() == s.grid());
  CHECK_FALSE(back.metadata().weights_inferred);
}

TEST_CASE("sample file with a short row is rejected") {
  std::istringstream in("# grid: 0.1,0.5,0.9\n1,2,3\n4,5\n");
  CHECK_THROWS_AS(read_sample(in), ParseError);
}

TEST_CASE("missing weights line infers uniform weights") {
  std::istringstream in("# grid: 0.125,0.375,0.625,0.875\n1,2,3,4\n5,6,7,8\n");
  const FunctionalSample s = read_sample(in);
  CHECK(s.metadata().weights_inferred);
  CHECK(s.grid().weights().isApproxToConstant(0.25));
  std::ostringstream out;
  write_sample(out, s);
  CHECK(out.str().find("# weights:") != std::string::npos);
}

}  // TEST_SUITE
