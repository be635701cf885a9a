#include "sthdg/fe.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sthdg;

namespace {

double integrate(const QuadratureRule& r, const std::function<double(const Point&)>& f) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.points.size(); ++q) s += r.weights[q] * f(r.points[q]);
  return s;
}

Box box(double t0, double t1, double a0, double a1, double b0 = 0.0, double b1 = 0.0) {
  return Box{{t0, a0, b0}, {t1, a1, b1}};
}

}  // namespace

TEST_CASE("Gauss rules") {
  const auto r1 = gauss_rule(1, 1);
  REQUIRE(r1.points.size() == 1);
  CHECK(r1.points[0][0] == doctest::Approx(0.0));
  CHECK(r1.weights[0] == doctest::Approx(2.0));

  const auto r2 = gauss_rule(2, 1);
  REQUIRE(r2.points.size() == 2);
  CHECK(std::abs(r2.points[0][0]) == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(r2.weights[0] == doctest::Approx(1.0));
  CHECK(integrate(r2, [](const Point& x) { return x[0] * x[0]; }) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(integrate(r2, [](const Point& x) { return x[0] * x[0] * x[0]; })) < 1e-15);

  const auto r22 = gauss_rule(2, 2);
  CHECK(integrate(r22, [](const Point& x) { return x[0] * x[0] * x[1] * x[1]; }) ==
        doctest::Approx(4.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("Gauss rules integrate their stated degree exactly") {
  for (int n = 1; n <= 8; ++n)
    for (int k = 1; k <= 3; ++k) {
      const auto r = gauss_rule(n, k);
      double wsum = 0.0;
      for (double w : r.weights) wsum += w;
      CHECK(wsum == doctest::Approx(std::pow(2.0, k)).epsilon(1e-13));
      CHECK(r.exactness == 2 * n - 1);
      const int p = 2 * n - 1 - 1;  // even degree just below the limit
      const double exact = std::pow(2.0 / (p + 1), k);
      const double got = integrate(r, [&](const Point& x) {
        double v = 1.0;
        for (int a = 0; a < k; ++a) v *= std::pow(x[a], p);
        return v;
      });
      CHECK(got == doctest::Approx(exact).epsilon(1e-13));
    }
}

TEST_CASE("Gauss quadrature error decreases with the point count") {
  const double exact = 2.0 * std::sinh(1.0);
  double prev = 1e300;
  for (int n = 1; n <= 6; ++n) {
    const double err = std::abs(integrate(gauss_rule(n, 1), [](const Point& x) { return std::exp(x[0]); }) - exact);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("bilinear basis at the centre") {
  const auto b = TensorBasis::element(1, 1);
  REQUIRE(b.size() == 4);
  BasisValues v;
  b.evaluate_reference({0.0, 0.0, 0.0}, v);
  for (double x : v.value) CHECK(x == doctest::Approx(0.25));
}

TEST_CASE("basis size and partition of unity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int d = 1; d <= 2; ++d)
    for (int p = 1; p <= 3; ++p) {
      const auto b = TensorBasis::element(d, p);
      CHECK(b.size() == 2 * static_cast<int>(std::pow(p + 1, d)));
      BasisValues v;
      for (int s = 0; s < 20; ++s) {
        b.evaluate_reference({U(rng), U(rng), U(rng)}, v);
        double sum = 0.0;
        for (double x : v.value) sum += x;
        CHECK(std::abs(sum - 1.0) < 1e-13);
      }
    }
}

TEST_CASE("basis derivatives agree with central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  const Box bx = box(0.2, 0.7, -0.5, 0.5, 0.0, 2.0);
  for (int d = 1; d <= 2; ++d)
    for (int p = 1; p <= 3; ++p) {
      const auto b = TensorBasis::element(d, p);
      BasisValues v, vp, vm;
      for (int s = 0; s < 10; ++s) {
        Point x{};
        for (int a = 0; a <= d; ++a) x[a] = bx.lo[a] + U(rng) * bx.extent(a);
        b.evaluate(bx, x, v);
        for (int a = 0; a <= d; ++a) {
          const double h = 1e-6;
          Point xp = x, xm = x;
          xp[a] += h;
          xm[a] -= h;
          b.evaluate(bx, xp, vp);
          b.evaluate(bx, xm, vm);
          for (int i = 0; i < b.size(); ++i) {
            const double fd = (vp.value[i] - vm.value[i]) / (2 * h);
            CHECK(std::abs(fd - v.grad[i][a]) < 1e-8 * std::max(1.0, std::abs(v.grad[i][a])));
            const double fd2 = (vp.grad[i][a] - vm.grad[i][a]) / (2 * h);
            CHECK(std::abs(fd2 - v.hess[i][a]) < 1e-6 * std::max(1.0, std::abs(v.hess[i][a])));
          }
        }
      }
    }
}

TEST_CASE("Q(1,1) has no pure second derivatives") {
  const auto b = TensorBasis::element(2, 1);
  BasisValues v;
  b.evaluate_reference({0.3, -0.2, 0.7}, v);
  for (int i = 0; i < b.size(); ++i)
    for (int a = 0; a < 3; ++a) CHECK(v.hess[i][a] == 0.0);
}

TEST_CASE("the span contains the tensor monomials") {
  const Box bx = box(0.0, 1.0, 0.0, 2.0, -1.0, 1.0);
  const int p = 2;
  const auto b = TensorBasis::element(2, p);
  for (int a = 0; a <= 1; ++a)
    for (int i = 0; i <= p; ++i)
      for (int j = 0; j <= p; ++j) {
        auto f = [&](const Point& x) { return std::pow(x[0], a) * std::pow(x[1], i) * std::pow(x[2], j); };
        const auto c = interpolate(b, bx, f);
        for (const Point& x : {Point{0.3, 1.1, -0.4}, Point{0.9, 0.2, 0.8}})
          CHECK(evaluate_expansion(b, bx, c.data(), x) == doctest::Approx(f(x)).epsilon(1e-12));
      }
}

TEST_CASE("L2 projection") {
  const Box bx = box(0.0, 1.0, -1.0, 1.0);
  const auto b = TensorBasis::element(1, 1);
  SUBCASE("idempotent on the space") {
    auto f = [](const Point& x) { return 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]; };
    const auto c = l2_project(b, bx, f, 4);
    for (const Point& x : {Point{0.1, 0.3}, Point{0.8, -0.9}})
      CHECK(evaluate_expansion(b, bx, c.data(), x) == doctest::Approx(f(x)).epsilon(1e-12));
  }
  SUBCASE("x^2 on p_s = 1 projects to 1/3") {
    const auto c = l2_project(b, bx, [](const Point& x) { return x[1] * x[1]; }, 4);
    for (const Point& x : {Point{0.1, 0.3}, Point{0.8, -0.9}, Point{0.5, 0.0}})
      CHECK(evaluate_expansion(b, bx, c.data(), x) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("residual is orthogonal to the space and the projection is bounded") {
    auto f = [](const Point& x) { return std::sin(3 * x[0]) * std::exp(x[1]); };
    const auto c = l2_project(b, bx, f, 8);
    const auto qp = map_rule(gauss_rule(8, 2), bx, 2);
    BasisValues v;
    Eigen::VectorXd gram_res = Eigen::VectorXd::Zero(b.size());
    double nf = 0.0, np = 0.0;
    for (const auto& q : qp) {
      b.evaluate(bx, q.x, v);
      const double ph = evaluate_expansion(b, bx, c.data(), q.x);
      for (int i = 0; i < b.size(); ++i) gram_res[i] += q.w * (f(q.x) - ph) * v.value[i];
      nf += q.w * f(q.x) * f(q.x);
      np += q.w * ph * ph;
    }
    CHECK(gram_res.norm() < 1e-12 * std::sqrt(nf));
    CHECK(np <= nf);
  }
}

TEST_CASE("facet traces of the projection") {
  const Box bx = box(0.0, 1.0, 0.0, 1.0);
  const auto eb = TensorBasis::element(1, 2);
  const auto fb = TensorBasis::facet(1, 2, 1);
  auto f = [](const Point& x) { return 1.0 + x[0] + x[1] * x[1] - x[0] * x[1]; };
  const auto ce = l2_project(eb, bx, f, 5);
  const Box face = box(0.0, 1.0, 1.0, 1.0);
  const auto cf = l2_project(fb, face, f, 5, 1);
  for (double t : {0.1, 0.5, 0.9}) {
    const Point x{t, 1.0, 0.0};
    CHECK(evaluate_expansion(eb, bx, ce.data(), x) == doctest::Approx(evaluate_expansion(fb, face, cf.data(), x)));
  }
}

TEST_CASE("mapped rules cover the physical box") {
  const Box bx = box(0.0, 2.0, -1.0, 3.0, 0.0, 0.5);
  double vol = 0.0;
  for (const auto& q : map_rule(gauss_rule(3, 3), bx, 3)) {
    CHECK(bx.contains(q.x, 3));
    vol += q.w;
  }
  CHECK(vol == doctest::Approx(bx.measure(3)));
  double area = 0.0;
  for (const auto& q : map_rule(gauss_rule(3, 2), bx, 3, 1)) area += q.w;
  CHECK(area == doctest::Approx(bx.measure(3, 1)));
}

TEST_CASE("Gauss-Lobatto nodes include the end points") {
  const auto n = gauss_lobatto_nodes(4);
  REQUIRE(n.size() == 4);
  CHECK(n.front() == doctest::Approx(-1.0));
  CHECK(n.back() == doctest::Approx(1.0));
  CHECK(n[1] == doctest::Approx(-1.0 / std::sqrt(5.0)));
}
