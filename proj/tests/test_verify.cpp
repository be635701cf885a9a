#include "sthdg/verify.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace sthdg;

namespace {

std::map<std::string, double> by_name(const std::vector<ConstantReport>& reps) {
  std::map<std::string, double> m;
  for (const auto& r : reps) m[r.inequality] = r.constant;
  return m;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = U(rng);
  return v;
}

SpaceTimeMesh pulse_mesh(const ProblemSpec& spec, int slabs, int cells, bool refine) {
  auto m = SpaceTimeMesh::build(spec.domain, slabs, cells, TimeStepPolicy::proportional);
  if (refine) m = refine_and_coarsen(m, std::vector<ElementId>{m.element(0).id}, {});
  return m;
}

}  // namespace

TEST_CASE("subgrid structure") {
  const auto spec = builtin_problem("rotating_pulse", 1e-3, 2);
  const auto m = pulse_mesh(spec, 2, 2, true);
  const auto pair = make_subgrid(m);
  CHECK(pair.fine.n_elements() == 2 * m.n_elements());
  CHECK(pair.new_facets.size() == m.n_elements());
  for (int f : pair.new_facets) CHECK(pair.fine.facet(f).kind == FacetKind::R);
  for (std::size_t k = 0; k < m.n_elements(); ++k) {
    const auto& K = m.element(static_cast<int>(k));
    const auto& lo = pair.fine.element(pair.children[k][0]);
    const auto& hi = pair.fine.element(pair.children[k][1]);
    CHECK(pair.parent[pair.children[k][0]] == static_cast<int>(k));
    CHECK(lo.box.lo[0] == K.box.lo[0]);
    CHECK(hi.box.hi[0] == K.box.hi[0]);
    CHECK(lo.box.hi[0] == doctest::Approx(0.5 * (K.box.lo[0] + K.box.hi[0])));
    for (int a = 1; a <= 2; ++a) {
      CHECK(lo.box.lo[a] == K.box.lo[a]);
      CHECK(hi.box.hi[a] == K.box.hi[a]);
    }
  }
  CHECK(pair.fine.check_invariants().empty());
}

TEST_CASE("restriction of a constant state is constant") {
  const auto spec = builtin_problem("rotating_pulse", 1e-3, 2);
  const auto m = pulse_mesh(spec, 2, 2, true);
  const auto pair = make_subgrid(m);
  const HdgSpace vc(m, 2), vf(pair.fine, 2);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(vc.dofs().n_dofs), 3.5);
  const auto r = subgrid_restrict(pair, vc, vf, c);
  REQUIRE(r.size() == static_cast<Eigen::Index>(vf.dofs().n_dofs));
  CHECK((r.array() - 3.5).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(subgrid_restrict(pair, vf, vc, c), std::invalid_argument);
  CHECK_THROWS_AS(subgrid_restrict(pair, vc, vf, c.head(5)), std::invalid_argument);
}

TEST_CASE("new facets take the element trace") {
  const auto spec = builtin_problem("boundary_layer", 1e-2, 1);
  const auto m = SpaceTimeMesh::build(spec.domain, 2, 3, TimeStepPolicy::proportional);
  const auto pair = make_subgrid(m);
  const HdgSpace vc(m, 2), vf(pair.fine, 2);
  std::mt19937_64 rng(51);
  const Eigen::VectorXd c = random_vector(static_cast<Eigen::Index>(vc.dofs().n_dofs), rng);
  const DiscreteSolution coarse{&vc, c};
  const DiscreteSolution fine{&vf, subgrid_restrict(pair, vc, vf, c)};
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int f : pair.new_facets) {
    const auto& F = pair.fine.facet(f);
    const int parent = pair.parent[F.owner[0]];
    for (int s = 0; s < 5; ++s) {
      Point x = F.box.lo;
      x[1] += U(rng) * F.box.extent(1);
      CHECK(std::abs(fine.trace(f, x) - coarse.evaluate(parent, x).value) < 1e-12);
    }
  }
  // element fields are carried over
  for (std::size_t k = 0; k < pair.fine.n_elements(); ++k) {
    const Point x = pair.fine.element(static_cast<int>(k)).box.center();
    CHECK(std::abs(fine.evaluate(static_cast<int>(k), x).value - coarse.evaluate(pair.parent[k], x).value) < 1e-12);
  }
}

TEST_CASE("bilinear form is preserved by the restriction") {
  const auto spec = builtin_problem("rotating_pulse", 1e-2, 2);
  const auto m = pulse_mesh(spec, 2, 2, true);
  const auto pair = make_subgrid(m);
  const HdgSpace vc(m, 1), vf(pair.fine, 1);
  AssemblyOptions raw;
  raw.dirichlet_rows = false;
  raw.load = false;
  const auto Ac = assemble(vc, spec, raw).matrix;
  const auto Af = assemble(vf, spec, raw).matrix;
  const auto G = restriction_matrix(pair, vc, vf);
  std::mt19937_64 rng(52);
  for (int s = 0; s < 20; ++s) {
    const Eigen::VectorXd u = random_vector(Ac.cols(), rng), v = random_vector(Ac.cols(), rng);
    const double a = v.dot(Ac * u);
    const double b = (G * v).dot(Af * (G * u));
    CHECK(std::abs(a - b) <= 1e-10 * v.cwiseAbs().dot(Ac.cwiseAbs() * u.cwiseAbs()));
  }
}

TEST_CASE("Galerkin orthogonality") {
  SUBCASE("single element") {
    const auto spec = builtin_problem("interior_layer", 1e-2, 2);
    const auto m = SpaceTimeMesh::build(spec.domain, 1, 1, TimeStepPolicy::proportional);
    const auto rep = check_galerkin_orthogonality(spec, m, 1);
    CHECK(rep.value <= 1e-11 * std::max(1.0, rep.scale));
  }
  SUBCASE("refined pulse mesh and teeth") {
    const auto spec = builtin_problem("rotating_pulse", 1e-3, 2);
    const auto m = pulse_mesh(spec, 2, 2, true);
    const auto rep = check_galerkin_orthogonality(spec, m, 1);
    CHECK(rep.relative <= 1e-9);
    const auto bad = check_galerkin_orthogonality(spec, m, 1, 1e-3);
    CHECK(bad.relative > 1e3 * rep.relative);
    CHECK(bad.value > 1e-6);
  }
}

TEST_CASE("saturation") {
  SUBCASE("linear solution is flagged") {
    const auto spec = linear_problem(1, 1e-2, {0.5, 0.0});
    const auto m = SpaceTimeMesh::build(spec.domain, 2, 2, TimeStepPolicy::proportional);
    const auto rep = measure_saturation(spec, m, 1);
    CHECK(rep.degenerate);
    CHECK(rep.numerator <= 1e-10);
    CHECK(rep.denominator <= 1e-10);
  }
  SUBCASE("pulse on a moderate mesh") {
    const auto spec = builtin_problem("rotating_pulse", 1e-3, 1);
    const auto m = SpaceTimeMesh::build(spec.domain, 8, 16, TimeStepPolicy::proportional);
    const auto rep = measure_saturation(spec, m, 1);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.rho > 0.0);
    CHECK(rep.rho < 1.0);
  }
}

TEST_CASE("averaging of a two-element step") {
  Domain dom;
  dom.d = 1;
  dom.dirichlet = {{{false, false}, {false, false}}};
  const auto m = SpaceTimeMesh::build(dom, 1, 2, TimeStepPolicy::proportional);
  const auto basis = TensorBasis::element(1, 1);
  Eigen::VectorXd c(2 * basis.size());
  const int left = m.element(0).box.lo[1] < 0.25 ? 0 : 1;
  c.segment(left * basis.size(), basis.size()).setZero();
  c.segment((1 - left) * basis.size(), basis.size()).setOnes();
  const AveragedField avg(m, basis, c);
  for (double t : {0.0, 0.3, 1.0}) {
    CHECK(avg.value({t, 0.5, 0.0}) == doctest::Approx(0.5));
    CHECK(avg.value({t, 0.0, 0.0}) == doctest::Approx(0.0));
    CHECK(avg.value({t, 1.0, 0.0}) == doctest::Approx(1.0));
  }
  CHECK(avg.continuity_defect() < 1e-12);
  CHECK(avg.defect()[0] > 0.0);
}

TEST_CASE("averaging fixes continuous fields with zero Dirichlet trace") {
  Domain dom;
  dom.d = 2;
  const auto base = SpaceTimeMesh::build(dom, 2, 2, TimeStepPolicy::proportional);
  const auto m = refine_and_coarsen(base, std::vector<ElementId>{base.element(1).id}, {});
  const auto basis = TensorBasis::element(2, 2);
  auto u = [](const Point& p) { return (1.0 + p[0]) * p[1] * (1.0 - p[1]) * p[2] * (1.0 - p[2]); };
  Eigen::VectorXd c(static_cast<Eigen::Index>(m.n_elements()) * basis.size());
  for (std::size_t k = 0; k < m.n_elements(); ++k)
    c.segment(static_cast<Eigen::Index>(k) * basis.size(), basis.size()) =
        interpolate(basis, m.element(static_cast<int>(k)).box, u);
  const AveragedField avg(m, basis, c);
  for (double d : avg.defect()) CHECK(d <= 1e-12);
  CHECK(avg.continuity_defect() <= 1e-12);
  CHECK(avg.value({0.3, 0.4, 0.7}) == doctest::Approx(u({0.3, 0.4, 0.7})).epsilon(1e-12));
  CHECK(oswald_constant(m, 1, 3, 7).constant > 0.0);
}

TEST_CASE("element bubble") {
  for (int D = 2; D <= 3; ++D) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int s = 0; s < 50; ++s) {
      Point xi{U(rng), U(rng), U(rng)};
      xi[s % D] = (s & 1) ? 1.0 : -1.0;
      CHECK(std::abs(element_bubble(xi, D)) <= 1e-12);
    }
    double peak = 0.0;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j)
        for (int k = 0; k <= (D > 2 ? 20 : 0); ++k) {
          const Point xi{-1.0 + 0.1 * i, -1.0 + 0.1 * j, D > 2 ? -1.0 + 0.1 * k : 0.0};
          const double b = element_bubble(xi, D);
          CHECK(b >= 0.0);
          peak = std::max(peak, b);
        }
    CHECK(std::abs(peak - 1.0) <= 1e-3);
  }
}

TEST_CASE("facet bubble") {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (double kappa : {1.0, 0.25}) {
    double peak = 0.0;
    for (int s = 0; s < 400; ++s) {
      const Point xi{U(rng), U(rng), 0.0};
      const double b = facet_bubble(xi, 2, 1, kappa);
      CHECK(b >= 0.0);
      peak = std::max(peak, b);
      // vanishes on every face except the one it lives on
      CHECK(std::abs(facet_bubble({-1.0, xi[1], 0.0}, 2, 1, kappa)) <= 1e-12);
      CHECK(std::abs(facet_bubble({1.0, xi[1], 0.0}, 2, 1, kappa)) <= 1e-12);
    }
    CHECK(peak <= 1.0 + 1e-12);
  }
  const Box b{{0.0, 0.0, 0.0}, {0.5, 0.25, 0.0}};
  CHECK_THROWS_AS(bubble_constants(b, 1, 1, BubbleKind::facet, 0.0, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(bubble_constants(b, 1, 1, BubbleKind::facet, 1.5, 10, 1), std::invalid_argument);
}

TEST_CASE("bubble constants are level independent") {
  const Box b0{{0.0, 0.0, 0.0}, {0.5, 0.5, 0.0}};
  const Box b1{{0.0, 0.0, 0.0}, {0.25, 0.25, 0.0}};
  const auto c0 = by_name(bubble_constants(b0, 1, 1, BubbleKind::element, 1.0, 50, 3, 0));
  const auto c1 = by_name(bubble_constants(b1, 1, 1, BubbleKind::element, 1.0, 50, 3, 1));
  REQUIRE(c0.count("bubble_c2"));
  CHECK(c0.at("bubble_c2") > 0.0);
  CHECK(std::abs(c1.at("bubble_c2") / c0.at("bubble_c2") - 1.0) <= 0.01);
  for (const auto& [name, v] : c0) {
    CHECK(v > 0.0);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("inverse and trace constants under uniform refinement") {
  Domain dom;
  dom.d = 1;
  const auto m0 = SpaceTimeMesh::build(dom, 2, 2, TimeStepPolicy::proportional);
  const auto m1 = refine_uniform(m0);
  const auto c0 = by_name(inequality_constants(m0, 1, 100, 9));
  const auto c1 = by_name(inequality_constants(m1, 1, 100, 9));
  REQUIRE(c0.count("inv_dt"));
  CHECK(std::abs(c1.at("inv_dt") / c0.at("inv_dt") - 1.0) <= 0.01);
  // trace_Q is the raw ratio times h^{1/2}, so the raw ratio grows by sqrt 2
  const double raw0 = c0.at("trace_Q") / std::sqrt(m0.element(0).h);
  const double raw1 = c1.at("trace_Q") / std::sqrt(m1.element(0).h);
  CHECK(raw1 / raw0 == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
  for (const auto& [name, v] : c0) {
    CHECK(v > 0.0);
    CHECK(c1.at(name) / v <= 2.0);
    CHECK(v / c1.at(name) <= 2.0);
  }
  CHECK(c0.count("quasi_interp") == 0);
  CHECK(c0.count("inv_lap") == 0);
  const auto q = by_name(inequality_constants(SpaceTimeMesh::build(dom, 2, 2, TimeStepPolicy::quadratic), 2, 20, 9));
  CHECK(q.count("quasi_interp") == 1);
  CHECK(q.count("inv_lap") == 1);
}

TEST_CASE("constant fields have no inverse-inequality left side") {
  const Box b{{0.0, -1.0, 0.0}, {0.1, 0.5, 2.0}};
  const auto basis = TensorBasis::element(2, 2);
  const auto c = interpolate(basis, b, [](const Point&) { return 4.0; });
  BasisValues bv;
  for (const Point& x : {Point{0.05, 0.0, 1.0}, Point{0.01, -0.9, 0.1}}) {
    basis.evaluate(b, x, bv);
    double dt = 0.0, g1 = 0.0, g2 = 0.0, lap = 0.0;
    for (int i = 0; i < basis.size(); ++i) {
      dt += c[i] * bv.grad[i][0];
      g1 += c[i] * bv.grad[i][1];
      g2 += c[i] * bv.grad[i][2];
      lap += c[i] * bv.laplacian(i, 2);
    }
    CHECK(std::abs(dt) < 1e-12);
    CHECK(std::abs(g1) < 1e-12);
    CHECK(std::abs(g2) < 1e-12);
    CHECK(std::abs(lap) < 1e-11);
  }
}
