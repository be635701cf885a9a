#include "sthdg/adapt.hpp"
#include "sthdg/estimator.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sthdg;

namespace {

DiscreteSolution random_solution(const HdgSpace& V, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  DiscreteSolution s;
  s.space = &V;
  s.coeffs.resize(static_cast<Eigen::Index>(V.dofs().n_dofs));
  for (auto& c : s.coeffs) c = U(rng);
  return s;
}

ProblemSpec neumann_linear(int d, double eps) {
  auto spec = linear_problem(d, eps, {0.6, 0.3});
  spec.domain.dirichlet[0][1] = false;
  return spec;
}

}  // namespace

TEST_CASE("regime classification") {
  const auto d = regime_and_weights(1e-2, 1e-4, 2e-4, 1e-2);
  CHECK(d.regime == Regime::diffusive);
  CHECK(d.eps_tilde == 1.0);
  CHECK(d.tau == doctest::Approx(2e-4));
  const auto x = regime_and_weights(1e-1, 1e-4, 1e-4, 1e-2);
  CHECK(x.regime == Regime::mixed);
  CHECK(x.eps_tilde == doctest::Approx(0.1));
  CHECK(x.tau == doctest::Approx(1e-5));
  const auto c = regime_and_weights(1e-1, 5e-2, 5e-2, 1e-3);
  CHECK(c.regime == Regime::convective);
  CHECK(c.eps_tilde == doctest::Approx(1e-3));
  CHECK(std::string(to_string(Regime::mixed)) == "x");
}

TEST_CASE("lambda weight") {
  CHECK(regime_and_weights(0.1, 0.1, 0.1, 0.04).lambda == doctest::Approx(0.5));
  CHECK(regime_and_weights(0.1, 0.1, 0.1, 1.0).lambda == doctest::Approx(0.1));
  CHECK(regime_and_weights(0.1, 0.1, 0.1, 1e-4).lambda == 1.0);
}

TEST_CASE("interior residual of interpolated x^2") {
  Domain dom;
  dom.d = 1;
  ExactSolution ex;
  ex.value = [](const Point& p) { return p[1] * p[1]; };
  ex.dt = [](const Point&) { return 0.0; };
  ex.grad = [](const Point& p) { return Point{0.0, 2 * p[1], 0.0}; };
  ex.laplacian = [](const Point&) { return 2.0; };
  auto spec = manufactured_problem("sq", dom, 1.0, [](const Point&) { return std::array<double, 2>{0.0, 0.0}; }, ex);
  spec.source = [](const Point&) { return 0.0; };
  const auto m = SpaceTimeMesh::build(dom, 1, 2, TimeStepPolicy::proportional);
  const HdgSpace V(m, 2);
  DiscreteSolution s{&V, project_exact(V, ex.value)};
  for (int k = 0; k < 2; ++k) CHECK(interior_residual(s, spec, k, m.element(k).box.center()) == doctest::Approx(2.0));
}

TEST_CASE("Neumann residual on the initial facet is g - u_h") {
  const auto spec = builtin_problem("rotating_pulse", 1e-3, 2);
  const auto m = SpaceTimeMesh::build(spec.domain, 1, 2, TimeStepPolicy::proportional);
  const HdgSpace V(m, 1);
  const auto s = random_solution(V, 41);
  for (int f = 0; f < static_cast<int>(m.n_facets()); ++f) {
    const auto& F = m.facet(f);
    const Point x = F.box.center();
    if (F.tag == BoundaryTag::initial) {
      const int k = F.owner[1];
      CHECK(neumann_residual(s, spec, f, x) ==
            doctest::Approx(spec.initial(x) - s.evaluate(k, x).value).epsilon(1e-14));
    }
    if (F.tag == BoundaryTag::dirichlet || F.tag == BoundaryTag::interior)
      CHECK_THROWS(neumann_residual(s, spec, f, x));
  }
}

TEST_CASE("discrete-exact solution has vanishing estimate") {
  for (int d = 1; d <= 2; ++d) {
    const auto spec = neumann_linear(d, 1e-2);
    const auto base = SpaceTimeMesh::build(spec.domain, 2, 2, TimeStepPolicy::proportional);
    const auto m = refine_and_coarsen(base, std::vector<ElementId>{base.element(0).id}, {});
    const HdgSpace V(m, 1);
    const auto out = solve_on(V, spec, SolveMode::monolithic);
    const auto est = estimate(out.solution, spec);
    CHECK(est.eta <= 1e-9);
    const auto err = error_norms(out.solution, spec, est.eta);
    CHECK(err.sT <= 1e-9);
    CHECK(err.degenerate);
    CHECK(std::isnan(err.eff_index));
  }
}

TEST_CASE("single element has no gradient jump") {
  const auto spec = builtin_problem("boundary_layer", 1e-1, 2);
  const auto m = SpaceTimeMesh::build(spec.domain, 1, 1, TimeStepPolicy::proportional);
  const HdgSpace V(m, 2);
  const auto est = estimate(random_solution(V, 42), spec);
  REQUIRE(est.elements.size() == 1);
  CHECK(est.elements[0].eta_J1 == 0.0);
  CHECK(est.elements[0].eta_J21 > 0.0);
  CHECK(est.elements[0].eta_R > 0.0);
}

TEST_CASE("estimate decomposes over elements") {
  const auto spec = builtin_problem("interior_layer", 1e-2, 2);
  const auto base = SpaceTimeMesh::build(spec.domain, 2, 2, TimeStepPolicy::proportional);
  const auto m = refine_and_coarsen(base, std::vector<ElementId>{base.element(2).id}, {});
  const HdgSpace V(m, 1);
  const auto est = estimate(random_solution(V, 43), spec);
  double sum = 0.0;
  for (const auto& e : est.elements) {
    CHECK(e.eta == doctest::Approx(std::sqrt(e.sum_of_squares())));
    sum += e.sum_of_squares();
  }
  CHECK(std::abs(est.eta_squared - sum) <= 1e-12 * est.eta_squared);
  CHECK(std::abs(est.sum_element_squares - sum) <= 1e-12 * sum);
  CHECK(est.eta == doctest::Approx(std::sqrt(est.eta_squared)));
}

TEST_CASE("norms are homogeneous of degree two") {
  const auto spec = builtin_problem("boundary_layer", 1e-2, 1);
  const auto m = SpaceTimeMesh::build(spec.domain, 2, 3, TimeStepPolicy::proportional);
  const HdgSpace V(m, 2);
  auto s = random_solution(V, 44);
  const auto a = discrete_norms(s, spec, nullptr);
  s.coeffs *= 2.0;
  const auto b = discrete_norms(s, spec, nullptr);
  for (std::size_t k = 0; k < a.elements.size(); ++k) {
    CHECK(b.elements[k].l2 == doctest::Approx(4 * a.elements[k].l2));
    CHECK(b.elements[k].jump == doctest::Approx(4 * a.elements[k].jump));
    CHECK(b.elements[k].neumann == doctest::Approx(4 * a.elements[k].neumann));
    CHECK(b.elements[k].grad == doctest::Approx(4 * a.elements[k].grad));
    CHECK(b.elements[k].penalty == doctest::Approx(4 * a.elements[k].penalty));
    CHECK(b.elements[k].time == doctest::Approx(4 * a.elements[k].time));
  }
  CHECK(b.sT == doctest::Approx(2 * a.sT));
  CHECK(b.s == doctest::Approx(2 * a.s));
}

TEST_CASE("error of the projected exact solution is the projection error") {
  const auto spec = builtin_problem("rotating_pulse", 1e-3, 1);
  const auto m = SpaceTimeMesh::build(spec.domain, 4, 8, TimeStepPolicy::proportional);
  const HdgSpace V(m, 1);
  DiscreteSolution s{&V, project_exact(V, spec.exact->value)};
  const auto err = error_norms(s, spec);
  const auto ref = discrete_norms(s, spec, &*spec.exact);
  CHECK(err.sT == doctest::Approx(ref.sT));
  CHECK(err.sT > 0.0);
  CHECK(err.sT < 1.0);
}

TEST_CASE("reliability ratio and local efficiency stay bounded under AMR") {
  const auto spec = builtin_problem("rotating_pulse", 1e-3, 2);
  StudyOptions opts;
  opts.cycles = 6;
  opts.n_slabs = 2;
  opts.n_cells = 2;
  std::vector<double> worst_local;
  opts.on_cycle = [&](const CycleView& v) { worst_local.push_back(v.record.max_local_efficiency); };
  const auto res = run_study(spec, opts);
  REQUIRE(res.records.size() == 6);
  std::vector<double> rc;
  for (std::size_t i = res.records.size() - 4; i < res.records.size(); ++i)
    rc.push_back(res.records[i].reliability_ratio);
  const auto [lo, hi] = std::minmax_element(rc.begin(), rc.end());
  CHECK(*lo > 0.0);
  CHECK(*hi / *lo <= 10.0);
  for (std::size_t i = 1; i < worst_local.size(); ++i) {
    const double drift = worst_local[i] / worst_local[i - 1];
    CHECK(drift <= 2.0);
    CHECK(drift >= 0.5);
  }
  for (const auto& r : res.records) CHECK(r.decomposition_defect <= 1e-12);
}

TEST_CASE("local efficiency ratios are positive and finite") {
  const auto spec = builtin_problem("boundary_layer", 1e-2, 1);
  const auto m = SpaceTimeMesh::build(spec.domain, 4, 4, TimeStepPolicy::proportional);
  const HdgSpace V(m, 1);
  const auto out = solve_on(V, spec, SolveMode::monolithic);
  const auto est = estimate(out.solution, spec);
  const auto err = error_norms(out.solution, spec, est.eta);
  const auto r = local_efficiency_ratios(m, est, err, spec.epsilon, spec.domain.t_end);
  REQUIRE(r.size() == m.n_elements());
  for (double v : r) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
  CHECK(err.eff_index > 0.0);
}
