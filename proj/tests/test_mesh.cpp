#include "sthdg/mesh.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

using namespace sthdg;

namespace {

Domain unit_domain(int d) {
  Domain dom;
  dom.d = d;
  return dom;
}

struct Counts {
  int r_initial = 0, r_final = 0, r_interior = 0, q_boundary = 0, q_interior = 0;
};

Counts classify(const SpaceTimeMesh& m) {
  Counts c;
  for (const auto& F : m.facets()) {
    if (F.kind == FacetKind::R) {
      if (F.tag == BoundaryTag::initial) ++c.r_initial;
      else if (F.tag == BoundaryTag::final) ++c.r_final;
      else ++c.r_interior;
    } else {
      (F.boundary() ? c.q_boundary : c.q_interior)++;
    }
  }
  return c;
}

int max_level_jump(const SpaceTimeMesh& m) {
  int worst = 0;
  for (const auto& F : m.facets())
    if (F.owner[0] >= 0 && F.owner[1] >= 0)
      worst = std::max(worst, std::abs(m.element(F.owner[0]).level - m.element(F.owner[1]).level));
  return worst;
}

}  // namespace

TEST_CASE("initial mesh: 2 slabs x 2 cells in 1D") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 2, 2, TimeStepPolicy::proportional);
  CHECK(m.n_elements() == 4);
  const Counts c = classify(m);
  CHECK(c.r_initial == 2);
  CHECK(c.r_final == 2);
  CHECK(c.r_interior == 2);
  CHECK(c.q_boundary == 4);
  CHECK(c.q_interior == 2);
  CHECK(m.check_invariants().empty());
}

TEST_CASE("initial mesh: single box") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 1, 1, TimeStepPolicy::proportional);
  CHECK(m.n_elements() == 1);
  const Counts c = classify(m);
  CHECK(c.r_initial == 1);
  CHECK(c.r_final == 1);
  CHECK(c.q_boundary == 2);
  CHECK(m.n_facets() == 4);
}

TEST_CASE("initial mesh: d = 2 tiles the domain evenly") {
  Domain dom = unit_domain(2);
  dom.t_end = 2.0;
  dom.x_lo = {-0.5, -0.5};
  dom.x_hi = {0.5, 0.5};
  const auto m = SpaceTimeMesh::build(dom, 1, 2, TimeStepPolicy::proportional);
  REQUIRE(m.n_elements() == 4);
  for (const auto& e : m.elements()) CHECK(e.box.measure(3) == doctest::Approx(2.0 / 4).epsilon(1e-14));
  CHECK(m.total_measure() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.check_invariants().empty());
}

TEST_CASE("invalid domains are rejected") {
  Domain dom = unit_domain(1);
  dom.t_end = 0.0;
  CHECK_THROWS_AS(SpaceTimeMesh::build(dom, 1, 1, TimeStepPolicy::proportional), MeshError);
  dom = unit_domain(1);
  dom.x_hi[0] = dom.x_lo[0];
  CHECK_THROWS_AS(SpaceTimeMesh::build(dom, 1, 1, TimeStepPolicy::proportional), MeshError);
  CHECK_THROWS_AS(SpaceTimeMesh::build(unit_domain(1), 0, 1, TimeStepPolicy::proportional), MeshError);
  dom = unit_domain(3);
  CHECK_THROWS_AS(SpaceTimeMesh::build(dom, 1, 1, TimeStepPolicy::proportional), MeshError);
}

TEST_CASE("refining one of four elements gives seven") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 2, 2, TimeStepPolicy::proportional);
  const ElementId id = m.element(0).id;
  const auto r = refine_and_coarsen(m, std::span<const ElementId>(&id, 1), {});
  CHECK(r.n_elements() == 7);
  CHECK(max_level_jump(r) <= 1);
  CHECK(r.check_invariants().empty());
}

TEST_CASE("uniform refinement multiplies the element count by 2^(d+1)") {
  for (int d = 1; d <= 2; ++d) {
    const auto m = SpaceTimeMesh::build(unit_domain(d), 2, 2, TimeStepPolicy::proportional);
    const auto r = refine_uniform(m);
    CHECK(r.n_elements() == m.n_elements() * (std::size_t{1} << (d + 1)));
    CHECK(r.max_level() == 1);
    CHECK(r.check_invariants().empty());
  }
}

TEST_CASE("quadratic policy keeps dt / h^2 across a generation") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 1, 1, TimeStepPolicy::quadratic);
  const auto& parent = m.element(0);
  const ElementId id = parent.id;
  const auto r = refine_and_coarsen(m, std::span<const ElementId>(&id, 1), {});
  REQUIRE(r.n_elements() == 8);
  for (const auto& c : r.elements()) {
    CHECK(c.dt == doctest::Approx(parent.dt / 4));
    CHECK(c.h == doctest::Approx(parent.h / 2));
    CHECK(c.dt / (c.h * c.h) == doctest::Approx(parent.dt / (parent.h * parent.h)));
  }
}

TEST_CASE("patches on a uniform 6 x 6 space-time grid") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 6, 6, TimeStepPolicy::proportional);
  // interior element: time index 2, space index 2
  int interior = -1, corner = -1;
  for (std::size_t k = 0; k < m.n_elements(); ++k) {
    const auto c = m.element(static_cast<int>(k)).box.center();
    if (std::abs(c[0] - 2.5 / 6) < 1e-12 && std::abs(c[1] - 2.5 / 6) < 1e-12) interior = static_cast<int>(k);
    if (std::abs(c[0] - 0.5 / 6) < 1e-12 && std::abs(c[1] - 0.5 / 6) < 1e-12) corner = static_cast<int>(k);
  }
  REQUIRE(interior >= 0);
  REQUIRE(corner >= 0);
  CHECK(m.omega_element(interior).size() == 4);
  CHECK(m.sigma_element(interior).size() == 8);
  CHECK(m.omega_element(corner).size() == 2);
  CHECK(m.sigma_element(corner).size() == 3);
  for (std::size_t f = 0; f < m.n_facets(); ++f)
    if (!m.facet(static_cast<int>(f)).boundary()) CHECK(m.omega_facet(static_cast<int>(f)).size() == 2);
}

TEST_CASE("hanging facet patches include the fine neighbours") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 1, 2, TimeStepPolicy::proportional);
  const ElementId id = m.element(0).id;
  const auto r = refine_and_coarsen(m, std::span<const ElementId>(&id, 1), {});
  bool found = false;
  for (std::size_t f = 0; f < r.n_facets(); ++f) {
    const auto& F = r.facet(static_cast<int>(f));
    if (F.boundary() || F.kind != FacetKind::Q) continue;
    const int l0 = r.element(F.owner[0]).level, l1 = r.element(F.owner[1]).level;
    if (l0 != l1) {
      found = true;
      CHECK(r.omega_facet(static_cast<int>(f)).size() == 3);
    }
  }
  CHECK(found);
}

TEST_CASE("unknown ids raise lookup errors") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 1, 1, TimeStepPolicy::proportional);
  CHECK_THROWS_AS(m.index_of(987654321), MeshError);
  CHECK_FALSE(m.contains(987654321));
}

TEST_CASE("refining nothing returns the same mesh") {
  const auto m = SpaceTimeMesh::build(unit_domain(2), 2, 2, TimeStepPolicy::proportional);
  const auto r = refine_and_coarsen(m, {}, {});
  REQUIRE(r.n_elements() == m.n_elements());
  for (std::size_t k = 0; k < m.n_elements(); ++k) {
    CHECK(r.element(static_cast<int>(k)).id == m.element(static_cast<int>(k)).id);
    CHECK(r.element(static_cast<int>(k)).cell == m.element(static_cast<int>(k)).cell);
  }
}

TEST_CASE("refine then coarsen the children restores the geometry") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 2, 2, TimeStepPolicy::proportional);
  const ElementId id = m.element(1).id;
  const auto r = refine_and_coarsen(m, std::span<const ElementId>(&id, 1), {});
  std::vector<ElementId> kids;
  for (const auto& e : r.elements())
    if (e.level == 1) kids.push_back(e.id);
  REQUIRE(kids.size() == 4);
  RefineLog log;
  const auto back = refine_and_coarsen(r, {}, kids, &log);
  CHECK(log.coarsened_groups == 1);
  REQUIRE(back.n_elements() == m.n_elements());
  std::map<ElementId, LatticeBox> before;
  for (const auto& e : m.elements()) before[e.id] = e.cell;
  for (const auto& e : back.elements()) {
    REQUIRE(before.count(e.id) == 1);
    CHECK(before[e.id] == e.cell);
  }
}

TEST_CASE("partial sibling groups and level-0 coarsening are ignored") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 2, 2, TimeStepPolicy::proportional);
  const ElementId id = m.element(1).id;
  const auto r = refine_and_coarsen(m, std::span<const ElementId>(&id, 1), {});
  std::vector<ElementId> some;
  for (const auto& e : r.elements())
    if (e.level == 1 && some.size() < 2) some.push_back(e.id);
  const auto a = refine_and_coarsen(r, {}, some);
  CHECK(a.n_elements() == r.n_elements());
  const ElementId root = m.element(0).id;
  RefineLog log;
  const auto b = refine_and_coarsen(m, {}, std::span<const ElementId>(&root, 1), &log);
  CHECK(b.n_elements() == m.n_elements());
  CHECK(log.ignored_coarsen >= 1);
}

TEST_CASE("random refinement keeps the invariants") {
  for (int d = 1; d <= 2; ++d)
    for (auto policy : {TimeStepPolicy::proportional, TimeStepPolicy::quadratic}) {
      std::mt19937_64 rng(7 + d);
      auto m = SpaceTimeMesh::build(unit_domain(d), 2, 2, policy);
      for (int step = 0; step < (d == 1 ? 5 : 3); ++step) {
        std::vector<ElementId> ref, crs;
        for (const auto& e : m.elements()) {
          const auto u = rng() % 10;
          if (u < 2) ref.push_back(e.id);
          else if (u < 5) crs.push_back(e.id);
        }
        m = refine_and_coarsen(m, ref, crs);
        INFO("d=" << d << " step " << step);
        CHECK(m.check_invariants().empty());
        CHECK(max_level_jump(m) <= 1);
        CHECK(m.max_time_ratio() <= (policy == TimeStepPolicy::quadratic ? 4096.0 : 64.0));
      }
    }
}

TEST_CASE("child ids are deterministic and invertible") {
  const auto m = SpaceTimeMesh::build(unit_domain(2), 1, 1, TimeStepPolicy::proportional);
  const ElementId root = m.element(0).id;
  const auto r1 = refine_uniform(m);
  const auto r2 = refine_uniform(m);
  for (std::size_t k = 0; k < r1.n_elements(); ++k) {
    CHECK(r1.element(static_cast<int>(k)).id == r2.element(static_cast<int>(k)).id);
    CHECK(r1.parent_id(r1.element(static_cast<int>(k)).id) == root);
    CHECK(SpaceTimeMesh::generation(r1.element(static_cast<int>(k)).id) == 1);
  }
}

TEST_CASE("time split halves every element inside its slab") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 2, 2, TimeStepPolicy::proportional);
  std::vector<std::array<int, 2>> kids;
  const auto f = split_in_time(m, &kids);
  CHECK(f.n_elements() == 2 * m.n_elements());
  CHECK(f.check_invariants().empty());
  for (std::size_t k = 0; k < m.n_elements(); ++k) {
    const auto& p = m.element(static_cast<int>(k));
    const auto& lo = f.element(kids[k][0]);
    const auto& hi = f.element(kids[k][1]);
    CHECK(lo.box.lo[0] == doctest::Approx(p.box.lo[0]));
    CHECK(hi.box.hi[0] == doctest::Approx(p.box.hi[0]));
    CHECK(lo.box.lo[1] == p.box.lo[1]);
    CHECK(lo.slab == p.slab);
    CHECK(lo.dt == doctest::Approx(0.5 * p.slab_dt));
  }
}

TEST_CASE("point location uses half-open boxes") {
  const auto m = SpaceTimeMesh::build(unit_domain(1), 2, 2, TimeStepPolicy::proportional);
  CHECK(m.locate({0, 0, 0}) >= 0);
  CHECK(m.locate({2 * kTimeUnit, 0, 0}) == -1);
  const int k = m.locate({kTimeUnit, kSpaceUnit, 0});
  REQUIRE(k >= 0);
  CHECK(m.element(k).cell.lo[0] == kTimeUnit);
  CHECK(m.element(k).cell.lo[1] == kSpaceUnit);
}
