#include "sthdg/mesh.hpp"

#include "sthdg/log.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace sthdg {

const char* to_string(TimeStepPolicy p) {
  return p == TimeStepPolicy::quadratic ? "quadratic" : "proportional";
}

const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::interior: return "interior";
    case BoundaryTag::dirichlet: return "dirichlet";
    case BoundaryTag::neumann: return "neumann";
    case BoundaryTag::initial: return "initial";
    case BoundaryTag::final: return "final";
  }
  return "?";
}

namespace {

std::int64_t floor_to(std::int64_t v, std::int64_t m) {
  std::int64_t q = v / m;
  if (v % m != 0 && v < 0) --q;
  return q * m;
}

}  // namespace

std::size_t SpaceTimeMesh::KeyHash::operator()(const std::array<std::int64_t, 4>& k) const {
  std::uint64_t h = 1469598103934665603ull;
  for (auto v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

SpaceTimeMesh SpaceTimeMesh::build(const Domain& domain, int n_slabs, int n_space, TimeStepPolicy policy) {
  if (domain.d < 1 || domain.d > 2) throw MeshError("invalid domain: spatial dimension must be 1 or 2");
  if (!(domain.t_end > 0.0)) throw MeshError("invalid domain: final time must be positive");
  for (int a = 0; a < domain.d; ++a)
    if (!(domain.x_hi[a] > domain.x_lo[a])) throw MeshError("invalid domain: empty spatial extent");
  if (n_slabs < 1 || n_space < 1) throw MeshError("invalid domain: need at least one slab and one cell");

  SpaceTimeMesh m;
  m.domain_ = domain;
  m.policy_ = policy;
  m.n_cells_ = n_space;
  m.slab_times_.resize(n_slabs + 1);
  for (int n = 0; n <= n_slabs; ++n) m.slab_times_[n] = domain.t_end * n / n_slabs;
  for (int a = 0; a < domain.d; ++a) m.cell_width_[a] = (domain.x_hi[a] - domain.x_lo[a]) / n_space;

  const int per_slab = domain.d == 1 ? n_space : n_space * n_space;
  m.elements_.reserve(static_cast<std::size_t>(n_slabs) * per_slab);
  for (int n = 0; n < n_slabs; ++n)
    for (int c = 0; c < per_slab; ++c) {
      Element e;
      e.id = static_cast<ElementId>(n) * per_slab + c;
      e.cell.lo[0] = n * kTimeUnit;
      e.cell.hi[0] = (n + 1) * kTimeUnit;
      const int ix[2] = {c % n_space, c / n_space};
      for (int a = 0; a < domain.d; ++a) {
        e.cell.lo[a + 1] = ix[a] * kSpaceUnit;
        e.cell.hi[a + 1] = (ix[a] + 1) * kSpaceUnit;
      }
      m.elements_.push_back(e);
    }
  if (m.elements_.size() >= (std::size_t{1} << 58)) throw MeshError("too many root elements");
  for (auto& e : m.elements_) m.make_physical(e);
  m.finalize();
  return m;
}

SpaceTimeMesh build_initial_mesh(const Domain& domain, int n_slabs, int n_space, TimeStepPolicy policy) {
  return SpaceTimeMesh::build(domain, n_slabs, n_space, policy);
}

Box SpaceTimeMesh::physical_box(const LatticeBox& c) const {
  auto time_coord = [&](std::int64_t lat) {
    const std::int64_t n = lat / kTimeUnit;
    const std::int64_t r = lat % kTimeUnit;
    if (r == 0) return slab_times_[n];
    return slab_times_[n] + (slab_times_[n + 1] - slab_times_[n]) * (static_cast<double>(r) / kTimeUnit);
  };
  auto space_coord = [&](int a, std::int64_t lat) {
    if (lat == static_cast<std::int64_t>(n_cells_) * kSpaceUnit) return domain_.x_hi[a];
    return domain_.x_lo[a] + cell_width_[a] * (static_cast<double>(lat) / kSpaceUnit);
  };
  Box b;
  b.lo[0] = time_coord(c.lo[0]);
  b.hi[0] = time_coord(c.hi[0]);
  for (int a = 0; a < domain_.d; ++a) {
    b.lo[a + 1] = space_coord(a, c.lo[a + 1]);
    b.hi[a + 1] = space_coord(a, c.hi[a + 1]);
  }
  return b;
}

void SpaceTimeMesh::make_physical(Element& e) const {
  e.box = physical_box(e.cell);
  e.slab = static_cast<int>(e.cell.lo[0] / kTimeUnit);
  e.h = 0.0;
  for (int a = 1; a <= domain_.d; ++a) e.h = std::max(e.h, e.box.extent(a));
  e.dt = e.box.extent(0);
  e.slab_dt = slab_times_[e.slab + 1] - slab_times_[e.slab];
}

int SpaceTimeMesh::child_bits() const {
  int b = 0;
  while ((1 << b) < children_per_refinement()) ++b;
  return b;
}

ElementId SpaceTimeMesh::child_id(ElementId parent, int child) const {
  const int gen = generation(parent);
  const ElementId payload = parent & ((ElementId{1} << 58) - 1);
  const int bits = child_bits();
  if (gen >= 63 || (payload >> (58 - bits)) != 0) throw MeshError("element id overflow: refinement too deep");
  return (static_cast<ElementId>(gen + 1) << 58) | (payload << bits) | static_cast<ElementId>(child);
}

ElementId SpaceTimeMesh::parent_id(ElementId child) const {
  const int gen = generation(child);
  if (gen == 0) throw MeshError("root element has no parent");
  const ElementId payload = child & ((ElementId{1} << 58) - 1);
  return (static_cast<ElementId>(gen - 1) << 58) | (payload >> child_bits());
}

int SpaceTimeMesh::index_of(ElementId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw MeshError("unknown element id " + std::to_string(id));
  return it->second;
}

SpaceTimeMesh SpaceTimeMesh::with_elements(std::vector<Element> elements) const {
  SpaceTimeMesh m;
  m.domain_ = domain_;
  m.policy_ = policy_;
  m.n_cells_ = n_cells_;
  m.slab_times_ = slab_times_;
  m.cell_width_ = cell_width_;
  m.elements_ = std::move(elements);
  for (auto& e : m.elements_) m.make_physical(e);
  m.finalize();
  return m;
}

void SpaceTimeMesh::finalize() {
  std::sort(elements_.begin(), elements_.end(), [](const Element& a, const Element& b) {
    if (a.slab != b.slab) return a.slab < b.slab;
    return a.id < b.id;
  });
  index_.clear();
  index_.reserve(elements_.size() * 2);
  lookup_.clear();
  lookup_.reserve(elements_.size() * 2);
  size_classes_.clear();
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const auto& e = elements_[i];
    if (!index_.emplace(e.id, static_cast<int>(i)).second)
      throw MeshError("duplicate element id " + std::to_string(e.id));
    const SizeClass sc{e.cell.size(1), e.cell.size(0)};
    int ci = -1;
    for (std::size_t k = 0; k < size_classes_.size(); ++k)
      if (size_classes_[k].space == sc.space && size_classes_[k].time == sc.time) ci = static_cast<int>(k);
    if (ci < 0) {
      ci = static_cast<int>(size_classes_.size());
      size_classes_.push_back(sc);
    }
    lookup_[{e.cell.lo[0], e.cell.lo[1], e.cell.lo[2], ci}] = static_cast<int>(i);
  }
  build_facets();
}

int SpaceTimeMesh::locate(const std::array<std::int64_t, kMaxAxes>& p) const {
  if (p[0] < 0 || p[0] >= static_cast<std::int64_t>(n_slabs()) * kTimeUnit) return -1;
  for (int a = 1; a <= domain_.d; ++a)
    if (p[a] < 0 || p[a] >= static_cast<std::int64_t>(n_cells_) * kSpaceUnit) return -1;
  for (std::size_t k = 0; k < size_classes_.size(); ++k) {
    const auto& sc = size_classes_[k];
    std::array<std::int64_t, 4> key{floor_to(p[0], sc.time), 0, 0, static_cast<std::int64_t>(k)};
    for (int a = 1; a <= domain_.d; ++a) key[a] = floor_to(p[a], sc.space);
    auto it = lookup_.find(key);
    if (it != lookup_.end()) return it->second;
  }
  return -1;
}

void SpaceTimeMesh::build_facets() {
  const int D = dim();
  facets_.clear();
  face_facets_.assign(elements_.size() * 2 * kMaxAxes, {});

  auto boundary_tag = [&](int axis, int side) {
    if (axis == 0) return side == 0 ? BoundaryTag::initial : BoundaryTag::final;
    return domain_.dirichlet[axis - 1][side] ? BoundaryTag::dirichlet : BoundaryTag::neumann;
  };
  auto add_facet = [&](const LatticeBox& piece, int axis, int below, int above, BoundaryTag tag) {
    Facet f;
    f.kind = axis == 0 ? FacetKind::R : FacetKind::Q;
    f.normal_axis = axis;
    f.tag = tag;
    f.cell = piece;
    f.box = physical_box(piece);
    f.owner = {below, above};
    const auto id = static_cast<std::int32_t>(facets_.size());
    facets_.push_back(f);
    if (below >= 0) face_facets_[below * 2 * kMaxAxes + 2 * axis + 1].push_back(id);
    if (above >= 0) face_facets_[above * 2 * kMaxAxes + 2 * axis].push_back(id);
  };

  // Split the upper face of element k along axis until each piece is covered
  // by a single neighbor.
  std::vector<std::pair<LatticeBox, int>> pieces;
  auto collect = [&](auto&& self, int k, int axis, const LatticeBox& piece) -> void {
    std::array<std::int64_t, kMaxAxes> probe = piece.lo;
    probe[axis] = elements_[k].cell.hi[axis];
    const int nb = locate(probe);
    if (nb < 0) {
      pieces.emplace_back(piece, -1);
      return;
    }
    const auto& nc = elements_[nb].cell;
    for (int b = 0; b < D; ++b) {
      if (b == axis) continue;
      if (nc.size(b) < piece.size(b)) {
        const std::int64_t mid = piece.lo[b] + piece.size(b) / 2;
        LatticeBox lower = piece, upper = piece;
        lower.hi[b] = mid;
        upper.lo[b] = mid;
        self(self, k, axis, lower);
        self(self, k, axis, upper);
        return;
      }
    }
    pieces.emplace_back(piece, nb);
  };

  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& c = elements_[k].cell;
    for (int axis = 0; axis < D; ++axis) {
      if (c.lo[axis] == 0) {
        LatticeBox face = c;
        face.hi[axis] = face.lo[axis];
        add_facet(face, axis, -1, static_cast<int>(k), boundary_tag(axis, 0));
      }
      LatticeBox face = c;
      face.lo[axis] = face.hi[axis];
      pieces.clear();
      collect(collect, static_cast<int>(k), axis, face);
      for (const auto& [piece, nb] : pieces) {
        if (nb < 0)
          add_facet(piece, axis, static_cast<int>(k), -1, boundary_tag(axis, 1));
        else
          add_facet(piece, axis, static_cast<int>(k), nb, BoundaryTag::interior);
      }
    }
  }
}

double SpaceTimeMesh::total_measure() const {
  double s = 0.0;
  for (const auto& e : elements_) s += e.box.measure(dim());
  return s;
}

int SpaceTimeMesh::max_level() const {
  int m = 0;
  for (const auto& e : elements_) m = std::max(m, e.level);
  return m;
}

double SpaceTimeMesh::max_time_ratio() const {
  double r = 0.0;
  for (const auto& e : elements_) r = std::max(r, e.slab_dt / e.dt);
  return r;
}

std::vector<int> SpaceTimeMesh::omega_element(int k) const {
  std::set<int> out;
  for (int face = 0; face < 2 * dim(); ++face)
    for (int f : face_facets(k, face)) {
      const auto& F = facets_[f];
      for (int s = 0; s < 2; ++s)
        if (F.owner[s] >= 0 && F.owner[s] != k) out.insert(F.owner[s]);
    }
  return {out.begin(), out.end()};
}

std::vector<int> SpaceTimeMesh::sigma_element(int k) const {
  const int D = dim();
  const auto& ck = elements_[k].cell;
  auto touches = [&](int j) {
    const auto& cj = elements_[j].cell;
    for (int a = 0; a < D; ++a)
      if (cj.hi[a] < ck.lo[a] || cj.lo[a] > ck.hi[a]) return false;
    return true;
  };
  std::set<int> seen{k};
  std::vector<int> frontier{k};
  // vertex neighbors are reachable through at most D face hops
  for (int hop = 0; hop < D + 1 && !frontier.empty(); ++hop) {
    std::vector<int> next;
    for (int j : frontier)
      for (int n : omega_element(j))
        if (!seen.count(n) && touches(n)) {
          seen.insert(n);
          next.push_back(n);
        }
    frontier = std::move(next);
  }
  seen.erase(k);
  return {seen.begin(), seen.end()};
}

std::vector<int> SpaceTimeMesh::omega_facet(int f) const {
  const auto& F = facets_.at(f);
  std::set<int> out;
  for (int s = 0; s < 2; ++s) {
    const int k = F.owner[s];
    if (k < 0) continue;
    out.insert(k);
    const int face = 2 * F.normal_axis + (s == 0 ? 1 : 0);
    const auto list = face_facets(k, face);
    if (list.size() > 1)
      for (int g : list)
        for (int t = 0; t < 2; ++t)
          if (facets_[g].owner[t] >= 0) out.insert(facets_[g].owner[t]);
  }
  return {out.begin(), out.end()};
}

std::string SpaceTimeMesh::check_invariants() const {
  std::ostringstream err;
  const int D = dim();
  double expected = domain_.t_end;
  for (int a = 0; a < domain_.d; ++a) expected *= domain_.x_hi[a] - domain_.x_lo[a];
  const double total = total_measure();
  if (std::abs(total - expected) > 1e-12 * expected) {
    err << "elements do not tile the domain: " << total << " vs " << expected;
    return err.str();
  }
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    if (e.cell.lo[0] / kTimeUnit != (e.cell.hi[0] - 1) / kTimeUnit) {
      err << "element " << e.id << " crosses a slab boundary";
      return err.str();
    }
    if (!(e.h > 0.0) || !(e.dt > 0.0) || e.dt > e.slab_dt * (1.0 + 1e-14)) {
      err << "element " << e.id << " has invalid extents";
      return err.str();
    }
    double boundary = 0.0, faces = 0.0;
    for (int face = 0; face < 2 * D; ++face) {
      const int axis = face / 2;
      faces += e.box.measure(D, axis);
      double covered = 0.0;
      for (int f : face_facets(static_cast<int>(k), face)) {
        covered += facets_[f].box.measure(D, axis);
        const bool is_r = facets_[f].kind == FacetKind::R;
        if (is_r != (axis == 0)) {
          err << "facet kind inconsistent with its normal";
          return err.str();
        }
      }
      if (std::abs(covered - e.box.measure(D, axis)) > 1e-12 * e.box.measure(D, axis)) {
        err << "facets do not tile face " << face << " of element " << e.id;
        return err.str();
      }
      boundary += covered;
    }
    if (std::abs(boundary - faces) > 1e-12 * faces) {
      err << "facets do not tile the boundary of element " << e.id;
      return err.str();
    }
  }
  for (const auto& F : facets_) {
    if (F.owner[0] >= 0 && F.owner[1] >= 0) {
      if (F.owner[0] == F.owner[1]) return "interior facet with identical owners";
      if (F.tag != BoundaryTag::interior) return "interior facet with boundary tag";
      if (std::abs(elements_[F.owner[0]].level - elements_[F.owner[1]].level) > 1)
        return "1-irregularity violated";
    } else if (F.tag == BoundaryTag::interior) {
      return "boundary facet tagged interior";
    }
  }
  return {};
}

namespace {

std::vector<Element> make_children(const SpaceTimeMesh& mesh, const Element& e) {
  const int d = mesh.spatial_dim();
  const int kt = mesh.time_children();
  const std::int64_t tsize = e.cell.size(0);
  const std::int64_t ssize = e.cell.size(1);
  if (tsize % kt != 0 || tsize / kt < 2 || ssize < 4) throw MeshError("refinement exceeds lattice resolution");
  std::vector<Element> out;
  const int n_space = 1 << d;
  for (int s = 0; s < n_space; ++s)
    for (int it = 0; it < kt; ++it) {
      Element c;
      c.id = mesh.child_id(e.id, it + kt * s);
      c.level = e.level + 1;
      c.time_level = e.time_level + (kt == 4 ? 2 : 1);
      c.cell.lo[0] = e.cell.lo[0] + it * (tsize / kt);
      c.cell.hi[0] = c.cell.lo[0] + tsize / kt;
      for (int a = 1; a <= d; ++a) {
        const int half = (s >> (a - 1)) & 1;
        c.cell.lo[a] = e.cell.lo[a] + half * (ssize / 2);
        c.cell.hi[a] = c.cell.lo[a] + ssize / 2;
      }
      out.push_back(c);
    }
  return out;
}

}  // namespace

SpaceTimeMesh refine_and_coarsen(const SpaceTimeMesh& mesh, std::span<const ElementId> refine,
                                 std::span<const ElementId> coarsen, RefineLog* log) {
  const std::size_t n = mesh.n_elements();
  const auto els = mesh.elements();
  const auto facets = mesh.facets();
  std::vector<char> ref(n, 0), crs(n, 0);
  RefineLog stats;
  for (ElementId id : refine) ref[mesh.index_of(id)] = 1;
  for (ElementId id : coarsen) {
    const int i = mesh.index_of(id);
    if (els[i].level == 0 || SpaceTimeMesh::generation(els[i].id) == 0) {
      ++stats.ignored_coarsen;
      continue;
    }
    if (!ref[i]) crs[i] = 1;
  }
  if (stats.ignored_coarsen > 0)
    log_message(LogLevel::debug, "ignored " + std::to_string(stats.ignored_coarsen) +
                                     " coarsening request(s) on level-0 elements");
  stats.refined = static_cast<std::size_t>(std::count(ref.begin(), ref.end(), 1));

  // closure: refine until levels across every facet differ by at most one
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& F : facets) {
      if (F.owner[0] < 0 || F.owner[1] < 0) continue;
      const int a = F.owner[0], b = F.owner[1];
      const int la = els[a].level + ref[a], lb = els[b].level + ref[b];
      if (la > lb + 1 && !ref[b]) {
        ref[b] = 1;
        changed = true;
      } else if (lb > la + 1 && !ref[a]) {
        ref[a] = 1;
        changed = true;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (ref[i]) crs[i] = 0;
  stats.closure_refined = static_cast<std::size_t>(std::count(ref.begin(), ref.end(), 1)) - stats.refined;

  // complete sibling groups, all marked for coarsening
  std::map<ElementId, std::vector<int>> groups;
  for (std::size_t i = 0; i < n; ++i)
    if (crs[i]) groups[mesh.parent_id(els[i].id)].push_back(static_cast<int>(i));
  const std::size_t n_children = static_cast<std::size_t>(mesh.children_per_refinement());
  std::vector<int> group_of(n, -1);
  std::vector<std::vector<int>> accepted;
  for (auto& [pid, members] : groups) {
    if (members.size() != n_children) continue;
    bool same_kind = true;
    for (int m : members)
      if (els[m].level != els[members[0]].level || els[m].time_level != els[members[0]].time_level)
        same_kind = false;
    if (!same_kind) continue;
    for (int m : members) group_of[m] = static_cast<int>(accepted.size());
    accepted.push_back(members);
  }
  std::vector<char> alive(accepted.size(), 1);
  auto target = [&](int i) {
    if (group_of[i] >= 0 && alive[group_of[i]]) return els[i].level - 1;
    return els[i].level + ref[i];
  };
  changed = true;
  while (changed) {
    changed = false;
    for (std::size_t g = 0; g < accepted.size(); ++g) {
      if (!alive[g]) continue;
      const int merged = els[accepted[g][0]].level - 1;
      bool ok = true;
      for (int m : accepted[g]) {
        for (int face = 0; face < 2 * mesh.dim() && ok; ++face)
          for (int f : mesh.face_facets(m, face)) {
            const auto& F = facets[f];
            const int other = F.owner[0] == m ? F.owner[1] : F.owner[0];
            if (other < 0 || group_of[other] == static_cast<int>(g)) continue;
            if (std::abs(target(other) - merged) > 1) {
              ok = false;
              break;
            }
          }
        if (!ok) break;
      }
      if (!ok) {
        alive[g] = 0;
        changed = true;
      }
    }
  }

  std::vector<Element> out;
  out.reserve(n + stats.refined * n_children);
  for (std::size_t i = 0; i < n; ++i) {
    if (ref[i]) {
      auto kids = make_children(mesh, els[i]);
      out.insert(out.end(), kids.begin(), kids.end());
    } else if (group_of[i] < 0 || !alive[group_of[i]]) {
      out.push_back(els[i]);
    }
  }
  const int dtl = mesh.time_children() == 4 ? 2 : 1;
  for (std::size_t g = 0; g < accepted.size(); ++g) {
    if (!alive[g]) continue;
    ++stats.coarsened_groups;
    Element p = els[accepted[g][0]];
    p.id = mesh.parent_id(p.id);
    p.level -= 1;
    p.time_level -= dtl;
    for (int m : accepted[g])
      for (int a = 0; a < mesh.dim(); ++a) {
        p.cell.lo[a] = std::min(p.cell.lo[a], els[m].cell.lo[a]);
        p.cell.hi[a] = std::max(p.cell.hi[a], els[m].cell.hi[a]);
      }
    out.push_back(p);
  }
  if (log) *log = stats;
  return mesh.with_elements(std::move(out));
}

SpaceTimeMesh refine_uniform(const SpaceTimeMesh& mesh) {
  std::vector<ElementId> all;
  all.reserve(mesh.n_elements());
  for (const auto& e : mesh.elements()) all.push_back(e.id);
  return refine_and_coarsen(mesh, all, {});
}

SpaceTimeMesh split_in_time(const SpaceTimeMesh& mesh, std::vector<std::array<int, 2>>* children) {
  std::vector<Element> out;
  out.reserve(2 * mesh.n_elements());
  for (const auto& e : mesh.elements()) {
    const std::int64_t ts = e.cell.size(0);
    if (ts % 2 != 0 || ts < 4) throw MeshError("time split exceeds lattice resolution");
    for (int it = 0; it < 2; ++it) {
      Element c = e;
      c.id = mesh.child_id(e.id, it);
      c.time_level = e.time_level + 1;
      c.cell.lo[0] = e.cell.lo[0] + it * (ts / 2);
      c.cell.hi[0] = c.cell.lo[0] + ts / 2;
      out.push_back(c);
    }
  }
  SpaceTimeMesh fine = mesh.with_elements(std::move(out));
  if (children) {
    children->resize(mesh.n_elements());
    for (std::size_t k = 0; k < mesh.n_elements(); ++k)
      for (int it = 0; it < 2; ++it)
        (*children)[k][it] = fine.index_of(mesh.child_id(mesh.element(static_cast<int>(k)).id, it));
  }
  return fine;
}

}  // namespace sthdg
