#pragma once

#include "sthdg/fe.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sthdg {

using ElementId = std::uint64_t;

enum class TimeStepPolicy { proportional, quadratic };
enum class FacetKind { Q, R };
enum class BoundaryTag { interior, dirichlet, neumann, initial, final };

const char* to_string(TimeStepPolicy p);
const char* to_string(BoundaryTag t);

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Domain {
  int d = 1;
  double t_end = 1.0;
  std::array<double, 2> x_lo{0.0, 0.0};
  std::array<double, 2> x_hi{1.0, 1.0};
  // dirichlet[axis][side], axis counts spatial axes from 0; false means Neumann
  std::array<std::array<bool, 2>, 2> dirichlet{{{true, true}, {true, true}}};
};

// Integer lattice box. Spatial axes use kSpaceUnit units per initial cell,
// the time axis kTimeUnit units per slab.
struct LatticeBox {
  std::array<std::int64_t, kMaxAxes> lo{};
  std::array<std::int64_t, kMaxAxes> hi{};
  std::int64_t size(int a) const { return hi[a] - lo[a]; }
  bool operator==(const LatticeBox&) const = default;
};

inline constexpr std::int64_t kSpaceUnit = std::int64_t{1} << 24;
inline constexpr std::int64_t kTimeUnit = std::int64_t{1} << 40;

struct Element {
  ElementId id = 0;
  int level = 0;       // spatial refinement generation
  int time_level = 0;  // log2(Delta t_K / delta t_K)
  int slab = 0;
  LatticeBox cell;
  Box box;
  double h = 0.0;        // spatial edge length
  double dt = 0.0;       // element time extent
  double slab_dt = 0.0;  // slab width
};

struct Facet {
  FacetKind kind = FacetKind::Q;
  int normal_axis = 0;
  BoundaryTag tag = BoundaryTag::interior;
  LatticeBox cell;
  Box box;
  // owner[0] lies below the facet along +e_normal, owner[1] above; -1 if absent
  std::array<std::int32_t, 2> owner{-1, -1};

  bool boundary() const { return owner[0] < 0 || owner[1] < 0; }
  // outward normal sign seen from owner[side]
  static double normal_sign(int side) { return side == 0 ? 1.0 : -1.0; }
};

struct RefineLog {
  std::size_t refined = 0;
  std::size_t closure_refined = 0;
  std::size_t coarsened_groups = 0;
  std::size_t ignored_coarsen = 0;
};

class SpaceTimeMesh {
 public:
  static SpaceTimeMesh build(const Domain& domain, int n_slabs, int n_space_per_axis,
                             TimeStepPolicy policy);

  int spatial_dim() const { return domain_.d; }
  int dim() const { return domain_.d + 1; }
  const Domain& domain() const { return domain_; }
  TimeStepPolicy policy() const { return policy_; }
  int n_slabs() const { return static_cast<int>(slab_times_.size()) - 1; }
  int n_cells() const { return n_cells_; }
  const std::vector<double>& slab_times() const { return slab_times_; }
  int time_children() const { return policy_ == TimeStepPolicy::quadratic ? 4 : 2; }
  int children_per_refinement() const { return time_children() << domain_.d; }

  std::span<const Element> elements() const { return elements_; }
  std::span<const Facet> facets() const { return facets_; }
  std::size_t n_elements() const { return elements_.size(); }
  std::size_t n_facets() const { return facets_.size(); }
  const Element& element(int i) const { return elements_[i]; }
  const Facet& facet(int i) const { return facets_[i]; }

  // face = 2*axis + side, side 1 is the upper face along the axis
  std::span<const std::int32_t> face_facets(int elem, int face) const {
    return face_facets_[elem * 2 * kMaxAxes + face];
  }
  int index_of(ElementId id) const;  // throws MeshError on unknown id
  bool contains(ElementId id) const { return index_.count(id) != 0; }

  std::vector<int> omega_element(int elem) const;
  std::vector<int> sigma_element(int elem) const;
  std::vector<int> omega_facet(int facet) const;

  // point location in lattice coordinates, half-open boxes; -1 outside
  int locate(const std::array<std::int64_t, kMaxAxes>& p) const;

  Box physical_box(const LatticeBox& c) const;
  double total_measure() const;
  int max_level() const;
  double max_time_ratio() const;  // max of Delta t_K / delta t_K
  // invariant checks; returns a description of the first violation or empty
  std::string check_invariants() const;

  ElementId child_id(ElementId parent, int child) const;
  ElementId parent_id(ElementId child) const;
  static int generation(ElementId id) { return static_cast<int>(id >> 58); }

  // new mesh from explicit element boxes (used by refinement and subgrid construction)
  SpaceTimeMesh with_elements(std::vector<Element> elements) const;

 private:
  void finalize();
  void build_facets();
  void make_physical(Element& e) const;
  int child_bits() const;

  Domain domain_;
  TimeStepPolicy policy_ = TimeStepPolicy::proportional;
  int n_cells_ = 1;
  std::vector<double> slab_times_;
  std::array<double, 2> cell_width_{};

  std::vector<Element> elements_;
  std::vector<Facet> facets_;
  std::vector<std::vector<std::int32_t>> face_facets_;
  std::unordered_map<ElementId, int> index_;

  struct SizeClass {
    std::int64_t space;
    std::int64_t time;
  };
  std::vector<SizeClass> size_classes_;
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 4>& k) const;
  };
  std::unordered_map<std::array<std::int64_t, 4>, int, KeyHash> lookup_;
};

SpaceTimeMesh build_initial_mesh(const Domain& domain, int n_slabs, int n_space_per_axis,
                                 TimeStepPolicy policy);

SpaceTimeMesh refine_and_coarsen(const SpaceTimeMesh& mesh, std::span<const ElementId> refine,
                                 std::span<const ElementId> coarsen, RefineLog* log = nullptr);

SpaceTimeMesh refine_uniform(const SpaceTimeMesh& mesh);

// Split every element into two halves in time without changing its level.
// children[k] lists the lower and upper half of element k of the coarse mesh.
SpaceTimeMesh split_in_time(const SpaceTimeMesh& mesh, std::vector<std::array<int, 2>>* children);

}  // namespace sthdg
