#pragma once

#include "sthdg/fe.hpp"
#include "sthdg/mesh.hpp"
#include "sthdg/problem.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <vector>

namespace sthdg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

struct DofMap {
  int element_size = 0;
  std::size_t n_element_dofs = 0;
  std::vector<std::int64_t> facet_offset;  // n_facets + 1 entries, global indices
  std::vector<char> dirichlet;             // per facet
  std::size_t n_dofs = 0;

  std::int64_t element_offset(int k) const { return static_cast<std::int64_t>(k) * element_size; }
  int facet_size(int f) const { return static_cast<int>(facet_offset[f + 1] - facet_offset[f]); }
};

// Mesh, bases and dof numbering of V_h x M_h. Holds a pointer to the mesh,
// which must outlive the space.
class HdgSpace {
 public:
  HdgSpace(const SpaceTimeMesh& mesh, int p_s);

  const SpaceTimeMesh& mesh() const { return *mesh_; }
  int p_s() const { return p_s_; }
  int d() const { return mesh_->spatial_dim(); }
  const TensorBasis& element_basis() const { return element_basis_; }
  const TensorBasis& facet_basis(int normal_axis) const { return facet_basis_[normal_axis]; }
  const DofMap& dofs() const { return dofs_; }
  int assembly_points() const { return std::max(1, p_s_) + 2; }
  int estimator_points() const { return assembly_points() + 2; }

 private:
  const SpaceTimeMesh* mesh_;
  int p_s_;
  TensorBasis element_basis_;
  std::array<TensorBasis, kMaxAxes> facet_basis_;
  DofMap dofs_;
};

struct FieldValues {
  double value = 0.0;
  double dt = 0.0;
  Point grad{};  // spatial gradient in entries 1..d
  double laplacian = 0.0;
};

struct DiscreteSolution {
  const HdgSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  FieldValues evaluate(int elem, const Point& x) const;
  double trace(int facet, const Point& x) const;
};

struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::int64_t dim() const { return matrix.rows(); }
};

struct AssemblyOptions {
  bool diffusion = true;
  bool advection = true;
  bool neumann = true;         // zeta^+ boundary term
  bool load = true;            // source and boundary data
  bool dirichlet_rows = true;  // replace Dirichlet facet rows by identity
  double penalty = -1.0;       // alpha; negative selects 8 p_s^2
};

struct FacetUpwind {
  std::vector<double> beta_n;  // samples at facet quadrature points, seen from side
  double beta_s = 0.0;
};

// beta_s = max |beta.n| over quadrature points and vertices of the facet
FacetUpwind facet_upwind_coefficients(const HdgSpace& space, const ProblemSpec& spec, int facet, int side);
double facet_beta_s(const SpaceTimeMesh& mesh, const ProblemSpec& spec, int facet, int n_quad);

// Element-centred local system: rows and columns are the element dofs followed
// by the dofs of every facet on the element boundary.
struct LocalSystem {
  std::vector<std::int64_t> dofs;
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
};

// Global dof list in the order used by local_tensors.
std::vector<std::int64_t> element_dof_list(const HdgSpace& space, int elem);

LocalSystem local_tensors(const HdgSpace& space, const ProblemSpec& spec, int elem,
                          const AssemblyOptions& opts = {});

// Penalty scale used on a facet: h of the finer owner.
double facet_h(const SpaceTimeMesh& mesh, int facet);

SparseSystem assemble(const HdgSpace& space, const ProblemSpec& spec, const AssemblyOptions& opts = {});

// Facet-wise L2 projection of the Dirichlet data, indexed like the global vector.
Eigen::VectorXd dirichlet_values(const HdgSpace& space, const ProblemSpec& spec);

// Local L2 projection / interpolation of an exact field into V_h x M_h.
Eigen::VectorXd project_exact(const HdgSpace& space, const ScalarField& u);

}  // namespace sthdg
