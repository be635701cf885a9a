#pragma once

#include "sthdg/adapt.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sthdg {

// Coarse mesh and its subgrid with every element halved in time.
struct SubgridPair {
  const SpaceTimeMesh* coarse = nullptr;
  SpaceTimeMesh fine;
  std::vector<std::array<int, 2>> children;  // lower and upper half of each coarse element
  std::vector<int> new_facets;               // fine R-facets interior to a coarse element
  std::vector<int> parent;                   // coarse element of each fine element
};

SubgridPair make_subgrid(const SpaceTimeMesh& coarse);

// Linear map gamma from coarse to fine coefficients: element polynomials are
// carried over, surviving facets keep lambda, new facets take the element trace.
// Throws std::invalid_argument if the spaces do not belong to the pair.
Eigen::SparseMatrix<double, Eigen::RowMajor, int> restriction_matrix(const SubgridPair& pair, const HdgSpace& coarse,
                                                                     const HdgSpace& fine);
Eigen::VectorXd subgrid_restrict(const SubgridPair& pair, const HdgSpace& coarse, const HdgSpace& fine,
                                 const Eigen::VectorXd& coarse_coeffs);

struct OrthogonalityReport {
  double value = 0.0;     // max_j |a_fine(u_fine - gamma u_h, gamma phi_j)|
  double scale = 0.0;     // max_j |a_fine(u_fine, gamma phi_j)|
  double relative = 0.0;  // value / scale
};

// Solves on the mesh and on its subgrid. `perturb` adds a constant to every
// fine coefficient before the check.
OrthogonalityReport check_galerkin_orthogonality(const ProblemSpec& spec, const SpaceTimeMesh& mesh, int p_s,
                                                 double perturb = 0.0, SolveMode mode = SolveMode::monolithic);

struct SaturationReport {
  double numerator = 0.0;    // (sum tau ||d_t(u - u_fine)||^2)^{1/2}
  double denominator = 0.0;  // (sum tau ||d_t(u - u_h)||^2)^{1/2}
  double rho = 0.0;
  bool degenerate = false;  // both parts at round-off level
};

SaturationReport measure_saturation(const ProblemSpec& spec, const SpaceTimeMesh& mesh, int p_s,
                                    SolveMode mode = SolveMode::monolithic);

// Averaging into continuous piecewise Q^(1,p) on the finest uniform lattice
// containing the mesh; nodal values are means over the incident elements and
// vanish on the lateral Dirichlet boundary.
class AveragedField {
 public:
  AveragedField(const SpaceTimeMesh& mesh, const TensorBasis& basis, const Eigen::VectorXd& element_coeffs);

  double value(const Point& x) const;
  // ||v - I v||_K for every element
  const std::vector<double>& defect() const { return defect_; }
  // largest difference of I v across lattice cell faces, sampled at face nodes
  double continuity_defect() const;

 private:
  int cell_of(int axis, double x) const;
  Box cell_box(const std::array<int, kMaxAxes>& c) const;
  Eigen::VectorXd cell_coeffs(const std::array<int, kMaxAxes>& c) const;

  const SpaceTimeMesh* mesh_;
  TensorBasis basis_;
  int n_axes_;
  std::array<int, kMaxAxes> n_cells_{};
  std::array<int, kMaxAxes> n_nodes_{};
  std::array<int, kMaxAxes> degree_{};
  std::array<double, kMaxAxes> lo_{}, width_{};
  std::vector<double> nodal_;
  std::vector<double> defect_;
};

struct ConstantReport {
  std::string inequality;
  int level = 0;
  std::size_t samples = 0;
  double constant = 0.0;
};

// sqrt(sum ||v - I v||_K^2) / sqrt(sum_Q h_F ||[[v]]||^2 + sum_R dt_F ||[[v]]||^2)
// maximised over random element fields; Dirichlet Q-facets count with v itself.
ConstantReport oswald_constant(const SpaceTimeMesh& mesh, int p_s, int samples, std::uint64_t seed);

enum class BubbleKind { element, facet };

// Element bubble: prod (1 - xi_a^2)^{2^{D-1}}; facet bubble on a spatial face
// squeezed into a strip of relative width kappa.
double element_bubble(const Point& xi, int n_axes);
double facet_bubble(const Point& xi, int n_axes, int normal_axis, double kappa);

std::vector<ConstantReport> bubble_constants(const Box& element, int d, int p_s, BubbleKind kind, double kappa,
                                             int samples, std::uint64_t seed, int level = 0);

// Inverse, trace and local trace constants per element shape; quasi-interpolation
// only on meshes refined with the quadratic time-step policy; Oswald included.
std::vector<ConstantReport> inequality_constants(const SpaceTimeMesh& mesh, int p_s, int samples,
                                                 std::uint64_t seed);

}  // namespace sthdg
