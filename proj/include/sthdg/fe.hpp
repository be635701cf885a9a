#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <vector>

namespace sthdg {

// Space-time coordinates are stored as (t, x1, x2); unused trailing entries stay zero.
inline constexpr int kMaxAxes = 3;
using Point = std::array<double, kMaxAxes>;

struct Box {
  Point lo{};
  Point hi{};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  Point center() const;
  // Measure over the first n_axes axes, skipping skip_axis (facet measure).
  double measure(int n_axes, int skip_axis = -1) const;
  bool contains(const Point& p, int n_axes, double tol = 1e-12) const;
};

struct QuadratureRule {
  int n_axes = 0;
  int exactness = 0;  // per-axis polynomial degree integrated exactly
  std::vector<Point> points;
  std::vector<double> weights;
};

// Gauss-Legendre nodes and weights on [-1,1].
void gauss_legendre_1d(int n, std::vector<double>& x, std::vector<double>& w);
// Gauss-Lobatto nodes on [-1,1], n >= 2.
std::vector<double> gauss_lobatto_nodes(int n);

QuadratureRule gauss_rule(int n_points_per_axis, int n_axes);
// Shared immutable copy of gauss_rule(n, k).
const QuadratureRule& cached_gauss_rule(int n_points_per_axis, int n_axes);

struct QPoint {
  Point x;
  double w;
};

// Map a rule on [-1,1]^k onto the physical box. With skip_axis >= 0 the box is
// degenerate in that axis and the rule has k = n_axes - 1 tangential axes.
std::vector<QPoint> map_rule(const QuadratureRule& rule, const Box& box, int n_axes,
                             int skip_axis = -1);

class LagrangeBasis1D {
 public:
  explicit LagrangeBasis1D(int degree);
  int degree() const { return degree_; }
  const std::vector<double>& nodes() const { return nodes_; }
  // values, first and second derivatives at x in [-1,1]; arrays sized degree+1
  void evaluate(double x, double* v, double* d1, double* d2) const;

 private:
  int degree_;
  std::vector<double> nodes_;
  std::vector<double> denom_;
};

struct BasisValues {
  std::vector<double> value;
  std::vector<Point> grad;  // physical derivative per axis
  std::vector<Point> hess;  // pure second derivative per axis

  double dt(int i) const { return grad[i][0]; }
  double laplacian(int i, int d) const {
    double s = 0.0;
    for (int a = 1; a <= d; ++a) s += hess[i][a];
    return s;
  }
};

// Nodal tensor-product basis over the space-time axes. A facet basis uses
// degree 0 in its normal axis, so element and facet shape functions share
// one evaluation path.
class TensorBasis {
 public:
  TensorBasis() = default;
  TensorBasis(int n_axes, std::array<int, kMaxAxes> degrees);

  static TensorBasis element(int d, int p_s, int p_t = 1);
  static TensorBasis facet(int d, int p_s, int normal_axis, int p_t = 1);

  int size() const { return size_; }
  int n_axes() const { return n_axes_; }
  int degree(int axis) const { return degrees_[axis]; }
  int max_degree() const;

  // Reference evaluation, xi in [-1,1]^n_axes.
  void evaluate_reference(const Point& xi, BasisValues& out) const;
  // Physical evaluation on an axis-aligned box.
  void evaluate(const Box& box, const Point& x, BasisValues& out) const;
  // Interpolation nodes in physical coordinates (degenerate axes at lo).
  std::vector<Point> nodes(const Box& box) const;

 private:
  int n_axes_ = 0;
  int size_ = 0;
  std::array<int, kMaxAxes> degrees_{};
  std::vector<LagrangeBasis1D> axis_basis_;
};

using ScalarField = std::function<double(const Point&)>;

Eigen::MatrixXd mass_matrix(const TensorBasis& basis, const Box& box, int n_quad,
                            int skip_axis = -1);
// Local L2 projection onto the span of basis on box (element or facet).
Eigen::VectorXd l2_project(const TensorBasis& basis, const Box& box, const ScalarField& field,
                           int n_quad, int skip_axis = -1);
// Nodal interpolation.
Eigen::VectorXd interpolate(const TensorBasis& basis, const Box& box, const ScalarField& field);

double evaluate_expansion(const TensorBasis& basis, const Box& box, const double* coeffs,
                          const Point& x);

}  // namespace sthdg
