#pragma once

#include "sthdg/fe.hpp"
#include "sthdg/mesh.hpp"

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace sthdg {

class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExactSolution {
  ScalarField value;
  ScalarField dt;
  std::function<Point(const Point&)> grad;  // spatial gradient in entries 1..d
  ScalarField laplacian;                     // spatial laplacian
};

using AdvectionField = std::function<std::array<double, 2>(const Point&)>;

struct ProblemSpec {
  std::string name;
  double epsilon = 1.0;
  Domain domain;
  AdvectionField beta_bar;  // must be divergence free
  ScalarField source;
  ScalarField dirichlet;        // g_D on the lateral Dirichlet part
  ScalarField initial;          // u(0, .) on Omega_0
  ScalarField lateral_neumann;  // g on the lateral Neumann part; derived from exact if empty
  std::optional<ExactSolution> exact;

  // full space-time advection (1, beta_bar)
  Point beta(const Point& x) const {
    const auto b = beta_bar(x);
    return {1.0, b[0], domain.d > 1 ? b[1] : 0.0};
  }
};

// name in {rotating_pulse, boundary_layer, interior_layer}; d = 1 gives the
// one-dimensional analogue of each benchmark.
ProblemSpec builtin_problem(const std::string& name, double epsilon, int d = 2);

// u = t + x1 (+ x2), constant advection; lies in every discrete space
ProblemSpec linear_problem(int d, double epsilon, std::array<double, 2> beta_bar);

// Exact solution given by callbacks; source, initial and boundary data are
// derived from it.
ProblemSpec manufactured_problem(std::string name, const Domain& domain, double epsilon,
                                 AdvectionField beta_bar, ExactSolution exact);

double manufactured_source(const ProblemSpec& spec, const Point& x);

enum class ConditionKind { dirichlet, neumann };

struct BoundaryValue {
  ConditionKind kind = ConditionKind::neumann;
  double value = 0.0;
  double zeta_minus = 0.0;
  double zeta_plus = 0.0;
  double beta_n = 0.0;
};

// outward normal of a boundary facet as (axis, sign)
std::pair<int, double> outward_normal(const Facet& facet);

BoundaryValue boundary_data(const ProblemSpec& spec, const Facet& facet, const Point& x);

}  // namespace sthdg
