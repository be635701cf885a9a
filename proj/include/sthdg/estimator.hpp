#pragma once

#include "sthdg/assembly.hpp"

#include <vector>

namespace sthdg {

enum class Regime { diffusive, mixed, convective };  // T_h^d, T_h^x, T_h^c

const char* to_string(Regime r);

struct RegimeWeights {
  Regime regime = Regime::diffusive;
  double eps_tilde = 1.0;
  double tau = 0.0;     // Delta t_K * eps_tilde
  double lambda = 1.0;  // min{1, h eps^{-1/2}}
};

// d: dt <= h <= eps, x: dt <= eps < h, c: eps < dt <= h. Elements with
// dt > h are classified by the same tests on dt and h separately.
RegimeWeights regime_and_weights(double h, double dt, double slab_dt, double eps);
RegimeWeights regime_and_weights(const Element& e, double eps);

// f + eps lap(u_h) - d_t u_h - beta_bar . grad(u_h)
double interior_residual(const DiscreteSolution& sol, const ProblemSpec& spec, int elem, const Point& x);
// g - eps grad(u_h).n + zeta^- u_h beta.n on a Neumann-type facet
double neumann_residual(const DiscreteSolution& sol, const ProblemSpec& spec, int facet, const Point& x);

struct ElementEstimate {
  double eta_R = 0.0;
  double eta_J1 = 0.0;
  double eta_J21 = 0.0;
  double eta_J22 = 0.0;
  double eta_J3Q = 0.0;
  double eta_J3R = 0.0;
  double eta_BC1 = 0.0;
  double eta_BC2 = 0.0;
  double eta = 0.0;
  double osc_K = 0.0;
  double osc_N = 0.0;
  RegimeWeights weights;

  double sum_of_squares() const;
};

struct EstimateResult {
  std::vector<ElementEstimate> elements;
  double eta = 0.0;
  double eta_squared = 0.0;
  double sum_element_squares = 0.0;  // accumulated in element order
};

EstimateResult estimate(const DiscreteSolution& sol, const ProblemSpec& spec);

// Squared contributions of one element to the norms of v = (v, mu).
struct NormBreakdown {
  double l2 = 0.0;       // ||v||_K^2
  double jump = 0.0;     // || |beta_s - beta.n/2|^{1/2} [[v]] ||_{dK}^2
  double neumann = 0.0;  // sum over Neumann facets of || |beta.n/2|^{1/2} mu ||^2
  double grad = 0.0;     // eps ||grad v||_K^2
  double penalty = 0.0;  // eps h^{-1} ||[[v]]||_{Q_K}^2
  double time = 0.0;     // tau_eps ||d_t v||_K^2

  double s2() const { return l2 + jump + neumann + grad + penalty + time; }
  double sT2(double T) const { return l2 + jump + T * neumann + T * grad + penalty + time; }
  NormBreakdown& operator+=(const NormBreakdown& o);
};

struct ErrorResult {
  std::vector<NormBreakdown> elements;
  NormBreakdown total;
  double sT = 0.0;
  double s = 0.0;
  double eff_index = 0.0;  // eta / sT; NaN when both vanish
  bool degenerate = false;
};

// Error u - u_h against the exact solution; eta < 0 skips the efficiency index.
ErrorResult error_norms(const DiscreteSolution& sol, const ProblemSpec& spec, double eta = -1.0);

// Norm pieces of u - v_h for a reference field u; a null reference measures v_h itself.
ErrorResult discrete_norms(const DiscreteSolution& sol, const ProblemSpec& spec, const ExactSolution* reference);

// eta_K / (sum over K and its face neighbours of eps^{-1/2} eps_tilde^{-1/2}
// |||e|||_{sT,h,K'} + osc_K + osc_N) per element
std::vector<double> local_efficiency_ratios(const SpaceTimeMesh& mesh, const EstimateResult& est,
                                            const ErrorResult& err, double eps, double T);

}  // namespace sthdg
