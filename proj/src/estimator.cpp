#include "sthdg/estimator.hpp"

#include "sthdg/parallel.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sthdg {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::diffusive: return "d";
    case Regime::mixed: return "x";
    case Regime::convective: return "c";
  }
  return "?";
}

RegimeWeights regime_and_weights(double h, double dt, double slab_dt, double eps) {
  RegimeWeights w;
  if (dt > eps) {
    w.regime = Regime::convective;
    w.eps_tilde = eps;
  } else if (h > eps) {
    w.regime = Regime::mixed;
    w.eps_tilde = std::sqrt(eps);
  } else {
    w.regime = Regime::diffusive;
    w.eps_tilde = 1.0;
  }
  w.tau = slab_dt * w.eps_tilde;
  w.lambda = std::min(1.0, h / std::sqrt(eps));
  return w;
}

RegimeWeights regime_and_weights(const Element& e, double eps) {
  return regime_and_weights(e.h, e.dt, e.slab_dt, eps);
}

double interior_residual(const DiscreteSolution& sol, const ProblemSpec& spec, int elem, const Point& x) {
  const auto v = sol.evaluate(elem, x);
  const auto b = spec.beta_bar(x);
  double adv = 0.0;
  for (int a = 0; a < spec.domain.d; ++a) adv += b[a] * v.grad[a + 1];
  const double f = spec.source ? spec.source(x) : 0.0;
  return f + spec.epsilon * v.laplacian - v.dt - adv;
}

double neumann_residual(const DiscreteSolution& sol, const ProblemSpec& spec, int facet, const Point& x) {
  const auto& F = sol.space->mesh().facet(facet);
  if (F.tag != BoundaryTag::neumann && F.tag != BoundaryTag::initial && F.tag != BoundaryTag::final)
    throw std::invalid_argument("Neumann residual requested on a non-Neumann facet");
  const int k = F.owner[0] >= 0 ? F.owner[0] : F.owner[1];
  const auto [axis, sign] = outward_normal(F);
  const auto bd = boundary_data(spec, F, x);
  const auto v = sol.evaluate(k, x);
  const double dudn = axis > 0 ? sign * v.grad[axis] : 0.0;
  return bd.value - spec.epsilon * dudn + bd.zeta_minus * v.value * bd.beta_n;
}

double ElementEstimate::sum_of_squares() const {
  return eta_R * eta_R + eta_J1 * eta_J1 + eta_J21 * eta_J21 + eta_J22 * eta_J22 + eta_J3Q * eta_J3Q +
         eta_J3R * eta_J3R + eta_BC1 * eta_BC1 + eta_BC2 * eta_BC2;
}

namespace {

bool is_neumann(BoundaryTag t) {
  return t == BoundaryTag::neumann || t == BoundaryTag::initial || t == BoundaryTag::final;
}

std::vector<double> all_beta_s(const HdgSpace& space, const ProblemSpec& spec) {
  const auto& mesh = space.mesh();
  std::vector<double> bs(mesh.n_facets());
  parallel_for(mesh.n_facets(), [&](std::size_t f) {
    bs[f] = facet_beta_s(mesh, spec, static_cast<int>(f), space.assembly_points());
  });
  return bs;
}

// ||(I - Pi) r||^2 on a box for samples r at the given points
double projection_defect(const TensorBasis& basis, const Box& box, const std::vector<QPoint>& qp,
                         const std::vector<double>& r) {
  const int n = basis.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  std::vector<std::vector<double>> phi(qp.size());
  BasisValues bv;
  for (std::size_t q = 0; q < qp.size(); ++q) {
    basis.evaluate(box, qp[q].x, bv);
    phi[q] = bv.value;
    for (int i = 0; i < n; ++i) {
      b[i] += qp[q].w * r[q] * bv.value[i];
      for (int j = 0; j < n; ++j) M(i, j) += qp[q].w * bv.value[i] * bv.value[j];
    }
  }
  const Eigen::VectorXd c = M.llt().solve(b);
  double s = 0.0;
  for (std::size_t q = 0; q < qp.size(); ++q) {
    double p = 0.0;
    for (int i = 0; i < n; ++i) p += c[i] * phi[q][i];
    s += qp[q].w * (r[q] - p) * (r[q] - p);
  }
  return s;
}

}  // namespace

EstimateResult estimate(const DiscreteSolution& sol, const ProblemSpec& spec) {
  const auto& space = *sol.space;
  const auto& mesh = space.mesh();
  const int D = mesh.dim();
  const int ne = space.estimator_points();
  const double eps = spec.epsilon;
  const auto beta_s = all_beta_s(space, spec);

  EstimateResult res;
  res.elements.resize(mesh.n_elements());
  parallel_for(mesh.n_elements(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const auto& K = mesh.element(k);
    ElementEstimate est;
    est.weights = regime_and_weights(K, eps);
    const double lam = est.weights.lambda;
    const double h = K.h;

    const auto qp = map_rule(cached_gauss_rule(ne, D), K.box, D);
    std::vector<double> r(qp.size());
    double rr = 0.0;
    for (std::size_t q = 0; q < qp.size(); ++q) {
      r[q] = interior_residual(sol, spec, k, qp[q].x);
      rr += qp[q].w * r[q] * r[q];
    }
    est.eta_R = lam * std::sqrt(rr);
    est.osc_K = lam * std::sqrt(std::max(0.0, projection_defect(space.element_basis(), K.box, qp, r)));

    double j1 = 0.0, jq = 0.0, j3q = 0.0, j3r = 0.0, bc1 = 0.0, bc2 = 0.0, oscn = 0.0;
    for (int face = 0; face < 2 * D; ++face) {
      const int axis = face / 2;
      const double sign = (face % 2) ? 1.0 : -1.0;
      for (int f : mesh.face_facets(k, face)) {
        const auto& F = mesh.facet(f);
        const auto fq = map_rule(cached_gauss_rule(ne, D - 1), F.box, D, axis);
        const int other = F.owner[0] == k ? F.owner[1] : F.owner[0];
        std::vector<double> rn;
        if (is_neumann(F.tag)) rn.resize(fq.size());
        for (std::size_t q = 0; q < fq.size(); ++q) {
          const auto& x = fq[q].x;
          const double w = fq[q].w;
          const auto v = sol.evaluate(k, x);
          const double jump = v.value - sol.trace(f, x);
          const double bn = sign * spec.beta(x)[axis];
          const double weight = std::abs(beta_s[f] - 0.5 * bn);
          if (axis > 0) {
            jq += w * jump * jump;
            j3q += w * weight * jump * jump;
            if (other >= 0) {
              const auto vo = sol.evaluate(other, x);
              const double gj = sign * (v.grad[axis] - vo.grad[axis]);
              j1 += w * gj * gj;
            }
          } else {
            j3r += w * weight * jump * jump;
          }
          if (!rn.empty()) {
            rn[q] = neumann_residual(sol, spec, f, x);
            if (axis > 0)
              bc1 += w * rn[q] * rn[q];
            else if (F.tag == BoundaryTag::initial)
              bc2 += w * rn[q] * rn[q];
          }
        }
        if (!rn.empty() && axis > 0)
          oscn += projection_defect(space.facet_basis(axis), F.box, fq, rn);
      }
    }
    est.eta_J1 = std::sqrt(h * eps * j1);
    est.eta_J21 = std::sqrt(eps / h * jq);
    est.eta_J22 = std::sqrt(std::sqrt(h) / eps * jq);
    est.eta_J3Q = std::sqrt(j3q);
    est.eta_J3R = std::sqrt(j3r);
    est.eta_BC1 = std::sqrt(h / eps * bc1);
    est.eta_BC2 = std::sqrt(bc2);
    est.osc_N = std::sqrt(h / eps * std::max(0.0, oscn));
    est.eta = std::sqrt(est.sum_of_squares());
    res.elements[kk] = est;
  });
  for (const auto& e : res.elements) res.sum_element_squares += e.eta * e.eta;
  // global sum per term type, independent of the per-element totals
  std::array<double, 8> per_term{};
  for (const auto& e : res.elements) {
    const std::array<double, 8> t{e.eta_R, e.eta_J1, e.eta_J21, e.eta_J22, e.eta_J3Q, e.eta_J3R, e.eta_BC1, e.eta_BC2};
    for (std::size_t i = 0; i < t.size(); ++i) per_term[i] += t[i] * t[i];
  }
  res.eta_squared = std::accumulate(per_term.begin(), per_term.end(), 0.0);
  res.eta = std::sqrt(res.eta_squared);
  return res;
}

NormBreakdown& NormBreakdown::operator+=(const NormBreakdown& o) {
  l2 += o.l2;
  jump += o.jump;
  neumann += o.neumann;
  grad += o.grad;
  penalty += o.penalty;
  time += o.time;
  return *this;
}

ErrorResult discrete_norms(const DiscreteSolution& sol, const ProblemSpec& spec, const ExactSolution* u) {
  const auto& space = *sol.space;
  const auto& mesh = space.mesh();
  const int D = mesh.dim();
  const int d = D - 1;
  const int ne = space.estimator_points();
  const double eps = spec.epsilon;
  const auto beta_s = all_beta_s(space, spec);

  ErrorResult res;
  res.elements.resize(mesh.n_elements());
  parallel_for(mesh.n_elements(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const auto& K = mesh.element(k);
    const auto w8 = regime_and_weights(K, eps);
    NormBreakdown nb;
    for (const auto& q : map_rule(cached_gauss_rule(ne, D), K.box, D)) {
      const auto v = sol.evaluate(k, q.x);
      double e = -v.value, et = -v.dt;
      Point eg{};
      for (int a = 1; a <= d; ++a) eg[a] = -v.grad[a];
      if (u) {
        e += u->value(q.x);
        et += u->dt(q.x);
        const Point g = u->grad(q.x);
        for (int a = 1; a <= d; ++a) eg[a] += g[a];
      }
      double g2 = 0.0;
      for (int a = 1; a <= d; ++a) g2 += eg[a] * eg[a];
      nb.l2 += q.w * e * e;
      nb.grad += q.w * eps * g2;
      nb.time += q.w * w8.tau * et * et;
    }
    for (int face = 0; face < 2 * D; ++face) {
      const int axis = face / 2;
      const double sign = (face % 2) ? 1.0 : -1.0;
      for (int f : mesh.face_facets(k, face)) {
        const auto& F = mesh.facet(f);
        const bool neumann = is_neumann(F.tag);
        for (const auto& q : map_rule(cached_gauss_rule(ne, D - 1), F.box, D, axis)) {
          const double uh = sol.evaluate(k, q.x).value;
          const double lh = sol.trace(f, q.x);
          const double jump = lh - uh;  // [[u - u_h]] with u single valued
          const double bn = sign * spec.beta(q.x)[axis];
          nb.jump += q.w * std::abs(beta_s[f] - 0.5 * bn) * jump * jump;
          if (axis > 0) nb.penalty += q.w * eps / K.h * jump * jump;
          if (neumann) {
            const double mu = (u ? u->value(q.x) : 0.0) - lh;
            nb.neumann += q.w * 0.5 * std::abs(bn) * mu * mu;
          }
        }
      }
    }
    res.elements[kk] = nb;
  });
  for (const auto& nb : res.elements) res.total += nb;
  const double T = spec.domain.t_end;
  res.sT = std::sqrt(res.total.sT2(T));
  res.s = std::sqrt(res.total.s2());
  return res;
}

ErrorResult error_norms(const DiscreteSolution& sol, const ProblemSpec& spec, double eta) {
  if (!spec.exact) throw std::invalid_argument("error norms need an exact solution");
  auto res = discrete_norms(sol, spec, &*spec.exact);
  if (eta >= 0.0) {
    constexpr double tiny = 1e-10;
    if (res.sT <= tiny) {
      res.degenerate = true;
      res.eff_index = eta <= tiny ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
    } else {
      res.eff_index = eta / res.sT;
    }
  }
  return res;
}

std::vector<double> local_efficiency_ratios(const SpaceTimeMesh& mesh, const EstimateResult& est,
                                            const ErrorResult& err, double eps, double T) {
  std::vector<double> out(mesh.n_elements(), 0.0);
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    auto patch = mesh.omega_element(static_cast<int>(k));
    patch.push_back(static_cast<int>(k));
    double denom = est.elements[k].osc_K + est.elements[k].osc_N;
    for (int j : patch) {
      const double et = est.elements[j].weights.eps_tilde;
      denom += std::sqrt(err.elements[j].sT2(T)) / std::sqrt(eps * et);
    }
    out[k] = denom > 0.0 ? est.elements[k].eta / denom : 0.0;
  }
  return out;
}

}  // namespace sthdg
