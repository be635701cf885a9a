#include "sthdg/assembly.hpp"

#include "sthdg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sthdg {

HdgSpace::HdgSpace(const SpaceTimeMesh& mesh, int p_s) : mesh_(&mesh), p_s_(p_s) {
  if (p_s < 1) throw std::invalid_argument("spatial degree must be at least 1");
  const int d = mesh.spatial_dim();
  element_basis_ = TensorBasis::element(d, p_s);
  for (int a = 0; a <= d; ++a) facet_basis_[a] = TensorBasis::facet(d, p_s, a);

  dofs_.element_size = element_basis_.size();
  dofs_.n_element_dofs = mesh.n_elements() * static_cast<std::size_t>(dofs_.element_size);
  const auto facets = mesh.facets();
  dofs_.facet_offset.resize(facets.size() + 1);
  dofs_.dirichlet.resize(facets.size());
  std::int64_t off = static_cast<std::int64_t>(dofs_.n_element_dofs);
  for (std::size_t f = 0; f < facets.size(); ++f) {
    dofs_.facet_offset[f] = off;
    off += facet_basis_[facets[f].normal_axis].size();
    dofs_.dirichlet[f] = facets[f].tag == BoundaryTag::dirichlet;
  }
  dofs_.facet_offset[facets.size()] = off;
  dofs_.n_dofs = static_cast<std::size_t>(off);
}

FieldValues DiscreteSolution::evaluate(int elem, const Point& x) const {
  const auto& basis = space->element_basis();
  const auto& K = space->mesh().element(elem);
  BasisValues bv;
  basis.evaluate(K.box, x, bv);
  const double* c = coeffs.data() + space->dofs().element_offset(elem);
  const int d = space->d();
  FieldValues out;
  for (int i = 0; i < basis.size(); ++i) {
    out.value += c[i] * bv.value[i];
    out.dt += c[i] * bv.grad[i][0];
    for (int a = 1; a <= d; ++a) {
      out.grad[a] += c[i] * bv.grad[i][a];
      out.laplacian += c[i] * bv.hess[i][a];
    }
  }
  return out;
}

double DiscreteSolution::trace(int facet, const Point& x) const {
  const auto& F = space->mesh().facet(facet);
  const auto& basis = space->facet_basis(F.normal_axis);
  return evaluate_expansion(basis, F.box, coeffs.data() + space->dofs().facet_offset[facet], x);
}

double facet_beta_s(const SpaceTimeMesh& mesh, const ProblemSpec& spec, int facet, int n_quad) {
  const auto& F = mesh.facet(facet);
  const int D = mesh.dim();
  const int axis = F.normal_axis;
  double bs = 0.0;
  for (const auto& q : map_rule(cached_gauss_rule(n_quad, D - 1), F.box, D, axis))
    bs = std::max(bs, std::abs(spec.beta(q.x)[axis]));
  const int n_vertices = 1 << D;
  for (int v = 0; v < n_vertices; ++v) {
    Point x{};
    for (int a = 0; a < D; ++a) x[a] = ((v >> a) & 1) ? F.box.hi[a] : F.box.lo[a];
    bs = std::max(bs, std::abs(spec.beta(x)[axis]));
  }
  return bs;
}

FacetUpwind facet_upwind_coefficients(const HdgSpace& space, const ProblemSpec& spec, int facet, int side) {
  const auto& mesh = space.mesh();
  const auto& F = mesh.facet(facet);
  const int D = mesh.dim();
  FacetUpwind out;
  out.beta_s = facet_beta_s(mesh, spec, facet, space.assembly_points());
  const double sign = Facet::normal_sign(side);
  for (const auto& q : map_rule(cached_gauss_rule(space.assembly_points(), D - 1), F.box, D, F.normal_axis))
    out.beta_n.push_back(sign * spec.beta(q.x)[F.normal_axis]);
  return out;
}

double facet_h(const SpaceTimeMesh& mesh, int facet) {
  const auto& F = mesh.facet(facet);
  double h = std::numeric_limits<double>::max();
  for (int s = 0; s < 2; ++s)
    if (F.owner[s] >= 0) h = std::min(h, mesh.element(F.owner[s]).h);
  return h;
}

namespace {

bool is_neumann(BoundaryTag t) {
  return t == BoundaryTag::neumann || t == BoundaryTag::initial || t == BoundaryTag::final;
}

}  // namespace

LocalSystem local_tensors(const HdgSpace& space, const ProblemSpec& spec, int elem, const AssemblyOptions& opts) {
  const auto& mesh = space.mesh();
  const auto& K = mesh.element(elem);
  const auto& dm = space.dofs();
  const int D = mesh.dim();
  const int d = D - 1;
  const auto& eb = space.element_basis();
  const int nu = eb.size();
  const double eps = spec.epsilon;
  const double alpha = opts.penalty > 0.0 ? opts.penalty : 8.0 * space.p_s() * space.p_s();
  const int na = space.assembly_points();
  const int ne = space.estimator_points();

  struct Ref {
    int facet, axis, offset;
    double sign;
  };
  std::vector<Ref> refs;
  LocalSystem ls;
  for (int i = 0; i < nu; ++i) ls.dofs.push_back(dm.element_offset(elem) + i);
  for (int face = 0; face < 2 * D; ++face) {
    const int axis = face / 2;
    const double sign = (face % 2) ? 1.0 : -1.0;
    for (int f : mesh.face_facets(elem, face)) {
      refs.push_back({f, axis, static_cast<int>(ls.dofs.size()), sign});
      for (int i = 0; i < dm.facet_size(f); ++i) ls.dofs.push_back(dm.facet_offset[f] + i);
    }
  }
  const int n = static_cast<int>(ls.dofs.size());
  auto& A = ls.matrix;
  auto& b = ls.rhs;
  A.setZero(n, n);
  b.setZero(n);

  BasisValues bv, fv;
  for (const auto& q : map_rule(cached_gauss_rule(na, D), K.box, D)) {
    eb.evaluate(K.box, q.x, bv);
    const Point beta = spec.beta(q.x);
    for (int i = 0; i < nu; ++i) {
      double adv_test = 0.0;
      for (int a = 0; a <= d; ++a) adv_test += beta[a] * bv.grad[i][a];
      for (int j = 0; j < nu; ++j) {
        double v = 0.0;
        if (opts.diffusion) {
          double g = 0.0;
          for (int a = 1; a <= d; ++a) g += bv.grad[j][a] * bv.grad[i][a];
          v += eps * g;
        }
        if (opts.advection) v -= bv.value[j] * adv_test;
        A(i, j) += q.w * v;
      }
    }
  }
  if (opts.load && spec.source)
    for (const auto& q : map_rule(cached_gauss_rule(ne, D), K.box, D)) {
      eb.evaluate(K.box, q.x, bv);
      const double f = spec.source(q.x);
      for (int i = 0; i < nu; ++i) b[i] += q.w * f * bv.value[i];
    }

  for (const auto& r : refs) {
    const auto& F = mesh.facet(r.facet);
    const auto& fb = space.facet_basis(r.axis);
    const int nl = fb.size();
    const int o = r.offset;
    const double bs = facet_beta_s(mesh, spec, r.facet, na);
    const double pen = eps * alpha / facet_h(mesh, r.facet);
    const bool q_facet = r.axis > 0;
    const bool neumann = is_neumann(F.tag);
    for (const auto& q : map_rule(cached_gauss_rule(na, D - 1), F.box, D, r.axis)) {
      eb.evaluate(K.box, q.x, bv);
      fb.evaluate(F.box, q.x, fv);
      const double bn = r.sign * spec.beta(q.x)[r.axis];
      const double w = q.w;
      if (opts.advection) {
        const double c = bn - bs;  // exactly zero on the outflow side of an R-facet
        for (int i = 0; i < nu; ++i) {
          for (int j = 0; j < nu; ++j) A(i, j) += w * bs * bv.value[j] * bv.value[i];
          for (int l = 0; l < nl; ++l) {
            A(i, o + l) += w * c * fv.value[l] * bv.value[i];
            A(o + l, i) -= w * bs * bv.value[i] * fv.value[l];
          }
        }
        for (int l = 0; l < nl; ++l)
          for (int m = 0; m < nl; ++m) A(o + l, o + m) -= w * c * fv.value[m] * fv.value[l];
      }
      if (opts.diffusion && q_facet) {
        for (int i = 0; i < nu; ++i) {
          const double dni = r.sign * bv.grad[i][r.axis];
          for (int j = 0; j < nu; ++j) {
            const double dnj = r.sign * bv.grad[j][r.axis];
            A(i, j) += w * (pen * bv.value[j] * bv.value[i] - eps * bv.value[j] * dni - eps * dnj * bv.value[i]);
          }
          for (int l = 0; l < nl; ++l) {
            A(i, o + l) += w * (-pen * fv.value[l] * bv.value[i] + eps * fv.value[l] * dni);
            A(o + l, i) += w * (-pen * bv.value[i] * fv.value[l] + eps * dni * fv.value[l]);
          }
        }
        for (int l = 0; l < nl; ++l)
          for (int m = 0; m < nl; ++m) A(o + l, o + m) += w * pen * fv.value[m] * fv.value[l];
      }
      if (opts.neumann && neumann && bn > 0.0)
        for (int l = 0; l < nl; ++l)
          for (int m = 0; m < nl; ++m) A(o + l, o + m) += w * bn * fv.value[m] * fv.value[l];
    }
    if (opts.load && neumann)
      for (const auto& q : map_rule(cached_gauss_rule(ne, D - 1), F.box, D, r.axis)) {
        fb.evaluate(F.box, q.x, fv);
        const double g = boundary_data(spec, F, q.x).value;
        for (int l = 0; l < nl; ++l) b[o + l] += q.w * g * fv.value[l];
      }
  }
  return ls;
}

Eigen::VectorXd dirichlet_values(const HdgSpace& space, const ProblemSpec& spec) {
  const auto& mesh = space.mesh();
  const auto& dm = space.dofs();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dm.n_dofs));
  const int ne = space.estimator_points();
  for (std::size_t f = 0; f < mesh.n_facets(); ++f) {
    if (!dm.dirichlet[f]) continue;
    const auto& F = mesh.facet(static_cast<int>(f));
    const ScalarField g = spec.dirichlet ? spec.dirichlet : ScalarField([](const Point&) { return 0.0; });
    const auto c = l2_project(space.facet_basis(F.normal_axis), F.box, g, ne, F.normal_axis);
    out.segment(dm.facet_offset[f], c.size()) = c;
  }
  return out;
}

std::vector<std::int64_t> element_dof_list(const HdgSpace& space, int elem) {
  const auto& mesh = space.mesh();
  const auto& dm = space.dofs();
  std::vector<std::int64_t> dofs;
  for (int i = 0; i < dm.element_size; ++i) dofs.push_back(dm.element_offset(elem) + i);
  for (int face = 0; face < 2 * mesh.dim(); ++face)
    for (int f : mesh.face_facets(elem, face))
      for (int i = 0; i < dm.facet_size(f); ++i) dofs.push_back(dm.facet_offset[f] + i);
  return dofs;
}

SparseSystem assemble(const HdgSpace& space, const ProblemSpec& spec, const AssemblyOptions& opts) {
  const auto& mesh = space.mesh();
  const auto& dm = space.dofs();
  const auto N = static_cast<std::int64_t>(dm.n_dofs);
  if (N >= std::numeric_limits<int>::max()) throw std::length_error("system too large");
  std::vector<char> fixed(dm.n_dofs, 0);
  if (opts.dirichlet_rows)
    for (std::size_t f = 0; f < mesh.n_facets(); ++f)
      if (dm.dirichlet[f])
        for (auto i = dm.facet_offset[f]; i < dm.facet_offset[f + 1]; ++i) fixed[i] = 1;

  // Sparsity: an element row couples to its own local dofs, a facet row to
  // the union of the local dofs of its owners.
  std::vector<std::vector<std::int64_t>> lists(mesh.n_elements());
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) lists[k] = element_dof_list(space, static_cast<int>(k));
  std::vector<std::int64_t> row_ptr(N + 1, 0);
  std::vector<int> cols;
  {
    std::vector<std::int64_t> buf;
    auto push_row = [&](std::int64_t row) {
      std::sort(buf.begin(), buf.end());
      buf.erase(std::unique(buf.begin(), buf.end()), buf.end());
      for (auto c : buf) cols.push_back(static_cast<int>(c));
      row_ptr[row + 1] = static_cast<std::int64_t>(cols.size());
    };
    for (std::size_t k = 0; k < mesh.n_elements(); ++k)
      for (int i = 0; i < dm.element_size; ++i) {
        buf = lists[k];
        push_row(dm.element_offset(static_cast<int>(k)) + i);
      }
    for (std::size_t f = 0; f < mesh.n_facets(); ++f) {
      const auto& F = mesh.facet(static_cast<int>(f));
      for (auto r = dm.facet_offset[f]; r < dm.facet_offset[f + 1]; ++r) {
        buf.clear();
        for (int s = 0; s < 2; ++s)
          if (F.owner[s] >= 0) buf.insert(buf.end(), lists[F.owner[s]].begin(), lists[F.owner[s]].end());
        push_row(r);
      }
    }
  }
  lists.clear();
  lists.shrink_to_fit();
  std::vector<double> vals(cols.size(), 0.0);
  auto slot = [&](std::int64_t r, std::int64_t c) -> double& {
    const auto b = cols.begin() + row_ptr[r], e = cols.begin() + row_ptr[r + 1];
    return vals[static_cast<std::size_t>(std::lower_bound(b, e, static_cast<int>(c)) - cols.begin())];
  };

  SparseSystem sys;
  sys.rhs = Eigen::VectorXd::Zero(N);
  // local tensors are computed in parallel per chunk and scattered in element order
  constexpr std::size_t chunk = 512;
  std::vector<LocalSystem> locals(chunk);
  for (std::size_t begin = 0; begin < mesh.n_elements(); begin += chunk) {
    const std::size_t count = std::min(chunk, mesh.n_elements() - begin);
    parallel_for(count, [&](std::size_t i) {
      locals[i] = local_tensors(space, spec, static_cast<int>(begin + i), opts);
    });
    for (std::size_t c = 0; c < count; ++c) {
      const auto& ls = locals[c];
      const int n = static_cast<int>(ls.dofs.size());
      for (int i = 0; i < n; ++i) {
        const auto gi = ls.dofs[i];
        if (fixed[gi]) continue;
        sys.rhs[gi] += ls.rhs[i];
        for (int j = 0; j < n; ++j) slot(gi, ls.dofs[j]) += ls.matrix(i, j);
      }
    }
  }
  if (opts.dirichlet_rows) {
    const auto g = dirichlet_values(space, spec);
    for (std::int64_t i = 0; i < N; ++i)
      if (fixed[i]) {
        slot(i, i) = 1.0;
        sys.rhs[i] = g[i];
      }
  }
  std::vector<int> outer(row_ptr.begin(), row_ptr.end());
  if (row_ptr.back() >= std::numeric_limits<int>::max()) throw std::length_error("too many nonzeros");
  sys.matrix = Eigen::Map<const SparseMatrix>(N, N, static_cast<Eigen::Index>(vals.size()), outer.data(),
                                              cols.data(), vals.data());
  return sys;
}

Eigen::VectorXd project_exact(const HdgSpace& space, const ScalarField& u) {
  const auto& mesh = space.mesh();
  const auto& dm = space.dofs();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dm.n_dofs));
  const int ne = space.estimator_points();
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    const auto c = l2_project(space.element_basis(), mesh.element(static_cast<int>(k)).box, u, ne);
    x.segment(dm.element_offset(static_cast<int>(k)), c.size()) = c;
  }
  for (std::size_t f = 0; f < mesh.n_facets(); ++f) {
    const auto& F = mesh.facet(static_cast<int>(f));
    const auto c = l2_project(space.facet_basis(F.normal_axis), F.box, u, ne, F.normal_axis);
    x.segment(dm.facet_offset[f], c.size()) = c;
  }
  return x;
}

}  // namespace sthdg
