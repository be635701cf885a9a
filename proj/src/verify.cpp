#include "sthdg/verify.hpp"

#include "sthdg/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace sthdg {

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

std::vector<double> basis_values(const TensorBasis& basis, const Box& box, const Point& x) {
  BasisValues bv;
  basis.evaluate(box, x, bv);
  return bv.value;
}

Box face_box(const Box& b, int axis, int side) {
  Box f = b;
  if (side == 0)
    f.hi[axis] = f.lo[axis];
  else
    f.lo[axis] = f.hi[axis];
  return f;
}

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

SubgridPair make_subgrid(const SpaceTimeMesh& coarse) {
  SubgridPair p;
  p.coarse = &coarse;
  p.fine = split_in_time(coarse, &p.children);
  p.parent.assign(p.fine.n_elements(), -1);
  for (std::size_t k = 0; k < p.children.size(); ++k)
    for (int c : p.children[k]) p.parent[c] = static_cast<int>(k);
  for (std::size_t f = 0; f < p.fine.n_facets(); ++f) {
    const auto& F = p.fine.facet(static_cast<int>(f));
    if (F.kind == FacetKind::R && F.owner[0] >= 0 && F.owner[1] >= 0 && p.parent[F.owner[0]] == p.parent[F.owner[1]])
      p.new_facets.push_back(static_cast<int>(f));
  }
  return p;
}

RowSparse restriction_matrix(const SubgridPair& pair, const HdgSpace& coarse, const HdgSpace& fine) {
  if (&coarse.mesh() != pair.coarse || &fine.mesh() != &pair.fine || coarse.p_s() != fine.p_s())
    throw std::invalid_argument("restriction: spaces do not match the subgrid pair");
  const auto& cm = *pair.coarse;
  const auto& fm = pair.fine;
  const auto& cd = coarse.dofs();
  const auto& fd = fine.dofs();
  const auto& eb = coarse.element_basis();
  const int n = eb.size();
  std::vector<Eigen::Triplet<double, int>> trip;

  for (std::size_t k = 0; k < fm.n_elements(); ++k) {
    const auto& child = fm.element(static_cast<int>(k));
    const int p = pair.parent[k];
    const auto& par = cm.element(p);
    const auto nodes = eb.nodes(child.box);
    for (int i = 0; i < n; ++i) {
      const auto phi = basis_values(eb, par.box, nodes[i]);
      for (int j = 0; j < n; ++j)
        if (phi[j] != 0.0)
          trip.emplace_back(static_cast<int>(fd.element_offset(static_cast<int>(k)) + i),
                            static_cast<int>(cd.element_offset(p) + j), phi[j]);
    }
  }

  std::vector<char> is_new(fm.n_facets(), 0);
  for (int f : pair.new_facets) is_new[f] = 1;
  for (std::size_t f = 0; f < fm.n_facets(); ++f) {
    const auto& F = fm.facet(static_cast<int>(f));
    const auto& fb = fine.facet_basis(F.normal_axis);
    const auto nodes = fb.nodes(F.box);
    const int row0 = static_cast<int>(fd.facet_offset[f]);
    if (is_new[f]) {
      const int p = pair.parent[F.owner[0]];
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto phi = basis_values(eb, cm.element(p).box, nodes[i]);
        for (int j = 0; j < n; ++j)
          if (phi[j] != 0.0)
            trip.emplace_back(row0 + static_cast<int>(i), static_cast<int>(cd.element_offset(p) + j), phi[j]);
      }
      continue;
    }
    const int side = F.owner[0] >= 0 ? 0 : 1;
    const int p = pair.parent[F.owner[side]];
    const int face = 2 * F.normal_axis + (side == 0 ? 1 : 0);
    const Point c = F.box.center();
    int match = -1;
    for (int cf : cm.face_facets(p, face))
      if (cm.facet(cf).box.contains(c, cm.dim())) {
        match = cf;
        break;
      }
    if (match < 0) throw std::invalid_argument("restriction: facet without a coarse parent");
    const auto& CF = cm.facet(match);
    const auto& cb = coarse.facet_basis(CF.normal_axis);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto phi = basis_values(cb, CF.box, nodes[i]);
      for (int j = 0; j < cb.size(); ++j)
        if (phi[j] != 0.0)
          trip.emplace_back(row0 + static_cast<int>(i), static_cast<int>(cd.facet_offset[match] + j), phi[j]);
    }
  }
  RowSparse G(static_cast<int>(fd.n_dofs), static_cast<int>(cd.n_dofs));
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

Eigen::VectorXd subgrid_restrict(const SubgridPair& pair, const HdgSpace& coarse, const HdgSpace& fine,
                                 const Eigen::VectorXd& coarse_coeffs) {
  if (coarse_coeffs.size() != static_cast<Eigen::Index>(coarse.dofs().n_dofs))
    throw std::invalid_argument("restriction: coefficient vector does not match the coarse space");
  return restriction_matrix(pair, coarse, fine) * coarse_coeffs;
}

OrthogonalityReport check_galerkin_orthogonality(const ProblemSpec& spec, const SpaceTimeMesh& mesh, int p_s,
                                                 double perturb, SolveMode mode) {
  const SubgridPair pair = make_subgrid(mesh);
  const HdgSpace vh(mesh, p_s), vf(pair.fine, p_s);
  const Eigen::VectorXd uh = solve_on(vh, spec, mode).solution.coeffs;
  Eigen::VectorXd uf = solve_on(vf, spec, mode).solution.coeffs;
  uf.array() += perturb;
  AssemblyOptions raw;
  raw.dirichlet_rows = false;
  const SparseMatrix A = assemble(vf, spec, raw).matrix;
  const RowSparse G = restriction_matrix(pair, vh, vf);
  const Eigen::VectorXd err = uf - G * uh;
  const Eigen::VectorXd z = G.transpose() * (A * err);
  const Eigen::VectorXd s = G.transpose() * (A * uf);
  const auto& cd = vh.dofs();
  OrthogonalityReport rep;
  auto test_dof = [&](std::size_t j) {
    if (j < cd.n_element_dofs) return true;
    const auto it = std::upper_bound(cd.facet_offset.begin(), cd.facet_offset.end(), static_cast<std::int64_t>(j));
    return !cd.dirichlet[static_cast<std::size_t>(it - cd.facet_offset.begin()) - 1];
  };
  for (std::size_t j = 0; j < cd.n_dofs; ++j) {
    if (!test_dof(j)) continue;
    rep.value = std::max(rep.value, std::abs(z[static_cast<Eigen::Index>(j)]));
    rep.scale = std::max(rep.scale, std::abs(s[static_cast<Eigen::Index>(j)]));
  }
  rep.relative = rep.scale > 0.0 ? rep.value / rep.scale : rep.value;
  return rep;
}

SaturationReport measure_saturation(const ProblemSpec& spec, const SpaceTimeMesh& mesh, int p_s, SolveMode mode) {
  if (!spec.exact) throw std::invalid_argument("saturation needs the exact time derivative");
  const SubgridPair pair = make_subgrid(mesh);
  const HdgSpace vh(mesh, p_s), vf(pair.fine, p_s);
  const auto coarse = solve_on(vh, spec, mode);
  const auto fine = solve_on(vf, spec, mode);
  SaturationReport rep;
  rep.denominator = std::sqrt(discrete_norms(coarse.solution, spec, &*spec.exact).total.time);
  rep.numerator = std::sqrt(discrete_norms(fine.solution, spec, &*spec.exact).total.time);
  constexpr double tiny = 1e-10;
  if (rep.denominator <= tiny && rep.numerator <= tiny) {
    rep.degenerate = true;
    rep.rho = std::numeric_limits<double>::quiet_NaN();
  } else {
    rep.rho = rep.denominator > 0.0 ? rep.numerator / rep.denominator : std::numeric_limits<double>::infinity();
  }
  return rep;
}

// ---------------------------------------------------------------------------

AveragedField::AveragedField(const SpaceTimeMesh& mesh, const TensorBasis& basis, const Eigen::VectorXd& coeffs)
    : mesh_(&mesh), basis_(basis), n_axes_(mesh.dim()) {
  const int D = n_axes_;
  const int nb = basis.size();
  if (coeffs.size() != static_cast<Eigen::Index>(mesh.n_elements()) * nb)
    throw std::invalid_argument("averaging: coefficient vector does not match the mesh");
  std::array<std::int64_t, kMaxAxes> unit{};
  for (int a = 0; a < D; ++a) {
    unit[a] = std::numeric_limits<std::int64_t>::max();
    for (const auto& e : mesh.elements()) unit[a] = std::min(unit[a], e.cell.size(a));
  }
  const auto& dom = mesh.domain();
  n_cells_[0] = static_cast<int>(mesh.n_slabs() * kTimeUnit / unit[0]);
  lo_[0] = 0.0;
  width_[0] = dom.t_end / n_cells_[0];
  for (int a = 1; a < D; ++a) {
    n_cells_[a] = static_cast<int>(mesh.n_cells() * kSpaceUnit / unit[a]);
    lo_[a] = dom.x_lo[a - 1];
    width_[a] = (dom.x_hi[a - 1] - dom.x_lo[a - 1]) / n_cells_[a];
  }
  std::size_t total = 1;
  std::array<std::vector<double>, kMaxAxes> gll;
  for (int a = 0; a < D; ++a) {
    degree_[a] = basis.degree(a);
    n_nodes_[a] = n_cells_[a] * degree_[a] + 1;
    total *= static_cast<std::size_t>(n_nodes_[a]);
    gll[a] = LagrangeBasis1D(degree_[a]).nodes();
  }
  auto coord = [&](int a, int node) {
    int c = node / degree_[a], j = node % degree_[a];
    if (c == n_cells_[a]) {
      c -= 1;
      j = degree_[a];
    }
    return lo_[a] + width_[a] * (c + 0.5 * (gll[a][j] + 1.0));
  };
  std::vector<double> sum(total, 0.0);
  std::vector<int> count(total, 0);
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    const auto& K = mesh.element(static_cast<int>(k));
    std::array<int, kMaxAxes> nlo{}, nhi{};
    for (int a = 0; a < D; ++a) {
      nlo[a] = static_cast<int>(K.cell.lo[a] / unit[a]) * degree_[a];
      nhi[a] = static_cast<int>(K.cell.hi[a] / unit[a]) * degree_[a];
    }
    const double* c = coeffs.data() + k * nb;
    for (int i2 = D > 2 ? nlo[2] : 0; i2 <= (D > 2 ? nhi[2] : 0); ++i2)
      for (int i1 = nlo[1]; i1 <= nhi[1]; ++i1)
        for (int i0 = nlo[0]; i0 <= nhi[0]; ++i0) {
          Point x{coord(0, i0), coord(1, i1), D > 2 ? coord(2, i2) : 0.0};
          const std::size_t g = i0 + static_cast<std::size_t>(n_nodes_[0]) * (i1 + static_cast<std::size_t>(n_nodes_[1]) * i2);
          sum[g] += evaluate_expansion(basis, K.box, c, x);
          count[g] += 1;
        }
  }
  nodal_.assign(total, 0.0);
  for (std::size_t g = 0; g < total; ++g) {
    std::array<int, kMaxAxes> idx{};
    std::size_t r = g;
    for (int a = 0; a < D; ++a) {
      idx[a] = static_cast<int>(r % n_nodes_[a]);
      r /= n_nodes_[a];
    }
    bool dirichlet = false;
    for (int a = 1; a < D; ++a) {
      if (idx[a] == 0 && dom.dirichlet[a - 1][0]) dirichlet = true;
      if (idx[a] == n_nodes_[a] - 1 && dom.dirichlet[a - 1][1]) dirichlet = true;
    }
    nodal_[g] = dirichlet || count[g] == 0 ? 0.0 : sum[g] / count[g];
  }

  defect_.assign(mesh.n_elements(), 0.0);
  const int nq = basis.max_degree() + 2;
  parallel_for(mesh.n_elements(), [&](std::size_t k) {
    const auto& K = mesh.element(static_cast<int>(k));
    std::array<int, kMaxAxes> clo{}, chi{};
    for (int a = 0; a < D; ++a) {
      clo[a] = static_cast<int>(K.cell.lo[a] / unit[a]);
      chi[a] = static_cast<int>(K.cell.hi[a] / unit[a]);
    }
    if (D < 3) chi[2] = 1;
    const double* c = coeffs.data() + k * nb;
    double s = 0.0;
    std::array<int, kMaxAxes> cell{};
    for (cell[2] = clo[2]; cell[2] < chi[2]; ++cell[2])
      for (cell[1] = clo[1]; cell[1] < chi[1]; ++cell[1])
        for (cell[0] = clo[0]; cell[0] < chi[0]; ++cell[0]) {
          const Box cb = cell_box(cell);
          const Eigen::VectorXd cc = cell_coeffs(cell);
          for (const auto& q : map_rule(cached_gauss_rule(nq, D), cb, D)) {
            const double e = evaluate_expansion(basis_, K.box, c, q.x) - evaluate_expansion(basis_, cb, cc.data(), q.x);
            s += q.w * e * e;
          }
        }
    defect_[k] = std::sqrt(s);
  });
}

Box AveragedField::cell_box(const std::array<int, kMaxAxes>& c) const {
  Box b;
  for (int a = 0; a < n_axes_; ++a) {
    b.lo[a] = lo_[a] + width_[a] * c[a];
    b.hi[a] = lo_[a] + width_[a] * (c[a] + 1);
  }
  return b;
}

Eigen::VectorXd AveragedField::cell_coeffs(const std::array<int, kMaxAxes>& c) const {
  Eigen::VectorXd out(basis_.size());
  for (int i = 0; i < basis_.size(); ++i) {
    int r = i;
    std::size_t g = 0, stride = 1;
    for (int a = 0; a < n_axes_; ++a) {
      const int loc = r % (degree_[a] + 1);
      r /= degree_[a] + 1;
      g += stride * static_cast<std::size_t>(c[a] * degree_[a] + loc);
      stride *= static_cast<std::size_t>(n_nodes_[a]);
    }
    out[i] = nodal_[g];
  }
  return out;
}

int AveragedField::cell_of(int axis, double x) const {
  const int c = static_cast<int>(std::floor((x - lo_[axis]) / width_[axis]));
  return std::clamp(c, 0, n_cells_[axis] - 1);
}

double AveragedField::value(const Point& x) const {
  std::array<int, kMaxAxes> c{};
  for (int a = 0; a < n_axes_; ++a) c[a] = cell_of(a, x[a]);
  const Box b = cell_box(c);
  const Eigen::VectorXd cc = cell_coeffs(c);
  return evaluate_expansion(basis_, b, cc.data(), x);
}

double AveragedField::continuity_defect() const {
  double worst = 0.0;
  std::array<int, kMaxAxes> c{};
  const int n2 = n_axes_ > 2 ? n_cells_[2] : 1;
  for (c[2] = 0; c[2] < n2; ++c[2])
    for (c[1] = 0; c[1] < n_cells_[1]; ++c[1])
      for (c[0] = 0; c[0] < n_cells_[0]; ++c[0]) {
        const Box b = cell_box(c);
        const Eigen::VectorXd cc = cell_coeffs(c);
        for (int a = 0; a < n_axes_; ++a) {
          if (c[a] + 1 >= n_cells_[a]) continue;
          auto up = c;
          up[a] += 1;
          const Box ub = cell_box(up);
          const Eigen::VectorXd uc = cell_coeffs(up);
          for (const auto& x : basis_.nodes(b)) {
            Point y = x;
            y[a] = b.hi[a];
            worst = std::max(worst, std::abs(evaluate_expansion(basis_, b, cc.data(), y) -
                                             evaluate_expansion(basis_, ub, uc.data(), y)));
          }
        }
      }
  return worst;
}

ConstantReport oswald_constant(const SpaceTimeMesh& mesh, int p_s, int samples, std::uint64_t seed) {
  const int D = mesh.dim();
  const TensorBasis basis = TensorBasis::element(D - 1, p_s);
  const int nb = basis.size();
  const int nq = basis.max_degree() + 2;
  std::mt19937_64 rng(seed);
  ConstantReport rep{"oswald", mesh.max_level(), static_cast<std::size_t>(samples), 0.0};
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd v = random_vector(static_cast<int>(mesh.n_elements()) * nb, rng);
    const AveragedField avg(mesh, basis, v);
    double num = 0.0;
    for (double d : avg.defect()) num += d * d;
    double den = 0.0;
    for (std::size_t f = 0; f < mesh.n_facets(); ++f) {
      const auto& F = mesh.facet(static_cast<int>(f));
      const bool both = F.owner[0] >= 0 && F.owner[1] >= 0;
      if (!both && F.tag != BoundaryTag::dirichlet) continue;
      double weight = std::numeric_limits<double>::max();
      for (int o : F.owner)
        if (o >= 0) weight = std::min(weight, F.kind == FacetKind::Q ? mesh.element(o).h : mesh.element(o).dt);
      double j2 = 0.0;
      for (const auto& q : map_rule(cached_gauss_rule(nq, D - 1), F.box, D, F.normal_axis)) {
        double jump = 0.0;
        for (int side = 0; side < 2; ++side) {
          const int o = F.owner[side];
          if (o < 0) continue;
          const double val = evaluate_expansion(basis, mesh.element(o).box, v.data() + static_cast<std::size_t>(o) * nb, q.x);
          jump += side == 0 ? val : -val;
        }
        j2 += q.w * jump * jump;
      }
      den += weight * j2;
    }
    if (den > 0.0) rep.constant = std::max(rep.constant, std::sqrt(num / den));
  }
  return rep;
}

// ---------------------------------------------------------------------------

double element_bubble(const Point& xi, int n_axes) {
  const int m = 1 << (n_axes - 1);
  double v = 1.0;
  for (int a = 0; a < n_axes; ++a) v *= std::pow(1.0 - xi[a] * xi[a], m);
  return v;
}

namespace {

// value and reference gradient of the element bubble
double element_bubble_grad(const Point& xi, int n, Point& g) {
  const int m = 1 << (n - 1);
  std::array<double, kMaxAxes> f{}, df{};
  for (int a = 0; a < n; ++a) {
    const double s = 1.0 - xi[a] * xi[a];
    f[a] = std::pow(s, m);
    df[a] = m * std::pow(s, m - 1) * (-2.0 * xi[a]);
  }
  double v = 1.0;
  for (int a = 0; a < n; ++a) v *= f[a];
  for (int a = 0; a < n; ++a) {
    double p = df[a];
    for (int b = 0; b < n; ++b)
      if (b != a) p *= f[b];
    g[a] = p;
  }
  return v;
}

double facet_bubble_grad(const Point& xi, int n, int axis, double kappa, Point& g) {
  const int mt = n >= 2 ? 1 << (n - 2) : 1;
  const int mn = 1 << (n - 1);
  std::array<double, kMaxAxes> f{}, df{};
  for (int a = 0; a < n; ++a) {
    if (a == axis) {
      const double s = -1.0 + (xi[a] + 1.0) / kappa;
      if (s >= 1.0) {
        f[a] = 0.0;
        df[a] = 0.0;
      } else {
        const double r = 0.5 * (1.0 - s);
        f[a] = std::pow(r, mn);
        df[a] = mn * std::pow(r, mn - 1) * (-0.5 / kappa);
      }
    } else {
      const double s = 1.0 - xi[a] * xi[a];
      f[a] = std::pow(s, mt);
      df[a] = mt * std::pow(s, mt - 1) * (-2.0 * xi[a]);
    }
  }
  double v = 1.0;
  for (int a = 0; a < n; ++a) v *= f[a];
  for (int a = 0; a < n; ++a) {
    double p = df[a];
    for (int b = 0; b < n; ++b)
      if (b != a) p *= f[b];
    g[a] = p;
  }
  return v;
}

Point to_reference(const Box& b, const Point& x, int n) {
  Point xi{};
  for (int a = 0; a < n; ++a) xi[a] = 2.0 * (x[a] - b.lo[a]) / b.extent(a) - 1.0;
  return xi;
}

}  // namespace

double facet_bubble(const Point& xi, int n_axes, int normal_axis, double kappa) {
  Point g;
  return facet_bubble_grad(xi, n_axes, normal_axis, kappa, g);
}

std::vector<ConstantReport> bubble_constants(const Box& box, int d, int p_s, BubbleKind kind, double kappa,
                                             int samples, std::uint64_t seed, int level) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw std::invalid_argument("bubble: kappa must lie in (0,1]");
  if (samples < 1) throw std::invalid_argument("bubble: need at least one sample");
  const int D = d + 1;
  const TensorBasis basis = TensorBasis::element(d, p_s);
  const int nb = basis.size();
  const int nq = p_s + (1 << D) + 2;
  const double h = box.extent(1), dt = box.extent(0);
  std::mt19937_64 rng(seed);
  std::vector<ConstantReport> out;
  auto report = [&](const char* name, double c) {
    out.push_back({name, level, static_cast<std::size_t>(samples), c});
  };

  if (kind == BubbleKind::element) {
    const auto qp = map_rule(cached_gauss_rule(nq, D), box, D);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nb, nb), Mpsi = M;
    std::vector<std::vector<double>> phi(qp.size());
    std::vector<std::vector<Point>> dphi(qp.size());
    std::vector<double> psi(qp.size());
    std::vector<Point> dpsi(qp.size());
    BasisValues bv;
    for (std::size_t q = 0; q < qp.size(); ++q) {
      basis.evaluate(box, qp[q].x, bv);
      phi[q] = bv.value;
      dphi[q] = bv.grad;
      Point g{};
      psi[q] = element_bubble_grad(to_reference(box, qp[q].x, D), D, g);
      for (int a = 0; a < D; ++a) g[a] *= 2.0 / box.extent(a);
      dpsi[q] = g;
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) {
          M(i, j) += qp[q].w * phi[q][i] * phi[q][j];
          Mpsi(i, j) += qp[q].w * psi[q] * phi[q][i] * phi[q][j];
        }
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Mpsi, M, Eigen::EigenvaluesOnly);
    report("bubble_c2", ges.eigenvalues().minCoeff());
    double c_norm = 0.0, c_grad = 0.0, c_dt = 0.0;
    for (int s = 0; s < samples; ++s) {
      const Eigen::VectorXd c = random_vector(nb, rng);
      double v2 = 0.0, pv2 = 0.0, g2 = 0.0, t2 = 0.0;
      for (std::size_t q = 0; q < qp.size(); ++q) {
        double v = 0.0;
        Point dv{};
        for (int i = 0; i < nb; ++i) {
          v += c[i] * phi[q][i];
          for (int a = 0; a < D; ++a) dv[a] += c[i] * dphi[q][i][a];
        }
        const double w = qp[q].w;
        v2 += w * v * v;
        pv2 += w * psi[q] * psi[q] * v * v;
        const double dtv = dpsi[q][0] * v + psi[q] * dv[0];
        t2 += w * dtv * dtv;
        for (int a = 1; a < D; ++a) {
          const double ga = dpsi[q][a] * v + psi[q] * dv[a];
          g2 += w * ga * ga;
        }
      }
      if (v2 <= 0.0) continue;
      c_norm = std::max(c_norm, std::sqrt(pv2 / v2));
      c_grad = std::max(c_grad, h * std::sqrt(g2 / v2));
      c_dt = std::max(c_dt, dt * std::sqrt(t2 / v2));
    }
    report("bubble_norm", c_norm);
    report("bubble_grad", c_grad);
    report("bubble_dt", c_dt);
    return out;
  }

  // facet bubble on the lower face along the first spatial axis
  const int axis = 1;
  const Box F = face_box(box, axis, 0);
  const TensorBasis fb = TensorBasis::facet(d, p_s, axis);
  const int nf = fb.size();
  const auto fq = map_rule(cached_gauss_rule(nq, D - 1), F, D, axis);
  Eigen::MatrixXd MF = Eigen::MatrixXd::Zero(nf, nf), MFpsi = MF;
  BasisValues bv;
  for (const auto& q : fq) {
    fb.evaluate(F, q.x, bv);
    Point g;
    const double psi = facet_bubble_grad(to_reference(box, q.x, D), D, axis, kappa, g);
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < nf; ++j) {
        MF(i, j) += q.w * bv.value[i] * bv.value[j];
        MFpsi(i, j) += q.w * psi * bv.value[i] * bv.value[j];
      }
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(MFpsi, MF, Eigen::EigenvaluesOnly);
  report("facet_bubble_c", 1.0 / ges.eigenvalues().minCoeff());

  Box strip = box;
  strip.hi[axis] = box.lo[axis] + kappa * box.extent(axis);
  const auto qp = map_rule(cached_gauss_rule(nq, D), strip, D);
  const double vol_ratio = std::sqrt(box.measure(D) / F.measure(D, axis));
  double c_ext = 0.0, c_grad = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd c = random_vector(nf, rng);
    double s2 = 0.0;
    for (const auto& q : fq) {
      const double v = evaluate_expansion(fb, F, c.data(), q.x);
      s2 += q.w * v * v;
    }
    double e2 = 0.0, g2 = 0.0;
    for (const auto& q : qp) {
      Point y = q.x;
      y[axis] = F.lo[axis];
      fb.evaluate(F, y, bv);
      double v = 0.0;
      Point dv{};
      for (int i = 0; i < nf; ++i) {
        v += c[i] * bv.value[i];
        for (int a = 1; a < D; ++a)
          if (a != axis) dv[a] += c[i] * bv.grad[i][a];
      }
      Point g;
      const double psi = facet_bubble_grad(to_reference(box, q.x, D), D, axis, kappa, g);
      for (int a = 0; a < D; ++a) g[a] *= 2.0 / box.extent(a);
      e2 += q.w * psi * psi * v * v;
      for (int a = 1; a < D; ++a) {
        const double ga = g[a] * v + psi * dv[a];
        g2 += q.w * ga * ga;
      }
    }
    if (s2 <= 0.0) continue;
    const double sn = std::sqrt(s2);
    c_ext = std::max(c_ext, std::sqrt(e2) / (std::sqrt(kappa) * vol_ratio * sn));
    c_grad = std::max(c_grad, h * std::sqrt(kappa) * std::sqrt(g2) / (vol_ratio * sn));
  }
  report("facet_bubble_ext", c_ext);
  report("facet_bubble_grad", c_grad);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ConstantReport> inequality_constants(const SpaceTimeMesh& mesh, int p_s, int samples, std::uint64_t seed) {
  if (mesh.n_elements() == 0) throw std::invalid_argument("inequality constants: empty mesh");
  const int D = mesh.dim();
  const int d = D - 1;
  const TensorBasis basis = TensorBasis::element(d, p_s);
  const int nb = basis.size();
  const int nq = p_s + 3;
  const bool quasi = mesh.policy() == TimeStepPolicy::quadratic;
  const TensorBasis smooth(D, {3, p_s + 2, d > 1 ? p_s + 2 : 0});

  // one representative per element shape
  std::map<std::pair<std::int64_t, std::int64_t>, int> shapes;
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    const auto& e = mesh.element(static_cast<int>(k));
    shapes.emplace(std::make_pair(e.cell.size(0), e.cell.size(1)), static_cast<int>(k));
  }

  std::map<std::string, double> best;
  auto update = [&](const std::string& name, double v) {
    auto& b = best[name];
    if (std::isfinite(v)) b = std::max(b, v);
  };
  for (const auto& [shape, k] : shapes) {
    const auto& K = mesh.element(k);
    const Box& box = K.box;
    const double h = K.h, dt = K.dt;
    const auto qp = map_rule(cached_gauss_rule(nq + 2, D), box, D);
    std::mt19937_64 rng(seed);
    BasisValues bv;
    for (int s = 0; s < samples; ++s) {
      const Eigen::VectorXd c = random_vector(nb, rng);
      double v2 = 0, t2 = 0, g2 = 0, l2 = 0;
      for (const auto& q : qp) {
        basis.evaluate(box, q.x, bv);
        double v = 0, vt = 0, lap = 0;
        Point g{};
        for (int i = 0; i < nb; ++i) {
          v += c[i] * bv.value[i];
          vt += c[i] * bv.grad[i][0];
          lap += c[i] * bv.laplacian(i, d);
          for (int a = 1; a <= d; ++a) g[a] += c[i] * bv.grad[i][a];
        }
        v2 += q.w * v * v;
        t2 += q.w * vt * vt;
        l2 += q.w * lap * lap;
        for (int a = 1; a <= d; ++a) g2 += q.w * g[a] * g[a];
      }
      double q2 = 0, r2 = 0, qn2 = 0;
      for (int a = 0; a < D; ++a)
        for (int side = 0; side < 2; ++side) {
          const Box fbx = face_box(box, a, side);
          for (const auto& q : map_rule(cached_gauss_rule(nq + 2, D - 1), fbx, D, a)) {
            basis.evaluate(box, q.x, bv);
            double v = 0, dn = 0;
            for (int i = 0; i < nb; ++i) {
              v += c[i] * bv.value[i];
              dn += c[i] * bv.grad[i][a];
            }
            if (a == 0) {
              r2 += q.w * v * v;
            } else {
              q2 += q.w * v * v;
              qn2 += q.w * dn * dn;
            }
          }
        }
      if (v2 <= 0.0) continue;
      update("inv_dt", dt * std::sqrt(t2 / v2));
      update("inv_grad", h * std::sqrt(g2 / v2));
      if (p_s >= 2 && g2 > 0.0) update("inv_lap", h * std::sqrt(l2 / g2));
      update("trace_Q", std::sqrt(h * q2 / v2));
      update("trace_R", std::sqrt(dt * r2 / v2));
      if (g2 > 0.0) update("trace_grad_Q", std::sqrt(h * qn2 / g2));
      update("local_trace", q2 / (v2 / h + std::sqrt(v2 * g2)));
    }
    if (quasi) {
      const auto qs = map_rule(cached_gauss_rule(p_s + 5, D), box, D);
      const Eigen::MatrixXd M = mass_matrix(basis, box, p_s + 5);
      const Eigen::LLT<Eigen::MatrixXd> llt(M);
      for (int s = 0; s < samples; ++s) {
        const Eigen::VectorXd c = random_vector(smooth.size(), rng);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(nb);
        for (const auto& q : qs) {
          const double w = evaluate_expansion(smooth, box, c.data(), q.x);
          basis.evaluate(box, q.x, bv);
          for (int i = 0; i < nb; ++i) b[i] += q.w * w * bv.value[i];
        }
        const Eigen::VectorXd pc = llt.solve(b);
        double e2 = 0, g2 = 0, t2 = 0;
        for (const auto& q : qs) {
          smooth.evaluate(box, q.x, bv);
          double w = 0, wt = 0;
          Point g{};
          for (int i = 0; i < smooth.size(); ++i) {
            w += c[i] * bv.value[i];
            wt += c[i] * bv.grad[i][0];
            for (int a = 1; a <= d; ++a) g[a] += c[i] * bv.grad[i][a];
          }
          const double e = w - evaluate_expansion(basis, box, pc.data(), q.x);
          e2 += q.w * e * e;
          t2 += q.w * wt * wt;
          for (int a = 1; a <= d; ++a) g2 += q.w * g[a] * g[a];
        }
        const double den = h * std::sqrt(g2) + dt * std::sqrt(t2);
        if (den > 0.0) update("quasi_interp", std::sqrt(e2) / den);
      }
    }
  }
  std::vector<ConstantReport> out;
  const int level = mesh.max_level();
  for (const auto& [name, c] : best) out.push_back({name, level, static_cast<std::size_t>(samples), c});
  out.push_back(oswald_constant(mesh, p_s, std::max(1, std::min(samples, 10)), seed));
  return out;
}

}  // namespace sthdg
