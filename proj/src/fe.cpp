#include "sthdg/fe.hpp"

#include <cassert>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace sthdg {

Point Box::center() const {
  Point c{};
  for (int a = 0; a < kMaxAxes; ++a) c[a] = 0.5 * (lo[a] + hi[a]);
  return c;
}

double Box::measure(int n_axes, int skip_axis) const {
  double m = 1.0;
  for (int a = 0; a < n_axes; ++a)
    if (a != skip_axis) m *= hi[a] - lo[a];
  return m;
}

bool Box::contains(const Point& p, int n_axes, double tol) const {
  for (int a = 0; a < n_axes; ++a) {
    const double s = tol * std::max(1.0, std::abs(hi[a] - lo[a]));
    if (p[a] < lo[a] - s || p[a] > hi[a] + s) return false;
  }
  return true;
}

namespace {

// Legendre P_n and its derivative at x.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = (std::abs(x) < 1.0) ? n * (x * p1 - p0) / (x * x - 1.0) : 0.5 * n * (n + 1) * std::pow(x, n - 1);
}

}  // namespace

void gauss_legendre_1d(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss rule needs n >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, z, p, dp);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    legendre(n, z, p, dp);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

std::vector<double> gauss_lobatto_nodes(int n) {
  if (n < 2) throw std::invalid_argument("Gauss-Lobatto needs at least 2 nodes");
  std::vector<double> x(n);
  const int m = n - 1;
  x[0] = -1.0;
  x[m] = 1.0;
  // interior nodes are the roots of P'_m, found by Newton on (1-x^2)P'_m
  for (int i = 1; i < m; ++i) {
    double z = -std::cos(std::numbers::pi * i / m);
    for (int it = 0; it < 100; ++it) {
      double p, dp;
      legendre(m, z, p, dp);
      // (1-z^2) P'' = 2z P' - m(m+1) P
      const double d2p = (2.0 * z * dp - m * (m + 1.0) * p) / (1.0 - z * z);
      const double dz = dp / d2p;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
  }
  return x;
}

QuadratureRule gauss_rule(int n, int k) {
  if (k < 0 || k > kMaxAxes) throw std::invalid_argument("gauss rule: bad axis count");
  std::vector<double> x, w;
  gauss_legendre_1d(n, x, w);
  QuadratureRule rule;
  rule.n_axes = k;
  rule.exactness = 2 * n - 1;
  int total = 1;
  for (int a = 0; a < k; ++a) total *= n;
  rule.points.resize(total);
  rule.weights.resize(total);
  for (int q = 0; q < total; ++q) {
    Point p{};
    double wq = 1.0;
    int r = q;
    for (int a = 0; a < k; ++a) {
      const int i = r % n;
      r /= n;
      p[a] = x[i];
      wq *= w[i];
    }
    rule.points[q] = p;
    rule.weights[q] = wq;
  }
  return rule;
}

const QuadratureRule& cached_gauss_rule(int n, int k) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n, k}];
  if (!slot) slot = std::make_unique<QuadratureRule>(gauss_rule(n, k));
  return *slot;
}

std::vector<QPoint> map_rule(const QuadratureRule& rule, const Box& box, int n_axes,
                             int skip_axis) {
  std::vector<QPoint> out(rule.points.size());
  const double jac = box.measure(n_axes, skip_axis) / std::pow(2.0, rule.n_axes);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    Point x{};
    int r = 0;
    for (int a = 0; a < n_axes; ++a) {
      if (a == skip_axis) {
        x[a] = box.lo[a];
        continue;
      }
      const double xi = rule.points[q][r++];
      x[a] = box.lo[a] + 0.5 * (xi + 1.0) * (box.hi[a] - box.lo[a]);
    }
    out[q] = {x, rule.weights[q] * jac};
  }
  return out;
}

LagrangeBasis1D::LagrangeBasis1D(int degree) : degree_(degree) {
  if (degree < 0) throw std::invalid_argument("negative degree");
  if (degree == 0) {
    nodes_ = {0.0};
    denom_ = {1.0};
    return;
  }
  nodes_ = gauss_lobatto_nodes(degree + 1);
  denom_.assign(degree + 1, 1.0);
  for (int i = 0; i <= degree; ++i)
    for (int j = 0; j <= degree; ++j)
      if (j != i) denom_[i] *= nodes_[i] - nodes_[j];
}

void LagrangeBasis1D::evaluate(double x, double* v, double* d1, double* d2) const {
  const int n = degree_ + 1;
  if (degree_ == 0) {
    v[0] = 1.0;
    d1[0] = 0.0;
    d2[0] = 0.0;
    return;
  }
  // product form with derivatives accumulated term by term (n is small)
  for (int i = 0; i < n; ++i) {
    double p = 1.0, dp = 0.0, ddp = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double f = x - nodes_[j];
      ddp = ddp * f + 2.0 * dp;
      dp = dp * f + p;
      p *= f;
    }
    v[i] = p / denom_[i];
    d1[i] = dp / denom_[i];
    d2[i] = ddp / denom_[i];
  }
}

TensorBasis::TensorBasis(int n_axes, std::array<int, kMaxAxes> degrees)
    : n_axes_(n_axes), degrees_(degrees) {
  if (n_axes < 1 || n_axes > kMaxAxes) throw std::invalid_argument("tensor basis: bad axis count");
  size_ = 1;
  for (int a = 0; a < n_axes; ++a) {
    axis_basis_.emplace_back(degrees[a]);
    size_ *= degrees[a] + 1;
  }
  for (int a = n_axes; a < kMaxAxes; ++a) degrees_[a] = 0;
}

TensorBasis TensorBasis::element(int d, int p_s, int p_t) {
  std::array<int, kMaxAxes> deg{p_t, p_s, p_s};
  return TensorBasis(d + 1, deg);
}

TensorBasis TensorBasis::facet(int d, int p_s, int normal_axis, int p_t) {
  std::array<int, kMaxAxes> deg{p_t, p_s, p_s};
  deg[normal_axis] = 0;
  return TensorBasis(d + 1, deg);
}

int TensorBasis::max_degree() const {
  int m = 0;
  for (int a = 0; a < n_axes_; ++a) m = std::max(m, degrees_[a]);
  return m;
}

void TensorBasis::evaluate_reference(const Point& xi, BasisValues& out) const {
  std::array<std::array<double, 16>, kMaxAxes> v{}, d1{}, d2{};
  for (int a = 0; a < n_axes_; ++a) {
    assert(degrees_[a] < 16);
    axis_basis_[a].evaluate(xi[a], v[a].data(), d1[a].data(), d2[a].data());
  }
  out.value.resize(size_);
  out.grad.resize(size_);
  out.hess.resize(size_);
  std::array<int, kMaxAxes> idx{};
  for (int i = 0; i < size_; ++i) {
    int r = i;
    for (int a = 0; a < n_axes_; ++a) {
      idx[a] = r % (degrees_[a] + 1);
      r /= degrees_[a] + 1;
    }
    double val = 1.0;
    for (int a = 0; a < n_axes_; ++a) val *= v[a][idx[a]];
    out.value[i] = val;
    Point g{}, h{};
    for (int a = 0; a < n_axes_; ++a) {
      double ga = 1.0, ha = 1.0;
      for (int b = 0; b < n_axes_; ++b) {
        ga *= (b == a) ? d1[b][idx[b]] : v[b][idx[b]];
        ha *= (b == a) ? d2[b][idx[b]] : v[b][idx[b]];
      }
      g[a] = ga;
      h[a] = ha;
    }
    out.grad[i] = g;
    out.hess[i] = h;
  }
}

void TensorBasis::evaluate(const Box& box, const Point& x, BasisValues& out) const {
  Point xi{}, scale{};
  for (int a = 0; a < n_axes_; ++a) {
    const double len = box.hi[a] - box.lo[a];
    if (degrees_[a] == 0 || len == 0.0) {
      xi[a] = 0.0;
      scale[a] = 0.0;
    } else {
      xi[a] = 2.0 * (x[a] - box.lo[a]) / len - 1.0;
      scale[a] = 2.0 / len;
    }
  }
  evaluate_reference(xi, out);
  for (int i = 0; i < size_; ++i)
    for (int a = 0; a < n_axes_; ++a) {
      out.grad[i][a] *= scale[a];
      out.hess[i][a] *= scale[a] * scale[a];
    }
}

std::vector<Point> TensorBasis::nodes(const Box& box) const {
  std::vector<Point> pts(size_);
  for (int i = 0; i < size_; ++i) {
    int r = i;
    Point x{};
    for (int a = 0; a < n_axes_; ++a) {
      const int k = r % (degrees_[a] + 1);
      r /= degrees_[a] + 1;
      const double xi = axis_basis_[a].nodes()[k];
      x[a] = degrees_[a] == 0 ? box.lo[a] + 0.5 * (box.hi[a] - box.lo[a])
                              : box.lo[a] + 0.5 * (xi + 1.0) * (box.hi[a] - box.lo[a]);
    }
    pts[i] = x;
  }
  return pts;
}

Eigen::MatrixXd mass_matrix(const TensorBasis& basis, const Box& box, int n_quad, int skip_axis) {
  const int k = skip_axis >= 0 ? basis.n_axes() - 1 : basis.n_axes();
  const auto qp = map_rule(gauss_rule(n_quad, k), box, basis.n_axes(), skip_axis);
  const int n = basis.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  BasisValues bv;
  for (const auto& q : qp) {
    basis.evaluate(box, q.x, bv);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) += q.w * bv.value[i] * bv.value[j];
  }
  return m;
}

Eigen::VectorXd l2_project(const TensorBasis& basis, const Box& box, const ScalarField& field,
                           int n_quad, int skip_axis) {
  const int k = skip_axis >= 0 ? basis.n_axes() - 1 : basis.n_axes();
  const auto qp = map_rule(gauss_rule(n_quad, k), box, basis.n_axes(), skip_axis);
  const int n = basis.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  BasisValues bv;
  for (const auto& q : qp) {
    basis.evaluate(box, q.x, bv);
    const double f = field(q.x);
    for (int i = 0; i < n; ++i) {
      b[i] += q.w * f * bv.value[i];
      for (int j = 0; j < n; ++j) m(i, j) += q.w * bv.value[i] * bv.value[j];
    }
  }
  return m.llt().solve(b);
}

Eigen::VectorXd interpolate(const TensorBasis& basis, const Box& box, const ScalarField& field) {
  const auto pts = basis.nodes(box);
  Eigen::VectorXd c(basis.size());
  for (int i = 0; i < basis.size(); ++i) c[i] = field(pts[i]);
  return c;
}

double evaluate_expansion(const TensorBasis& basis, const Box& box, const double* coeffs,
                          const Point& x) {
  BasisValues bv;
  basis.evaluate(box, x, bv);
  double s = 0.0;
  for (int i = 0; i < basis.size(); ++i) s += coeffs[i] * bv.value[i];
  return s;
}

}  // namespace sthdg
