#include "sthdg/problem.hpp"

#include <cmath>

namespace sthdg {

namespace {

ExactSolution rotating_pulse_2d(double eps) {
  constexpr double sigma = 0.1, c1 = -0.2, c2 = 0.1;
  struct State {
    double u, r2, s, big_d, y1, y2, ct, st;
  };
  auto eval = [=](const Point& p) {
    State q;
    const double t = p[0];
    q.ct = std::cos(4.0 * t);
    q.st = std::sin(4.0 * t);
    q.y1 = p[1] * q.ct + p[2] * q.st;
    q.y2 = -p[1] * q.st + p[2] * q.ct;
    q.s = sigma * sigma + 2.0 * eps * t;
    q.big_d = 2.0 * q.s;
    q.r2 = (q.y1 - c1) * (q.y1 - c1) + (q.y2 - c2) * (q.y2 - c2);
    q.u = sigma * sigma / q.s * std::exp(-q.r2 / q.big_d);
    return q;
  };
  ExactSolution ex;
  ex.value = [=](const Point& p) { return eval(p).u; };
  ex.grad = [=](const Point& p) {
    const auto q = eval(p);
    const double a = q.y1 - c1, b = q.y2 - c2;
    return Point{0.0, -q.u / q.big_d * 2.0 * (a * q.ct - b * q.st),
                 -q.u / q.big_d * 2.0 * (a * q.st + b * q.ct)};
  };
  ex.laplacian = [=](const Point& p) {
    const auto q = eval(p);
    return q.u * (4.0 * q.r2 / (q.big_d * q.big_d) - 4.0 / q.big_d);
  };
  ex.dt = [=](const Point& p) {
    const auto q = eval(p);
    const double dr2 = 8.0 * (c2 * q.y1 - c1 * q.y2);
    return q.u * (-2.0 * eps / q.s - dr2 / q.big_d + 4.0 * eps * q.r2 / (q.big_d * q.big_d));
  };
  return ex;
}

// heat kernel translated with speed b
ExactSolution pulse_1d(double eps, double b) {
  constexpr double sigma = 0.1, c = -0.2;
  ExactSolution ex;
  auto parts = [=](const Point& p, double& u, double& xi, double& s) {
    s = sigma * sigma + 2.0 * eps * p[0];
    xi = p[1] - c - b * p[0];
    u = std::sqrt(sigma * sigma / s) * std::exp(-xi * xi / (2.0 * s));
  };
  ex.value = [=](const Point& p) {
    double u, xi, s;
    parts(p, u, xi, s);
    return u;
  };
  ex.grad = [=](const Point& p) {
    double u, xi, s;
    parts(p, u, xi, s);
    return Point{0.0, -xi / s * u, 0.0};
  };
  ex.laplacian = [=](const Point& p) {
    double u, xi, s;
    parts(p, u, xi, s);
    return (xi * xi / (s * s) - 1.0 / s) * u;
  };
  ex.dt = [=](const Point& p) {
    double u, xi, s;
    parts(p, u, xi, s);
    return u * (-eps / s + xi * b / s + xi * xi * eps / (s * s));
  };
  return ex;
}

// X(s) = (e^{(s-1)/eps} - 1)/(e^{-1/eps} - 1) + s - 1 with derivatives
struct LayerProfile {
  double eps;
  double denom() const { return std::expm1(-1.0 / eps); }
  double v(double s) const { return std::expm1((s - 1.0) / eps) / denom() + s - 1.0; }
  double d1(double s) const { return std::exp((s - 1.0) / eps) / (eps * denom()) + 1.0; }
  double d2(double s) const { return std::exp((s - 1.0) / eps) / (eps * eps * denom()); }
};

ExactSolution boundary_layer(double eps, int d) {
  const LayerProfile X{eps};
  ExactSolution ex;
  ex.value = [=](const Point& p) {
    double u = -std::expm1(-p[0]);
    for (int a = 1; a <= d; ++a) u *= X.v(p[a]);
    return u;
  };
  ex.dt = [=](const Point& p) {
    double u = std::exp(-p[0]);
    for (int a = 1; a <= d; ++a) u *= X.v(p[a]);
    return u;
  };
  ex.grad = [=](const Point& p) {
    const double e = -std::expm1(-p[0]);
    Point g{};
    if (d == 1) {
      g[1] = e * X.d1(p[1]);
    } else {
      g[1] = e * X.d1(p[1]) * X.v(p[2]);
      g[2] = e * X.v(p[1]) * X.d1(p[2]);
    }
    return g;
  };
  ex.laplacian = [=](const Point& p) {
    const double e = -std::expm1(-p[0]);
    if (d == 1) return e * X.d2(p[1]);
    return e * (X.d2(p[1]) * X.v(p[2]) + X.v(p[1]) * X.d2(p[2]));
  };
  return ex;
}

// (1 - e^{-t}) atan(z) P with z = a (x2 - x1) and P = 1 - (x1 + x2)^2 / 2; in
// one dimension x2 = 0.
ExactSolution interior_layer(double eps, int d) {
  const double a = 1.0 / (std::sqrt(2.0) * eps);
  auto coords = [=](const Point& p, double& x, double& y) {
    x = p[1];
    y = d > 1 ? p[2] : 0.0;
  };
  ExactSolution ex;
  ex.value = [=](const Point& p) {
    double x, y;
    coords(p, x, y);
    return -std::expm1(-p[0]) * std::atan(a * (y - x)) * (1.0 - 0.5 * (x + y) * (x + y));
  };
  ex.dt = [=](const Point& p) {
    double x, y;
    coords(p, x, y);
    return std::exp(-p[0]) * std::atan(a * (y - x)) * (1.0 - 0.5 * (x + y) * (x + y));
  };
  ex.grad = [=](const Point& p) {
    double x, y;
    coords(p, x, y);
    const double e = -std::expm1(-p[0]);
    const double z = a * (y - x);
    const double phi = std::atan(z), dphi = a / (1.0 + z * z);
    const double P = 1.0 - 0.5 * (x + y) * (x + y), dP = -(x + y);
    Point g{};
    g[1] = e * (-dphi * P + phi * dP);
    if (d > 1) g[2] = e * (dphi * P + phi * dP);
    return g;
  };
  ex.laplacian = [=](const Point& p) {
    double x, y;
    coords(p, x, y);
    const double e = -std::expm1(-p[0]);
    const double z = a * (y - x);
    const double phi = std::atan(z);
    const double w = 1.0 + z * z;
    const double dphi = a / w;                  // d phi / dy = -d phi / dx
    const double ddphi = -2.0 * a * a * z / (w * w);  // same in x and y
    const double P = 1.0 - 0.5 * (x + y) * (x + y), dP = -(x + y);
    // per axis: phi'' P + 2 phi' P' + phi P'' with P'' = -1
    double lap = ddphi * P + 2.0 * (-dphi) * dP - phi;
    if (d > 1) lap += ddphi * P + 2.0 * dphi * dP - phi;
    return e * lap;
  };
  return ex;
}

}  // namespace

ProblemSpec manufactured_problem(std::string name, const Domain& domain, double epsilon,
                                 AdvectionField beta_bar, ExactSolution exact) {
  if (!(epsilon > 0.0)) throw ProblemError("diffusion constant must be positive");
  ProblemSpec spec;
  spec.name = std::move(name);
  spec.epsilon = epsilon;
  spec.domain = domain;
  spec.beta_bar = std::move(beta_bar);
  spec.exact = std::move(exact);
  const auto ex = *spec.exact;
  spec.dirichlet = ex.value;
  spec.initial = [ex](const Point& p) {
    Point q = p;
    q[0] = 0.0;
    return ex.value(q);
  };
  const int d = domain.d;
  const auto beta = spec.beta_bar;
  spec.source = [ex, beta, epsilon, d](const Point& p) {
    const auto b = beta(p);
    const Point g = ex.grad(p);
    double adv = 0.0;
    for (int a = 0; a < d; ++a) adv += b[a] * g[a + 1];
    return ex.dt(p) + adv - epsilon * ex.laplacian(p);
  };
  return spec;
}

ProblemSpec builtin_problem(const std::string& name, double epsilon, int d) {
  if (!(epsilon > 0.0)) throw ProblemError("diffusion constant must be positive");
  if (d < 1 || d > 2) throw ProblemError("spatial dimension must be 1 or 2");
  Domain dom;
  dom.d = d;
  dom.t_end = 1.0;
  if (name == "rotating_pulse") {
    dom.x_lo = {-0.5, -0.5};
    dom.x_hi = {0.5, 0.5};
    if (d == 2) {
      auto spec = manufactured_problem(name, dom, epsilon,
                                       [](const Point& p) { return std::array<double, 2>{-4.0 * p[2], 4.0 * p[1]}; },
                                       rotating_pulse_2d(epsilon));
      spec.source = [](const Point&) { return 0.0; };
      return spec;
    }
    constexpr double speed = 0.4;
    auto spec = manufactured_problem(name, dom, epsilon,
                                     [](const Point&) { return std::array<double, 2>{speed, 0.0}; },
                                     pulse_1d(epsilon, speed));
    spec.source = [](const Point&) { return 0.0; };
    return spec;
  }
  if (name == "boundary_layer") {
    dom.x_lo = {0.0, 0.0};
    dom.x_hi = {1.0, 1.0};
    return manufactured_problem(name, dom, epsilon,
                                [](const Point&) { return std::array<double, 2>{1.0, 1.0}; },
                                boundary_layer(epsilon, d));
  }
  if (name == "interior_layer") {
    dom.x_lo = {-0.5, -0.5};
    dom.x_hi = {0.5, 0.5};
    return manufactured_problem(name, dom, epsilon,
                                [](const Point&) { return std::array<double, 2>{1.0, 1.0}; },
                                interior_layer(epsilon, d));
  }
  throw ProblemError("unknown problem '" + name + "'");
}

ProblemSpec linear_problem(int d, double epsilon, std::array<double, 2> b) {
  Domain dom;
  dom.d = d;
  ExactSolution ex;
  ex.value = [d](const Point& p) { return p[0] + p[1] + (d > 1 ? p[2] : 0.0); };
  ex.dt = [](const Point&) { return 1.0; };
  ex.grad = [d](const Point&) { return Point{0.0, 1.0, d > 1 ? 1.0 : 0.0}; };
  ex.laplacian = [](const Point&) { return 0.0; };
  if (d == 1) b[1] = 0.0;
  return manufactured_problem("linear", dom, epsilon, [b](const Point&) { return b; }, ex);
}

double manufactured_source(const ProblemSpec& spec, const Point& x) {
  if (!spec.exact) throw ProblemError("manufactured source needs an exact solution");
  const auto& ex = *spec.exact;
  const auto b = spec.beta_bar(x);
  const Point g = ex.grad(x);
  double adv = 0.0;
  for (int a = 0; a < spec.domain.d; ++a) adv += b[a] * g[a + 1];
  return ex.dt(x) + adv - spec.epsilon * ex.laplacian(x);
}

std::pair<int, double> outward_normal(const Facet& facet) {
  return {facet.normal_axis, facet.owner[0] >= 0 ? 1.0 : -1.0};
}

BoundaryValue boundary_data(const ProblemSpec& spec, const Facet& facet, const Point& x) {
  if (facet.tag == BoundaryTag::interior) throw ProblemError("boundary data requested on an interior facet");
  const auto [axis, sign] = outward_normal(facet);
  BoundaryValue bv;
  bv.beta_n = sign * spec.beta(x)[axis];
  bv.zeta_minus = bv.beta_n < 0.0 ? 1.0 : 0.0;
  bv.zeta_plus = bv.beta_n > 0.0 ? 1.0 : 0.0;
  switch (facet.tag) {
    case BoundaryTag::dirichlet:
      bv.kind = ConditionKind::dirichlet;
      bv.value = spec.dirichlet ? spec.dirichlet(x) : 0.0;
      break;
    case BoundaryTag::initial:
      bv.value = spec.initial ? spec.initial(x) : 0.0;
      break;
    case BoundaryTag::final:
      bv.value = 0.0;
      break;
    case BoundaryTag::neumann:
      if (spec.lateral_neumann) {
        bv.value = spec.lateral_neumann(x);
      } else if (spec.exact) {
        // g = eps grad(u).n - zeta^- (beta.n) u
        const double dudn = sign * spec.exact->grad(x)[axis];
        bv.value = spec.epsilon * dudn - bv.zeta_minus * bv.beta_n * spec.exact->value(x);
      }
      break;
    case BoundaryTag::interior:
      break;
  }
  return bv;
}

}  // namespace sthdg
