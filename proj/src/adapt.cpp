#include "sthdg/adapt.hpp"

#include "sthdg/log.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace sthdg {

const char* to_string(StudyMode m) { return m == StudyMode::uniform ? "uniform" : "amr"; }

MarkResult mark(std::span<const ElementId> ids, std::span<const double> eta, double rf, double cf) {
  if (ids.empty()) throw std::invalid_argument("mark: empty estimate list");
  if (ids.size() != eta.size()) throw std::invalid_argument("mark: ids and estimates differ in length");
  if (!(rf >= 0.0 && rf <= 1.0 && cf >= 0.0 && cf <= 1.0 && rf + cf <= 1.0))
    throw std::invalid_argument("mark: fractions must lie in [0,1] with sum at most 1");
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (eta[a] != eta[b]) return eta[a] > eta[b];
    return ids[a] < ids[b];
  });
  // tolerance guards products like 0.25 * 4 against rounding up
  const auto n_ref = std::min(n, static_cast<std::size_t>(std::ceil(rf * n - 1e-9)));
  const auto n_crs = std::min(n - n_ref, static_cast<std::size_t>(std::floor(cf * n + 1e-9)));
  MarkResult out;
  for (std::size_t i = 0; i < n_ref; ++i) out.refine.push_back(ids[order[i]]);
  for (std::size_t i = n - n_crs; i < n; ++i) out.coarsen.push_back(ids[order[i]]);
  return out;
}

MarkResult mark(const SpaceTimeMesh& mesh, const EstimateResult& est, double rf, double cf) {
  std::vector<ElementId> ids;
  std::vector<double> eta;
  ids.reserve(mesh.n_elements());
  eta.reserve(mesh.n_elements());
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    ids.push_back(mesh.element(static_cast<int>(k)).id);
    eta.push_back(est.elements[k].eta);
  }
  return mark(ids, eta, rf, cf);
}

CycleOutput solve_on(const HdgSpace& space, const ProblemSpec& spec, SolveMode mode) {
  const SparseSystem sys = assemble(space, spec);
  CycleOutput out;
  out.solution.space = &space;
  SolveOptions so;
  so.mode = mode;
  out.solution.coeffs = solve_system(space, sys, so, &out.report);
  return out;
}

StudyResult run_study(const ProblemSpec& spec, const StudyOptions& opts) {
  if (opts.cycles < 1) throw std::invalid_argument("study needs at least one cycle");
  StudyResult result;
  SpaceTimeMesh mesh = SpaceTimeMesh::build(spec.domain, opts.n_slabs, opts.n_cells, opts.policy);
  for (int cycle = 0; cycle < opts.cycles; ++cycle) {
    const auto start = std::chrono::steady_clock::now();
    HdgSpace space(mesh, opts.p_s);
    if (opts.max_dofs > 0 && space.dofs().n_dofs > opts.max_dofs) {
      result.capped = true;
      result.message = "stopped before cycle " + std::to_string(cycle) + ": " +
                       std::to_string(space.dofs().n_dofs) + " dofs exceed the cap of " +
                       std::to_string(opts.max_dofs);
      log_message(LogLevel::warn, result.message);
      break;
    }
    CycleOutput solved;
    auto lap = [t0 = std::chrono::steady_clock::now()]() mutable {
      const auto now = std::chrono::steady_clock::now();
      const double ms = std::chrono::duration<double, std::milli>(now - t0).count();
      t0 = now;
      return std::to_string(static_cast<long long>(ms)) + " ms";
    };
    try {
      solved = solve_on(space, spec, opts.solve_mode);
      log_message(LogLevel::info, "assemble+solve " + lap() + " (" + solved.report.method + " " +
                                      std::to_string(static_cast<long long>(solved.report.seconds * 1e3)) + " ms, " +
                                      std::to_string(solved.report.iterations) + " iterations)");
    } catch (const SolverError& e) {
      result.solver_failed = true;
      result.message = "solver failure in cycle " + std::to_string(cycle) + ": " + e.what();
      log_message(LogLevel::error, result.message);
      break;
    }
    const EstimateResult est = estimate(solved.solution, spec);
    log_message(LogLevel::info, "estimate " + lap());

    StudyRecord rec;
    rec.cycle = cycle;
    rec.n_elements = mesh.n_elements();
    rec.n_dofs = space.dofs().n_dofs;
    rec.eta = est.eta;
    rec.solver_residual = solved.report.relative_residual;
    rec.decomposition_defect =
        est.eta_squared > 0.0 ? std::abs(est.eta_squared - est.sum_element_squares) / est.eta_squared : 0.0;
    if (spec.exact) {
      const ErrorResult err = error_norms(solved.solution, spec, est.eta);
      rec.true_error = err.sT;
      rec.eff_index = err.eff_index;
      rec.reliability_ratio = est.eta > 0.0 ? std::sqrt(spec.epsilon) * err.sT / est.eta : 0.0;
      const auto loc = local_efficiency_ratios(mesh, est, err, spec.epsilon, spec.domain.t_end);
      rec.max_local_efficiency = loc.empty() ? 0.0 : *std::max_element(loc.begin(), loc.end());
      log_message(LogLevel::info, "error norms " + lap());
    } else {
      rec.true_error = std::numeric_limits<double>::quiet_NaN();
      rec.eff_index = std::numeric_limits<double>::quiet_NaN();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.records.push_back(rec);
    log_message(LogLevel::info, "cycle " + std::to_string(cycle) + ": " + std::to_string(rec.n_elements) +
                                    " elements, " + std::to_string(rec.n_dofs) + " dofs, eta " +
                                    std::to_string(rec.eta));
    if (opts.on_cycle) opts.on_cycle(CycleView{cycle, mesh, solved.solution, est, result.records.back()});

    if (cycle + 1 == opts.cycles) break;
    if (opts.mode == StudyMode::uniform) {
      mesh = refine_uniform(mesh);
    } else {
      const MarkResult m = mark(mesh, est, opts.refine_fraction, opts.coarsen_fraction);
      mesh = refine_and_coarsen(mesh, m.refine, m.coarsen);
    }
  }
  return result;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

}  // namespace

void write_study_csv(std::ostream& os, std::span<const StudyRecord> records, bool timing) {
  os << "cycle,n_elements,n_dofs,eta,true_error,eff_index,wall_ms\n";
  for (const auto& r : records) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", timing ? r.wall_ms : 0.0);
    os << r.cycle << ',' << r.n_elements << ',' << r.n_dofs << ',' << fmt(r.eta) << ',' << fmt(r.true_error) << ','
       << fmt(r.eff_index) << ',' << wall << '\n';
  }
}

double loglog_slope(std::span<const double> x, std::span<const double> y, std::size_t last) {
  if (x.size() != y.size()) throw std::invalid_argument("slope: length mismatch");
  const std::size_t n = std::min(last, x.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t b = x.size() - n;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = b; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  return den != 0.0 ? (n * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace sthdg
