#pragma once

#include "sthdg/estimator.hpp"
#include "sthdg/solver.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sthdg {

struct MarkResult {
  std::vector<ElementId> refine;
  std::vector<ElementId> coarsen;
};

// Sort by eta descending (ties: ascending id); refine the first ceil(rf n),
// coarsen the last floor(cf n).
MarkResult mark(std::span<const ElementId> ids, std::span<const double> eta, double refine_fraction = 0.25,
                double coarsen_fraction = 0.10);
MarkResult mark(const SpaceTimeMesh& mesh, const EstimateResult& est, double refine_fraction = 0.25,
                double coarsen_fraction = 0.10);

enum class StudyMode { uniform, amr };
const char* to_string(StudyMode m);

struct StudyRecord {
  int cycle = 0;
  std::size_t n_elements = 0;
  std::size_t n_dofs = 0;
  double eta = 0.0;
  double true_error = 0.0;  // NaN without an exact solution
  double eff_index = 0.0;
  double wall_ms = 0.0;
  // diagnostics
  double reliability_ratio = 0.0;    // eps^{1/2} |||u - u_h||| / eta
  double max_local_efficiency = 0.0;
  double decomposition_defect = 0.0;  // |eta^2 - sum eta_K^2| / eta^2
  double solver_residual = 0.0;
};

struct CycleView {
  int cycle;
  const SpaceTimeMesh& mesh;
  const DiscreteSolution& solution;
  const EstimateResult& estimate;
  const StudyRecord& record;
};

struct StudyOptions {
  StudyMode mode = StudyMode::amr;
  int cycles = 1;
  int p_s = 1;
  TimeStepPolicy policy = TimeStepPolicy::proportional;
  int n_slabs = 4;
  int n_cells = 4;
  SolveMode solve_mode = SolveMode::automatic;
  double refine_fraction = 0.25;
  double coarsen_fraction = 0.10;
  std::size_t max_dofs = 0;  // 0: no cap; the study stops before exceeding it
  std::function<void(const CycleView&)> on_cycle;
};

struct StudyResult {
  std::vector<StudyRecord> records;
  bool solver_failed = false;
  bool capped = false;
  std::string message;
};

struct CycleOutput {
  DiscreteSolution solution;
  SolveReport report;
};

// Assemble and solve on one mesh.
CycleOutput solve_on(const HdgSpace& space, const ProblemSpec& spec, SolveMode mode = SolveMode::automatic);

// Solver failures end the study; records of completed cycles are kept.
StudyResult run_study(const ProblemSpec& spec, const StudyOptions& opts);

// Header: cycle,n_elements,n_dofs,eta,true_error,eff_index,wall_ms. wall_ms is
// written as 0 unless timing is requested, keeping reruns byte-identical.
void write_study_csv(std::ostream& os, std::span<const StudyRecord> records, bool timing = false);

// Least-squares slope of log(y) against log(x) over the last `last` entries.
double loglog_slope(std::span<const double> x, std::span<const double> y, std::size_t last);

}  // namespace sthdg
