#pragma once

#include "sthdg/assembly.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sthdg {

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, std::int64_t pivot = -1, std::vector<double> history = {})
      : std::runtime_error(msg), pivot_(pivot), history_(std::move(history)) {}
  // column where elimination broke down, -1 if unknown
  std::int64_t pivot() const { return pivot_; }
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::int64_t pivot_;
  std::vector<double> history_;
};

// automatic: direct LU up to SolveOptions::direct_limit unknowns, restarted
// GMRES with ILU(0) in time order above it (direct fallback on failure)
enum class SolveMode { monolithic, slab_sequential, krylov, automatic };

struct SolveOptions {
  SolveMode mode = SolveMode::monolithic;
  double tolerance = 1e-10;
  int max_refinement_steps = 3;
  std::int64_t direct_limit = 60000;
  int restart = 50;
  int max_iterations = 2000;
};

struct SolveReport {
  std::string method;
  double relative_residual = 0.0;
  int refinement_steps = 0;
  std::int64_t n = 0;
  std::int64_t nnz = 0;
  int blocks = 1;
  int iterations = 0;
  double seconds = 0.0;
};

// Direct sparse LU with fill-reducing ordering; the residual contract is
// checked after every solve and enforced with iterative refinement.
Eigen::VectorXd solve(const SparseSystem& system, const SolveOptions& opts = {}, SolveReport* report = nullptr);

// Restarted GMRES, ILU(0)-preconditioned on the matrix permuted by `order`
// (order[i] is the original index of the i-th unknown). Throws SolverError with
// the residual history if the contract is not met.
Eigen::VectorXd solve_krylov(const SparseSystem& system, const std::vector<int>& order, const SolveOptions& opts = {},
                             SolveReport* report = nullptr);

// Unknowns sorted by the time centre of their element or facet.
std::vector<int> time_ordering(const HdgSpace& space);

// Dispatch on opts.mode.
Eigen::VectorXd solve_system(const HdgSpace& space, const SparseSystem& system, const SolveOptions& opts = {},
                             SolveReport* report = nullptr);

// Block id of every dof for the slab-sequential mode: element dofs belong to
// their slab, facet dofs to the slab of their upper owner.
std::vector<int> slab_blocks(const HdgSpace& space);

// Block forward substitution. Throws SolverError if the matrix has an entry
// coupling a block to a later one.
Eigen::VectorXd solve_block_lower(const SparseSystem& system, const std::vector<int>& block_of_dof,
                                  const SolveOptions& opts = {}, SolveReport* report = nullptr);

double relative_residual(const SparseSystem& system, const Eigen::VectorXd& x);

// e.g. "UMFPACK 5.7.9"
std::string solver_backend();

}  // namespace sthdg
