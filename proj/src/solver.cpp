#include "sthdg/solver.hpp"

#include "sthdg/log.hpp"

#include <Eigen/SparseLU>
#include <Eigen/UmfPackSupport>
#include <unsupported/Eigen/IterativeSolvers>

#include <chrono>
#include <cmath>
#include <numeric>
#include <regex>

namespace sthdg {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

double rel_norm(const Eigen::VectorXd& r, const Eigen::VectorXd& b) {
  const double nb = b.norm();
  return nb > 0.0 ? r.norm() / nb : r.norm();
}

// Locate the breakdown column with SparseLU, which reports it.
[[noreturn]] void throw_singular(const ColMatrix& A, const std::string& where) {
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  std::int64_t pivot = -1;
  std::smatch m;
  const std::string msg = lu.lastErrorMessage();
  static const std::regex col_re("ZERO COLUMN AT\\s*(\\d+)");
  if (std::regex_search(msg, m, col_re)) pivot = std::stoll(m[1].str());
  throw SolverError("singular system" + where + (pivot >= 0 ? ": zero pivot at column " + std::to_string(pivot) : ""),
                    pivot);
}

class Factorization {
 public:
  explicit Factorization(const ColMatrix& A, const std::string& where) : A_(A) {
    lu_.analyzePattern(A_);
    lu_.factorize(A_);
    if (lu_.info() != Eigen::Success) throw_singular(A_, where);
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) { return lu_.solve(b); }

 private:
  const ColMatrix& A_;
  Eigen::UmfPackLU<ColMatrix> lu_;
};

// x <- x + A^{-1}(b - A x) until the contract holds
template <class Op>
void refine(const ColMatrix& A, const Eigen::VectorXd& b, Eigen::VectorXd& x, Op&& apply_inverse,
            const SolveOptions& opts, SolveReport& rep) {
  std::vector<double> history;
  Eigen::VectorXd r = b - A * x;
  double res = rel_norm(r, b);
  history.push_back(res);
  int steps = 0;
  while (!(res <= opts.tolerance) && steps < opts.max_refinement_steps && std::isfinite(res)) {
    x += apply_inverse(r);
    r = b - A * x;
    res = rel_norm(r, b);
    history.push_back(res);
    ++steps;
  }
  rep.relative_residual = res;
  rep.refinement_steps = steps;
  if (!(res <= opts.tolerance))
    throw SolverError("residual contract not met: relative residual " + std::to_string(res), -1, history);
}

// ILU(0) of P A P^T applied as P^T (LU)^{-1} P.
class PermutedIlu0 {
 public:
  PermutedIlu0() = default;
  void set_order(const std::vector<int>* order) { order_ = order; }

  template <class M>
  PermutedIlu0& analyzePattern(const M&) {
    return *this;
  }
  template <class M>
  PermutedIlu0& factorize(const M& A) {
    return compute(A);
  }
  template <class M>
  PermutedIlu0& compute(const M& A) {
    const int n = static_cast<int>(A.rows());
    pos_.resize(n);
    for (int i = 0; i < n; ++i) pos_[(*order_)[i]] = i;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P(n);
    for (int i = 0; i < n; ++i) P.indices()[i] = pos_[i];
    lu_ = SparseMatrix(A).twistedBy(P);
    lu_.makeCompressed();
    info_ = factor() ? Eigen::Success : Eigen::NumericalIssue;
    return *this;
  }
  Eigen::ComputationInfo info() const { return info_; }

  template <class V>
  Eigen::VectorXd solve(const V& b) const {
    const int n = static_cast<int>(lu_.rows());
    const int* rp = lu_.outerIndexPtr();
    const int* ci = lu_.innerIndexPtr();
    const double* v = lu_.valuePtr();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = b[(*order_)[i]];
    for (int i = 0; i < n; ++i)
      for (int p = rp[i]; p < diag_[i]; ++p) y[i] -= v[p] * y[ci[p]];
    for (int i = n - 1; i >= 0; --i) {
      for (int p = diag_[i] + 1; p < rp[i + 1]; ++p) y[i] -= v[p] * y[ci[p]];
      y[i] /= v[diag_[i]];
    }
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[(*order_)[i]] = y[i];
    return x;
  }

 private:
  bool factor() {
    const int n = static_cast<int>(lu_.rows());
    const int* rp = lu_.outerIndexPtr();
    const int* ci = lu_.innerIndexPtr();
    double* v = lu_.valuePtr();
    diag_.assign(n, -1);
    for (int i = 0; i < n; ++i)
      for (int p = rp[i]; p < rp[i + 1]; ++p)
        if (ci[p] == i) diag_[i] = p;
    std::vector<int> at(n, -1);
    for (int i = 0; i < n; ++i) {
      if (diag_[i] < 0) return false;
      for (int p = rp[i]; p < rp[i + 1]; ++p) at[ci[p]] = p;
      for (int p = rp[i]; p < rp[i + 1] && ci[p] < i; ++p) {
        const int k = ci[p];
        v[p] /= v[diag_[k]];
        for (int q = diag_[k] + 1; q < rp[k + 1]; ++q)
          if (at[ci[q]] >= 0) v[at[ci[q]]] -= v[p] * v[q];
      }
      for (int p = rp[i]; p < rp[i + 1]; ++p) at[ci[p]] = -1;
      if (!(std::abs(v[diag_[i]]) > 0.0) || !std::isfinite(v[diag_[i]])) return false;
    }
    return true;
  }

  const std::vector<int>* order_ = nullptr;
  std::vector<int> pos_, diag_;
  SparseMatrix lu_;
  Eigen::ComputationInfo info_ = Eigen::Success;
};

}  // namespace

Eigen::VectorXd solve_krylov(const SparseSystem& system, const std::vector<int>& order, const SolveOptions& opts,
                             SolveReport* report) {
  const auto n = system.matrix.rows();
  if (system.matrix.cols() != n || n < 1) throw SolverError("system must be square and nonempty");
  if (static_cast<std::int64_t>(order.size()) != n) throw SolverError("ordering has the wrong length");
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.method = "gmres-ilu0";
  rep.n = n;
  rep.nnz = system.matrix.nonZeros();
  Eigen::GMRES<SparseMatrix, PermutedIlu0> gmres;
  gmres.preconditioner().set_order(&order);
  gmres.set_restart(opts.restart);
  gmres.setMaxIterations(opts.max_iterations);
  gmres.setTolerance(0.01 * opts.tolerance);
  gmres.compute(system.matrix);
  if (gmres.preconditioner().info() != Eigen::Success) throw SolverError("incomplete factorization broke down");
  std::vector<double> history;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  double res = 1.0;
  for (int pass = 0; pass <= opts.max_refinement_steps; ++pass) {
    const Eigen::VectorXd r = system.rhs - system.matrix * x;
    res = rel_norm(r, system.rhs);
    history.push_back(res);
    if (res <= opts.tolerance) break;
    x += gmres.solve(r);
    rep.iterations += static_cast<int>(gmres.iterations());
  }
  if (!(res <= opts.tolerance) || !x.allFinite())
    throw SolverError("GMRES did not meet the residual contract: relative residual " + std::to_string(res), -1,
                      history);
  rep.relative_residual = res;
  rep.refinement_steps = static_cast<int>(history.size()) - 1;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report) *report = rep;
  return x;
}

std::vector<int> time_ordering(const HdgSpace& space) {
  const auto& mesh = space.mesh();
  const auto& dm = space.dofs();
  std::vector<double> key(dm.n_dofs);
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    const double t = mesh.element(static_cast<int>(k)).box.center()[0];
    for (int i = 0; i < dm.element_size; ++i) key[dm.element_offset(static_cast<int>(k)) + i] = t;
  }
  for (std::size_t f = 0; f < mesh.n_facets(); ++f) {
    const double t = mesh.facet(static_cast<int>(f)).box.center()[0];
    for (auto i = dm.facet_offset[f]; i < dm.facet_offset[f + 1]; ++i) key[i] = t;
  }
  std::vector<int> order(dm.n_dofs);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });
  return order;
}

Eigen::VectorXd solve_system(const HdgSpace& space, const SparseSystem& system, const SolveOptions& opts,
                             SolveReport* report) {
  switch (opts.mode) {
    case SolveMode::monolithic: return solve(system, opts, report);
    case SolveMode::slab_sequential: return solve_block_lower(system, slab_blocks(space), opts, report);
    case SolveMode::krylov: return solve_krylov(system, time_ordering(space), opts, report);
    case SolveMode::automatic: break;
  }
  if (system.dim() <= opts.direct_limit) return solve(system, opts, report);
  try {
    return solve_krylov(system, time_ordering(space), opts, report);
  } catch (const SolverError& e) {
    log_message(LogLevel::warn, std::string("Krylov solve failed, using slab-sequential LU: ") + e.what());
    return solve_block_lower(system, slab_blocks(space), opts, report);
  }
}

double relative_residual(const SparseSystem& system, const Eigen::VectorXd& x) {
  return rel_norm(system.rhs - system.matrix * x, system.rhs);
}

Eigen::VectorXd solve(const SparseSystem& system, const SolveOptions& opts, SolveReport* report) {
  if (system.matrix.rows() != system.matrix.cols() || system.matrix.rows() < 1)
    throw SolverError("system must be square and nonempty");
  if (system.rhs.size() != system.matrix.rows()) throw SolverError("right-hand side has the wrong length");
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.method = "umfpack-lu";
  rep.n = system.matrix.rows();
  rep.nnz = system.matrix.nonZeros();
  const ColMatrix A = system.matrix;
  Factorization lu(A, "");
  Eigen::VectorXd x = lu.solve(system.rhs);
  if (!x.allFinite()) throw_singular(A, "");
  refine(A, system.rhs, x, [&](const Eigen::VectorXd& r) { return lu.solve(r); }, opts, rep);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report) *report = rep;
  return x;
}

std::vector<int> slab_blocks(const HdgSpace& space) {
  const auto& mesh = space.mesh();
  const auto& dm = space.dofs();
  std::vector<int> block(dm.n_dofs, 0);
  for (std::size_t k = 0; k < mesh.n_elements(); ++k) {
    const int s = mesh.element(static_cast<int>(k)).slab;
    for (int i = 0; i < dm.element_size; ++i) block[dm.element_offset(static_cast<int>(k)) + i] = s;
  }
  for (std::size_t f = 0; f < mesh.n_facets(); ++f) {
    const auto& F = mesh.facet(static_cast<int>(f));
    const int owner = F.owner[1] >= 0 ? F.owner[1] : F.owner[0];
    const int s = mesh.element(owner).slab;
    for (auto i = dm.facet_offset[f]; i < dm.facet_offset[f + 1]; ++i) block[i] = s;
  }
  return block;
}

Eigen::VectorXd solve_block_lower(const SparseSystem& system, const std::vector<int>& block_of_dof,
                                  const SolveOptions& opts, SolveReport* report) {
  const auto n = system.matrix.rows();
  if (static_cast<std::int64_t>(block_of_dof.size()) != n) throw SolverError("block map has the wrong length");
  const auto start = std::chrono::steady_clock::now();
  const int n_blocks = block_of_dof.empty() ? 0 : *std::max_element(block_of_dof.begin(), block_of_dof.end()) + 1;

  // stable permutation grouping dofs by block
  std::vector<std::vector<int>> members(n_blocks);
  for (int i = 0; i < n; ++i) members[block_of_dof[i]].push_back(i);
  std::vector<int> local(n);
  for (const auto& m : members)
    for (std::size_t j = 0; j < m.size(); ++j) local[m[j]] = static_cast<int>(j);

  const auto& A = system.matrix;  // row major
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int b = 0; b < n_blocks; ++b) {
    const auto& rows = members[b];
    const int nb = static_cast<int>(rows.size());
    if (nb == 0) continue;
    std::vector<Eigen::Triplet<double, int>> trip;
    Eigen::VectorXd rhs(nb);
    for (int j = 0; j < nb; ++j) {
      const int r = rows[j];
      double v = system.rhs[r];
      for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
        const int c = static_cast<int>(it.col());
        const int cb = block_of_dof[c];
        if (cb == b) {
          trip.emplace_back(j, local[c], it.value());
        } else if (cb < b) {
          v -= it.value() * x[c];
        } else if (it.value() != 0.0) {
          throw SolverError("matrix is not block lower triangular: row " + std::to_string(r) + " couples to block " +
                            std::to_string(cb));
        }
      }
      rhs[j] = v;
    }
    ColMatrix Ab(nb, nb);
    Ab.setFromTriplets(trip.begin(), trip.end());
    Ab.makeCompressed();
    Factorization lu(Ab, " in block " + std::to_string(b));
    Eigen::VectorXd xb = lu.solve(rhs);
    for (int step = 0; step < opts.max_refinement_steps; ++step) {
      const Eigen::VectorXd r = rhs - Ab * xb;
      if (rel_norm(r, rhs) <= 0.1 * opts.tolerance) break;
      xb += lu.solve(r);
    }
    for (int j = 0; j < nb; ++j) x[rows[j]] = xb[j];
  }
  SolveReport rep;
  rep.method = "umfpack-lu-slab-sequential";
  rep.n = n;
  rep.nnz = A.nonZeros();
  rep.blocks = n_blocks;
  if (!x.allFinite()) throw SolverError("non-finite solution in block solve");
  rep.relative_residual = relative_residual(system, x);
  if (!(rep.relative_residual <= opts.tolerance)) {
    // fall back to the monolithic factorization for the correction
    const ColMatrix Ac = A;
    Factorization lu(Ac, "");
    refine(Ac, system.rhs, x, [&](const Eigen::VectorXd& r) { return lu.solve(r); }, opts, rep);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report) *report = rep;
  return x;
}

std::string solver_backend() {
  return "UMFPACK " + std::to_string(UMFPACK_MAIN_VERSION) + "." + std::to_string(UMFPACK_SUB_VERSION) + "." +
         std::to_string(UMFPACK_SUBSUB_VERSION);
}

}  // namespace sthdg
