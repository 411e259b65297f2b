#pragma once

// Flexible GMRES (right preconditioning, no restart) and the Arnoldi
// machinery shared with the constrained drivers in cgmres.hpp.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spk/constraints.hpp"
#include "spk/linalg.hpp"
#include "spk/preconditioners.hpp"
#include "spk/timer.hpp"

namespace spk {

enum class SolveStatus { Converged, MaxIter, Breakdown };

enum class IterationPhase { Unconstrained, ConstrainedOk, ConstrainedFailed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::Breakdown: return "breakdown";
  }
  return "?";
}

inline const char* to_string(IterationPhase p) {
  switch (p) {
    case IterationPhase::Unconstrained: return "unconstrained";
    case IterationPhase::ConstrainedOk: return "constrained_ok";
    case IterationPhase::ConstrainedFailed: return "constrained_failed";
  }
  return "?";
}

// Accumulated wall time per phase, in seconds.
struct PhaseTimings {
  double precondition = 0.0;
  double matvec = 0.0;
  double orthogonalise = 0.0;
  double hessenberg_solve = 0.0;
  double constraint_reduce = 0.0;
  double constrained_solve = 0.0;

  double total() const {
    return precondition + matvec + orthogonalise + hessenberg_solve + constraint_reduce + constrained_solve;
  }
};

struct SolveReport {
  // Least-squares residual estimate of the iterate chosen at each iteration.
  std::vector<double> residual_history;
  // misfits[iteration][constraint], filled only when constraints are monitored.
  std::vector<Vector> constraint_misfit_history;
  std::vector<IterationPhase> phases;
  std::vector<Index> active_constraints;
  // Wall time of each iteration, without the constraint-reduction part, which
  // is recorded separately in reduce_seconds.
  std::vector<double> iteration_seconds;
  std::vector<double> reduce_seconds;
  Index iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  bool breakdown = false;
  double initial_residual = 0.0;
  PhaseTimings timings;

  Index constrained_iterations() const {
    Index n = 0;
    for (auto p : phases) n += p != IterationPhase::Unconstrained;
    return n;
  }
  Index failed_constrained_iterations() const {
    Index n = 0;
    for (auto p : phases) n += p == IterationPhase::ConstrainedFailed;
    return n;
  }
};

// Growing Arnoldi workspace. Columns of Q and Z are stored as separate vectors.
struct KrylovState {
  std::vector<Vector> q;  // l+1 orthonormal vectors (l after a breakdown)
  std::vector<Vector> z;  // l preconditioned vectors
  DenseMatrix h;          // (l+1) x l upper Hessenberg
  double beta = 0.0;
  Index ell = 0;
  bool breakdown = false;

  static KrylovState start(const SparseMatrix& a, std::span<const double> b, std::span<const double> x0) {
    detail::require_dims(a.rows() == a.cols() && b.size() == a.rows() && x0.size() == a.cols(), "Krylov start");
    KrylovState s;
    Vector r = subtract(b, a.multiply(x0));
    s.beta = norm2(r);
    if (s.beta > 0.0) {
      scale(1.0 / s.beta, r);
      s.q.push_back(std::move(r));
    }
    return s;
  }

  Index size() const { return q.empty() ? 0 : q.front().size(); }

  static DenseMatrix as_matrix(const std::vector<Vector>& cols, Index n) {
    DenseMatrix m(n, cols.size());
    for (Index j = 0; j < cols.size(); ++j)
      for (Index i = 0; i < n; ++i) m(i, j) = cols[j][i];
    return m;
  }
  DenseMatrix q_matrix() const { return as_matrix(q, size()); }
  DenseMatrix z_matrix() const { return as_matrix(z, size()); }

  // beta * e_1 of length l+1
  Vector rhs() const {
    Vector e(ell + 1, 0.0);
    e[0] = beta;
    return e;
  }

  // x0 + Z y
  Vector assemble(std::span<const double> x0, std::span<const double> y) const {
    detail::require_dims(y.size() <= z.size(), "iterate assembly");
    Vector x(x0.begin(), x0.end());
    for (Index j = 0; j < y.size(); ++j) axpy(y[j], z[j], x);
    return x;
  }
};

// One flexible Arnoldi step: z_l = P q_l, w = A z_l, orthogonalised against
// q_1..q_l by modified Gram-Schmidt with reorthogonalisation.
template <PreconditionerLike P>
void arnoldi_step(KrylovState& s, const SparseMatrix& a, const P& precond, PhaseTimings* timings = nullptr) {
  if (s.breakdown || s.q.size() != s.ell + 1) throw Error("arnoldi_step: basis cannot be extended");
  PhaseTimings scratch;
  PhaseTimings& t = timings ? *timings : scratch;
  const Index l = s.ell;

  Vector zl;
  {
    ScopedTimer st(t.precondition);
    zl = precond.apply(s.q[l]);
  }
  if (zl.size() != s.size() || !all_finite(zl)) throw PreconditionerFailure("preconditioner produced non-finite output");

  Vector w;
  {
    ScopedTimer st(t.matvec);
    w = a.multiply(zl);
  }

  ScopedTimer st(t.orthogonalise);
  s.h.resize(l + 2, l + 1);
  const double before = norm2(w);
  // Two passes of modified Gram-Schmidt. A single pass loses orthogonality in
  // proportion to eps / (relative residual) once GMRES converges.
  double after = before;
  for (int pass = 0; pass < 2; ++pass) {
    for (Index i = 0; i <= l; ++i) {
      const double c = dot(s.q[i], w);
      s.h(i, l) += c;
      axpy(-c, s.q[i], w);
    }
    after = norm2(w);
  }

  s.z.push_back(std::move(zl));
  s.ell = l + 1;
  if (after <= 1e-14 * before) {
    s.h(l + 1, l) = 0.0;
    s.breakdown = true;
    return;
  }
  s.h(l + 1, l) = after;
  scale(1.0 / after, w);
  s.q.push_back(std::move(w));
}

namespace detail {

// Outcome of the (possibly constrained) small minimisation at one iteration.
struct HessenbergStep {
  Vector y;
  double residual = 0.0;
  IterationPhase phase = IterationPhase::Unconstrained;
  Index active = 0;
  bool may_stop = true;  // whether residual < tol may terminate the solve
  double reduce_seconds = 0.0;
};

inline LeastSquaresResult hessenberg_lstsq(const KrylovState& s) { return qr_lstsq(s.h, s.rhs()); }

// Shared flexible-GMRES loop. `solve(state, previous_residual, last, timings)`
// picks y at each iteration.
template <PreconditionerLike P, class Solve>
std::pair<Vector, SolveReport> run_flexible(const SparseMatrix& a, std::span<const double> b,
                                            std::span<const double> x0, const P& precond, double tol, Index ell_max,
                                            std::span<const QuadraticConstraint> monitor, Solve&& solve) {
  if (!(tol > 0.0)) throw Error("tolerance must be positive");
  SolveReport rep;
  KrylovState s = KrylovState::start(a, b, x0);
  rep.initial_residual = s.beta;
  if (s.beta == 0.0) {
    rep.status = SolveStatus::Converged;
    return {Vector(x0.begin(), x0.end()), rep};
  }

  Vector y;
  double previous = s.beta;
  for (Index l = 1; l <= ell_max; ++l) {
    Stopwatch watch;
    arnoldi_step(s, a, precond, &rep.timings);
    HessenbergStep step = solve(s, previous, l == ell_max, rep.timings);
    const double elapsed = watch.seconds();

    y = std::move(step.y);
    rep.iterations = l;
    rep.residual_history.push_back(step.residual);
    rep.phases.push_back(step.phase);
    rep.active_constraints.push_back(step.active);
    rep.reduce_seconds.push_back(step.reduce_seconds);
    rep.iteration_seconds.push_back(elapsed - step.reduce_seconds);
    if (!monitor.empty()) {
      const Vector x = s.assemble(x0, y);
      Vector mis;
      for (const auto& c : monitor) mis.push_back(evaluate(c, x));
      rep.constraint_misfit_history.push_back(std::move(mis));
    }

    if (step.residual < tol && step.may_stop) {
      rep.status = SolveStatus::Converged;
      break;
    }
    if (s.breakdown) {
      rep.status = SolveStatus::Breakdown;
      break;
    }
    previous = step.residual;
  }
  rep.breakdown = s.breakdown;
  return {s.assemble(x0, y), rep};
}

}  // namespace detail

// Solves A x = b to absolute residual `tol` (estimated by the Hessenberg
// least-squares residual) within ell_max iterations. Constraints in `monitor`
// are only evaluated for the report.
template <PreconditionerLike P>
std::pair<Vector, SolveReport> fgmres(const SparseMatrix& a, std::span<const double> b, std::span<const double> x0,
                                      const P& precond, double tol, Index ell_max,
                                      std::span<const QuadraticConstraint> monitor = {}) {
  return detail::run_flexible(a, b, x0, precond, tol, ell_max, monitor,
                              [](const KrylovState& s, double, bool, PhaseTimings& t) {
                                ScopedTimer st(t.hessenberg_solve);
                                auto ls = detail::hessenberg_lstsq(s);
                                detail::HessenbergStep step;
                                step.y = std::move(ls.y);
                                step.residual = ls.residual_norm;
                                return step;
                              });
}

}  // namespace spk
