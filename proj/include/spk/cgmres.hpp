#pragma once

// Constrained flexible GMRES. The Hessenberg least-squares solve is replaced
// by an equality-constrained minimisation over the same Krylov space so that
// the returned iterate satisfies the given quadratic constraints.
//
// cgmres_prototype imposes the first min(l-1, c) constraints at iteration l.
// cgmres_optimised runs plain FGMRES iterations until the previous residual
// estimate drops to epsilon (or l reaches ell_max), then imposes all
// constraints; a failed constrained solve falls back to the unconstrained one.

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include "spk/constraints.hpp"
#include "spk/ec_sqp.hpp"
#include "spk/krylov.hpp"

namespace spk {

struct CgmresOptions {
  EcOptions sqp;
  // Evaluate every constraint at every iterate for the report (not timed).
  bool track_misfits = true;
};

namespace detail {

class ConstrainedHessenbergSolver {
 public:
  ConstrainedHessenbergSolver(std::span<const QuadraticConstraint> cons, std::span<const double> x0,
                              const EcOptions& opts)
      : cons_(cons), x0_(x0), opts_(opts) {}

  HessenbergStep unconstrained(const KrylovState& s, PhaseTimings& t) const {
    ScopedTimer st(t.hessenberg_solve);
    auto ls = hessenberg_lstsq(s);
    HessenbergStep step;
    step.y = std::move(ls.y);
    step.residual = ls.residual_norm;
    return step;
  }

  // Constrained solve with the first `active` constraints; falls back to the
  // unconstrained minimiser if the SQP does not reach an optimal point.
  HessenbergStep constrained(const KrylovState& s, Index active, PhaseTimings& t) {
    double reduce_time = 0.0;
    {
      ScopedTimer st(reduce_time);
      if (reductions_.empty())
        for (const auto& c : cons_) reductions_.emplace_back(c, x0_);
      for (Index i = 0; i < active; ++i) reductions_[i].update(s.z);
    }
    t.constraint_reduce += reduce_time;

    EcSolution sol;
    {
      ScopedTimer st(t.constrained_solve);
      EcProblem p;
      p.H = s.h;
      p.beta = s.beta;
      for (Index i = 0; i < active; ++i) p.constraints.push_back(reductions_[i].reduced());
      sol = solve_constrained(p, opts_);
    }

    HessenbergStep step;
    if (sol.status == EcStatus::Optimal) {
      step.y = std::move(sol.y);
      step.residual = sol.residual_norm;
      step.phase = IterationPhase::ConstrainedOk;
      step.may_stop = active == cons_.size();
    } else {
      step = unconstrained(s, t);
      step.phase = IterationPhase::ConstrainedFailed;
      step.may_stop = false;
    }
    step.active = active;
    step.reduce_seconds = reduce_time;
    return step;
  }

 private:
  std::span<const QuadraticConstraint> cons_;
  std::span<const double> x0_;
  const EcOptions& opts_;
  std::vector<ConstraintReduction> reductions_;
};

}  // namespace detail

template <PreconditionerLike P>
std::pair<Vector, SolveReport> cgmres_prototype(const SparseMatrix& a, std::span<const double> b,
                                                std::span<const double> x0, const P& precond, double tol,
                                                Index ell_max, std::span<const QuadraticConstraint> constraints,
                                                const CgmresOptions& options = {}) {
  for (const auto& c : constraints) detail::require_dims(c.size() == a.rows(), "constraint size");
  detail::ConstrainedHessenbergSolver solver(constraints, x0, options.sqp);
  const auto monitor = options.track_misfits ? constraints : std::span<const QuadraticConstraint>{};
  return detail::run_flexible(a, b, x0, precond, tol, ell_max, monitor,
                              [&](const KrylovState& s, double, bool, PhaseTimings& t) {
                                const Index active = std::min(s.ell - 1, constraints.size());
                                if (active == 0) {
                                  auto step = solver.unconstrained(s, t);
                                  step.may_stop = constraints.empty();
                                  return step;
                                }
                                return solver.constrained(s, active, t);
                              });
}

template <PreconditionerLike P>
std::pair<Vector, SolveReport> cgmres_optimised(const SparseMatrix& a, std::span<const double> b,
                                                std::span<const double> x0, const P& precond, double tol,
                                                double epsilon, Index ell_max,
                                                std::span<const QuadraticConstraint> constraints,
                                                const CgmresOptions& options = {}) {
  if (!(epsilon >= tol)) throw Error("cgmres_optimised: epsilon must be >= tol");
  for (const auto& c : constraints) detail::require_dims(c.size() == a.rows(), "constraint size");
  detail::ConstrainedHessenbergSolver solver(constraints, x0, options.sqp);
  const auto monitor = options.track_misfits ? constraints : std::span<const QuadraticConstraint>{};
  return detail::run_flexible(a, b, x0, precond, tol, ell_max, monitor,
                              [&](const KrylovState& s, double previous, bool last, PhaseTimings& t) {
                                if (constraints.empty()) return solver.unconstrained(s, t);
                                if (previous > epsilon && !last) {
                                  auto step = solver.unconstrained(s, t);
                                  step.may_stop = false;
                                  return step;
                                }
                                return solver.constrained(s, std::min(s.ell, constraints.size()), t);
                              });
}

// Default gate: epsilon = 10 tol.
template <PreconditionerLike P>
std::pair<Vector, SolveReport> cgmres_optimised(const SparseMatrix& a, std::span<const double> b,
                                                std::span<const double> x0, const P& precond, double tol,
                                                Index ell_max, std::span<const QuadraticConstraint> constraints,
                                                const CgmresOptions& options = {}) {
  return cgmres_optimised(a, b, x0, precond, tol, 10.0 * tol, ell_max, constraints, options);
}

}  // namespace spk
