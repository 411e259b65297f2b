#pragma once

// Equality-constrained least squares on the Krylov space:
//
//   min_y  1/2 || beta e_1 - H y ||^2   subject to  h_i(y) = 0,
//
// where each h_i is a reduced quadratic constraint. Solved by Newton iteration
// on the KKT conditions (an SQP method with exact Hessian of the Lagrangian).

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "spk/constraints.hpp"
#include "spk/linalg.hpp"

namespace spk {

enum class EcStatus { Optimal, Infeasible, MaxIter, NumericalFailure };

inline const char* to_string(EcStatus s) {
  switch (s) {
    case EcStatus::Optimal: return "optimal";
    case EcStatus::Infeasible: return "infeasible";
    case EcStatus::MaxIter: return "max_iter";
    case EcStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct EcProblem {
  DenseMatrix H;  // (l+1) x l
  double beta = 0.0;
  std::vector<ReducedConstraint> constraints;
  Vector y_init;  // empty: start from the unconstrained minimiser
};

struct EcOptions {
  double feas_tol = 1e-12;  // |h_i| <= feas_tol * scale_i
  double opt_tol = 1e-10;   // ||grad L|| <= opt_tol * max(1, ||H^T beta e_1||)
  Index max_iter = 50;
  double rho = 10.0;  // merit penalty
};

struct EcSolution {
  Vector y;
  Vector lambda;
  double residual_norm = 0.0;
  Vector constraint_misfit;
  double kkt_norm = 0.0;
  EcStatus status = EcStatus::NumericalFailure;
  Index iterations = 0;
};

namespace detail {

class EcSqp {
 public:
  EcSqp(const EcProblem& p, const EcOptions& o) : p_(p), o_(o), n_(p.H.cols()), k_(p.constraints.size()) {
    detail::require_dims(p.H.rows() == n_ + 1, "constrained solve needs an (l+1) x l matrix");
    for (const auto& c : p.constraints) detail::require_dims(c.size() == n_, "reduced constraint size");
    rhs_.assign(n_ + 1, 0.0);
    rhs_[0] = p.beta;
    hth_ = p.H.transpose().multiply(p.H);
    gscale_ = std::max(1.0, norm2(p.H.multiply_transpose(rhs_)));
  }

  EcSolution run() {
    EcSolution sol;
    std::optional<HouseholderQr> qr;
    try {
      qr.emplace(p_.H);
    } catch (const RankDeficient&) {
      sol.status = EcStatus::NumericalFailure;
      return sol;
    }
    const auto finish = [&](EcSolution& s) -> EcSolution& {
      s.residual_norm = qr->residual_norm(rhs_, s.y);
      s.constraint_misfit = constraint_values(s.y);
      return s;
    };

    if (k_ == 0) {
      auto ls = qr->solve(rhs_);
      sol.y = std::move(ls.y);
      sol.residual_norm = ls.residual_norm;
      sol.status = EcStatus::Optimal;
      return sol;
    }

    Vector y = p_.y_init.empty() ? qr->solve(rhs_).y : p_.y_init;
    detail::require_dims(y.size() == n_, "constrained solve initial guess");
    Vector lambda(k_, 0.0);

    double best_infeas = std::numeric_limits<double>::infinity();
    Index stagnant = 0;
    for (Index it = 0; it < o_.max_iter; ++it) {
      sol.iterations = it;
      const Eval e = evaluate_at(y, lambda);
      if (!e.finite) return failure(sol, y, lambda);
      if (e.feasible && e.kkt <= o_.opt_tol * gscale_) {
        polish(y, lambda, e);
        sol.y = y;
        sol.lambda = lambda;
        sol.kkt_norm = evaluate_at(y, lambda).kkt;
        sol.status = EcStatus::Optimal;
        return finish(sol);
      }

      if (e.infeas < best_infeas * (1.0 - 1e-3)) {
        best_infeas = e.infeas;
        stagnant = 0;
      } else if (!e.feasible && ++stagnant >= 10) {
        return stop(sol, y, lambda, EcStatus::Infeasible, finish);
      }

      Vector dy, lam_new;
      if (!newton_direction(lambda, e, dy, lam_new)) return failure(sol, y, lambda);

      // Backtracking on the merit; the exact Newton direction has directional
      // derivative -2 * merit.
      const double phi0 = e.merit;
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        Vector yt = y, lt = lambda;
        axpy(alpha, dy, yt);
        for (Index i = 0; i < k_; ++i) lt[i] += alpha * (lam_new[i] - lambda[i]);
        const Eval et = evaluate_at(yt, lt);
        if (et.finite && et.merit <= phi0 * (1.0 - 2e-4 * alpha)) {
          y = std::move(yt);
          lambda = std::move(lt);
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) return stop(sol, y, lambda, e.feasible ? EcStatus::MaxIter : EcStatus::Infeasible, finish);
    }
    sol.iterations = o_.max_iter;
    const Eval e = evaluate_at(y, lambda);
    return stop(sol, y, lambda, e.feasible ? EcStatus::MaxIter : EcStatus::Infeasible, finish);
  }

 private:
  struct Eval {
    Vector h;
    Vector grad_l;
    DenseMatrix jac;  // k x n
    double kkt = 0.0;
    double infeas = 0.0;  // max_i |h_i| / scale_i
    double merit = 0.0;
    bool feasible = false;
    bool finite = true;
  };

  Vector constraint_values(std::span<const double> y) const {
    Vector h(k_);
    for (Index i = 0; i < k_; ++i) h[i] = p_.constraints[i].evaluate(y);
    return h;
  }

  Eval evaluate_at(std::span<const double> y, std::span<const double> lambda) const {
    Eval e;
    Vector r = p_.H.multiply(y);
    axpy(-1.0, rhs_, r);
    e.grad_l = p_.H.multiply_transpose(r);
    e.h = constraint_values(y);
    e.jac = DenseMatrix(k_, n_);
    e.feasible = true;
    double pen = 0.0;
    for (Index i = 0; i < k_; ++i) {
      const auto& c = p_.constraints[i];
      const Vector ji = c.jacobian(y);
      std::copy(ji.begin(), ji.end(), e.jac.row(i).begin());
      axpy(lambda[i], ji, e.grad_l);
      const double scaled = e.h[i] / c.scale;
      e.infeas = std::max(e.infeas, std::abs(scaled));
      pen += scaled * scaled;
      if (!(std::abs(e.h[i]) <= o_.feas_tol * c.scale)) e.feasible = false;
    }
    e.kkt = norm2(e.grad_l);
    e.merit = (e.kkt / gscale_) * (e.kkt / gscale_) + o_.rho * pen;
    e.finite = std::isfinite(e.merit) && all_finite(e.grad_l);
    return e;
  }

  // Solves [W + mu I, J^T; J, -mu I] [dy; lambda_new] = [-grad f; -h], with mu
  // raised from zero only when the factorisation fails.
  bool newton_direction(std::span<const double> lambda, const Eval& e, Vector& dy, Vector& lam_new) const {
    DenseMatrix w = hth_;
    for (Index i = 0; i < k_; ++i) {
      const auto& g = p_.constraints[i].G;
      if (g.empty()) continue;
      for (Index r = 0; r < n_; ++r)
        for (Index c = 0; c < n_; ++c) w(r, c) += 2.0 * lambda[i] * g(r, c);
    }
    // grad f = grad L - J^T lambda
    Vector gradf = e.grad_l;
    for (Index i = 0; i < k_; ++i) axpy(-lambda[i], e.jac.row(i), gradf);

    const Index m = n_ + k_;
    Vector rhs(m);
    for (Index r = 0; r < n_; ++r) rhs[r] = -gradf[r];
    for (Index i = 0; i < k_; ++i) rhs[n_ + i] = -e.h[i];

    double mu = 0.0;
    for (int attempt = 0; attempt < 25; ++attempt) {
      DenseMatrix kkt(m, m);
      for (Index r = 0; r < n_; ++r) {
        for (Index c = 0; c < n_; ++c) kkt(r, c) = w(r, c);
        kkt(r, r) += mu;
      }
      for (Index i = 0; i < k_; ++i) {
        for (Index c = 0; c < n_; ++c) {
          kkt(n_ + i, c) = e.jac(i, c);
          kkt(c, n_ + i) = e.jac(i, c);
        }
        kkt(n_ + i, n_ + i) = -mu;
      }
      try {
        const Vector sol = DenseLu(std::move(kkt)).solve(rhs);
        if (!all_finite(sol)) return false;
        dy.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n_));
        lam_new.assign(sol.begin() + static_cast<std::ptrdiff_t>(n_), sol.end());
        return true;
      } catch (const SingularMatrix&) {
        mu = mu == 0.0 ? 1e-12 * (1.0 + w.norm_inf()) : 10.0 * mu;
      }
    }
    return false;
  }

  // A couple of extra full Newton steps, kept only while they reduce the
  // constraint violation without losing stationarity.
  void polish(Vector& y, Vector& lambda, Eval e) const {
    for (int step = 0; step < 2 && e.infeas > 0.0; ++step) {
      Vector dy, lam_new;
      if (!newton_direction(lambda, e, dy, lam_new)) return;
      Vector yt = y;
      axpy(1.0, dy, yt);
      const Eval et = evaluate_at(yt, lam_new);
      if (!et.finite || !et.feasible || et.infeas >= e.infeas || et.kkt > o_.opt_tol * gscale_) return;
      y = std::move(yt);
      lambda = std::move(lam_new);
      e = et;
    }
  }

  EcSolution& failure(EcSolution& sol, const Vector& y, const Vector& lambda) const {
    sol.y = y;
    sol.lambda = lambda;
    sol.status = EcStatus::NumericalFailure;
    sol.residual_norm = std::numeric_limits<double>::quiet_NaN();
    sol.constraint_misfit = constraint_values(y);
    return sol;
  }

  template <class Finish>
  EcSolution& stop(EcSolution& sol, const Vector& y, const Vector& lambda, EcStatus status, Finish& finish) const {
    sol.y = y;
    sol.lambda = lambda;
    sol.status = status;
    sol.kkt_norm = evaluate_at(y, lambda).kkt;
    return finish(sol);
  }

  const EcProblem& p_;
  const EcOptions& o_;
  Index n_, k_;
  Vector rhs_;
  DenseMatrix hth_;
  double gscale_ = 1.0;
};

}  // namespace detail

inline EcSolution solve_constrained(const EcProblem& problem, const EcOptions& options = {}) {
  if (problem.H.cols() == 0) throw DimensionMismatch("constrained solve needs at least one Krylov vector");
  return detail::EcSqp(problem, options).run();
}

inline EcSolution solve_constrained(const EcProblem& problem, double feas_tol, double opt_tol, Index max_iter) {
  EcOptions o;
  o.feas_tol = feas_tol;
  o.opt_tol = opt_tol;
  o.max_iter = max_iter;
  return solve_constrained(problem, o);
}

}  // namespace spk
