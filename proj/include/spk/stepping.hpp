#pragma once

// Time stepping of a linear scheme A x = f(z_n) with a choice of linear
// solver, and bookkeeping of the conservation/dissipation laws along the way.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "spk/cgmres.hpp"
#include "spk/glrk.hpp"
#include "spk/krylov.hpp"
#include "spk/preconditioners.hpp"

namespace spk {

enum class SolverKind { Direct, Fgmres, Cgmres, CgmresPrototype };
enum class InitialGuess { Zero, Previous };

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Direct: return "direct";
    case SolverKind::Fgmres: return "fgmres";
    case SolverKind::Cgmres: return "cgmres";
    case SolverKind::CgmresPrototype: return "cgmres-proto";
  }
  return "?";
}

// One time step in matrix form. For a Runge-Kutta stage system x holds the
// stacked stage values and z_{n+1} = reconstruct(z_n, dt, tableau, x);
// otherwise x is z_{n+1} itself.
struct LinearScheme {
  SparseMatrix matrix;
  std::function<Vector(std::span<const double> z_n)> rhs;
  // Laws g(z_{n+1}) = 0 for the step out of z_n, as constraints on z_{n+1}.
  std::function<std::vector<QuadraticConstraint>(std::span<const double> z_n)> laws;
  std::optional<ButcherTableau> tableau;
  double dt = 0.0;

  Index state_size() const { return tableau ? matrix.rows() / tableau->s : matrix.rows(); }

  Vector next_state(std::span<const double> z_n, std::span<const double> x) const {
    if (tableau) return reconstruct(z_n, dt, *tableau, x);
    return Vector(x.begin(), x.end());
  }

  // The laws expressed on the unknown x of the linear system.
  std::vector<QuadraticConstraint> constraints(std::span<const double> z_n) const {
    auto laws_n = laws(z_n);
    if (!tableau) return laws_n;
    std::vector<QuadraticConstraint> lifted;
    for (const auto& c : laws_n) lifted.push_back(lift_through_affine(c, z_n, dt, tableau->b, tableau->s));
    return lifted;
  }
};

struct SolverConfig {
  SolverKind kind = SolverKind::Cgmres;
  double tol = 1e-6;
  // Gate of the optimised driver; NaN selects 10 * tol.
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  Index max_iter = 200;
  InitialGuess guess = InitialGuess::Zero;
  Preconditioner precond;
  // Labels of the laws to enforce, in order; unset enforces all of them.
  std::optional<std::vector<std::string>> enforce;
  CgmresOptions cgmres;
};

// Picks and orders constraints by label.
inline std::vector<QuadraticConstraint> select_constraints(const std::vector<QuadraticConstraint>& all,
                                                           const std::optional<std::vector<std::string>>& labels) {
  if (!labels) return all;
  std::vector<QuadraticConstraint> out;
  for (const auto& l : *labels) {
    auto it = std::find_if(all.begin(), all.end(), [&](const QuadraticConstraint& c) { return c.label() == l; });
    if (it == all.end()) throw Error("unknown constraint '" + l + "'");
    out.push_back(*it);
  }
  return out;
}

struct StepOutcome {
  Vector x;  // solution of the linear system
  Vector z;  // state after the step
  SolveReport report;
  std::vector<QuadraticConstraint> enforced;  // constraints on x actually passed to the solver
};

class Stepper {
 public:
  Stepper(LinearScheme scheme, SolverConfig config) : scheme_(std::move(scheme)), config_(std::move(config)) {}

  const LinearScheme& scheme() const { return scheme_; }
  const SolverConfig& config() const { return config_; }

  Vector initial_guess(std::span<const double> z_n) const {
    const Index n = scheme_.matrix.rows();
    if (config_.guess == InitialGuess::Zero) return Vector(n, 0.0);
    if (!scheme_.tableau) return Vector(z_n.begin(), z_n.end());
    if (!previous_x_.empty()) return previous_x_;
    // First stage-form step: tile the state across the stages.
    Vector x;
    for (Index i = 0; i < scheme_.tableau->s; ++i) x.insert(x.end(), z_n.begin(), z_n.end());
    return x;
  }

  StepOutcome step(std::span<const double> z_n) {
    StepOutcome out;
    const Vector f = scheme_.rhs(z_n);
    const Vector x0 = initial_guess(z_n);
    out.enforced = select_constraints(scheme_.constraints(z_n), config_.enforce);
    const SparseMatrix& a = scheme_.matrix;
    switch (config_.kind) {
      case SolverKind::Direct: {
        if (!lu_) lu_ = std::make_shared<DenseLu>(a);
        out.x = lu_->solve(f);
        out.report.status = SolveStatus::Converged;
        out.report.initial_residual = norm2(subtract(f, a.multiply(x0)));
        break;
      }
      case SolverKind::Fgmres: {
        std::tie(out.x, out.report) = fgmres(a, f, x0, config_.precond, config_.tol, config_.max_iter, out.enforced);
        break;
      }
      case SolverKind::Cgmres: {
        const double eps = std::isnan(config_.epsilon) ? 10.0 * config_.tol : config_.epsilon;
        std::tie(out.x, out.report) = cgmres_optimised(a, f, x0, config_.precond, config_.tol, eps, config_.max_iter,
                                                       out.enforced, config_.cgmres);
        break;
      }
      case SolverKind::CgmresPrototype: {
        std::tie(out.x, out.report) = cgmres_prototype(a, f, x0, config_.precond, config_.tol, config_.max_iter,
                                                       out.enforced, config_.cgmres);
        break;
      }
    }
    out.z = scheme_.next_state(z_n, out.x);
    previous_x_ = out.x;
    return out;
  }

 private:
  LinearScheme scheme_;
  SolverConfig config_;
  std::shared_ptr<DenseLu> lu_;
  Vector previous_x_;
};

}  // namespace spk
