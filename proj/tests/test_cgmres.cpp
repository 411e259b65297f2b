#include <gtest/gtest.h>

#include <limits>

#include "spk/cgmres.hpp"
#include "test_util.hpp"

using namespace spk;
using spk::testing::max_abs_diff;
using spk::testing::Rng;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Random nonsymmetric system with a linear and a quadratic functional whose
// values at the exact solution are used as targets.
struct PlantedSystem {
  SparseMatrix a;
  Vector b, exact;
  std::vector<QuadraticConstraint> constraints;
};

PlantedSystem planted(Rng& rng, Index n) {
  PlantedSystem s;
  s.a = rng.sparse(n, 4, 3.0);
  s.b = rng.vector(n);
  s.exact = dense_lu_solve(s.a.to_dense(), s.b);
  const Vector w = rng.vector(n, 0.0, 1.0);
  s.constraints.push_back(QuadraticConstraint::linear(w, -dot(w, s.exact), "linear"));
  const Vector d = rng.vector(n, 0.5, 1.5);
  const SparseMatrix m = SparseMatrix::diagonal_matrix(d);
  double q = 0.0;
  for (Index i = 0; i < n; ++i) q += d[i] * s.exact[i] * s.exact[i];
  s.constraints.push_back(QuadraticConstraint(m, Vector(n, 0.0), -q, "quadratic"));
  return s;
}

}  // namespace

TEST(Cgmres, EmptyConstraintsReproduceFgmresBitwise) {
  Rng rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 20 + rng.index(80);
    const SparseMatrix a = rng.sparse(n, 4, 2.0);
    const Vector b = rng.vector(n), x0 = rng.vector(n);
    const auto p = jacobi(a);
    const auto ref = fgmres(a, b, x0, p, 1e-9, 80);
    const auto proto = cgmres_prototype(a, b, x0, p, 1e-9, 80, {});
    const auto opt = cgmres_optimised(a, b, x0, p, 1e-9, 1e-8, 80, {});
    EXPECT_EQ(proto.first, ref.first);
    EXPECT_EQ(opt.first, ref.first);
    EXPECT_EQ(proto.second.residual_history, ref.second.residual_history);
    EXPECT_EQ(opt.second.residual_history, ref.second.residual_history);
    EXPECT_EQ(opt.second.iterations, ref.second.iterations);
    EXPECT_EQ(opt.second.status, ref.second.status);
  }
}

TEST(Cgmres, PlantedLinearInvariantHeldFromSecondIteration) {
  const SparseMatrix a(2, 2, {{0, 0, 4.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 3.0}});
  const Vector b{1.0, 2.0}, x0{0.0, 0.0};
  const Vector exact = dense_lu_solve(a.to_dense(), b);
  const Vector w{1.0, -0.5};
  const std::vector<QuadraticConstraint> cons{QuadraticConstraint::linear(w, -dot(w, exact))};
  const auto [x, rep] = cgmres_prototype(a, b, x0, IdentityPreconditioner{}, 1e-300, 2, cons);
  ASSERT_EQ(rep.iterations, 2u);
  EXPECT_EQ(rep.phases[0], IterationPhase::Unconstrained);
  EXPECT_EQ(rep.phases[1], IterationPhase::ConstrainedOk);
  EXPECT_LE(std::abs(rep.constraint_misfit_history[1][0]), 1e-12);
  EXPECT_LE(std::abs(evaluate(cons[0], x)), 1e-12);
}

TEST(Cgmres, PrototypeStagesConstraints) {
  Rng rng(72);
  const auto s = planted(rng, 40);
  const auto [x, rep] = cgmres_prototype(s.a, s.b, Vector(40, 0.0), IdentityPreconditioner{}, 1e-300, 6, s.constraints);
  ASSERT_EQ(rep.iterations, 6u);
  for (Index l = 1; l <= 6; ++l) EXPECT_EQ(rep.active_constraints[l - 1], std::min<Index>(l - 1, 2));
  for (Index l = 2; l <= 6; ++l) {
    if (rep.phases[l - 1] != IterationPhase::ConstrainedOk) continue;
    EXPECT_LE(std::abs(rep.constraint_misfit_history[l - 1][0]), 1e-12);
    if (l >= 3) {
      EXPECT_LE(std::abs(rep.constraint_misfit_history[l - 1][1]), 1e-12 * 50);
    }
  }
}

TEST(Cgmres, InfiniteEpsilonConstrainsEveryIteration) {
  Rng rng(73);
  const auto s = planted(rng, 30);
  const auto [x, rep] = cgmres_optimised(s.a, s.b, Vector(30, 0.0), jacobi(s.a), 1e-10, kInf, 60, s.constraints);
  ASSERT_GE(rep.iterations, 1u);
  for (Index l = 1; l <= rep.iterations; ++l) {
    EXPECT_NE(rep.phases[l - 1], IterationPhase::Unconstrained);
    EXPECT_EQ(rep.active_constraints[l - 1], std::min<Index>(l, 2));
  }
}

TEST(Cgmres, GateReadsPreviousResidual) {
  Rng rng(74);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = planted(rng, 60);
    const double tol = 1e-8, eps = 1e-7;
    const auto [x, rep] = cgmres_optimised(s.a, s.b, Vector(60, 0.0), jacobi(s.a), tol, eps, 100, s.constraints);
    for (Index l = 1; l <= rep.iterations; ++l) {
      const double prev = l == 1 ? rep.initial_residual : rep.residual_history[l - 2];
      const bool open = prev <= eps || l == 100;
      EXPECT_EQ(rep.phases[l - 1] != IterationPhase::Unconstrained, open) << "iteration " << l;
    }
  }
}

TEST(Cgmres, TerminationSatisfiesConstraintsAndTolerance) {
  Rng rng(75);
  int converged = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 30 + rng.index(70);
    const auto s = planted(rng, n);
    const double tol = 1e-8;
    const auto [x, rep] = cgmres_optimised(s.a, s.b, Vector(n, 0.0), jacobi(s.a), tol, 10 * tol, 150, s.constraints);
    if (rep.status != SolveStatus::Converged) continue;
    ++converged;
    EXPECT_EQ(rep.phases.back(), IterationPhase::ConstrainedOk);
    for (const auto& c : s.constraints) EXPECT_LE(std::abs(evaluate(c, x)), 1e-12 * std::max(1.0, norm2(s.exact)));
    EXPECT_LE(norm2(subtract(s.b, s.a.multiply(x))), 1.1 * tol);
  }
  EXPECT_GE(converged, 9);
}

TEST(Cgmres, ConstrainedResidualNotBelowUnconstrained) {
  Rng rng(76);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = planted(rng, 50);
    const auto [x, rep] = cgmres_optimised(s.a, s.b, Vector(50, 0.0), jacobi(s.a), 1e-8, 1e-7, 100, s.constraints);
    ASSERT_EQ(rep.status, SolveStatus::Converged);
    const auto [xf, repf] = fgmres(s.a, s.b, Vector(50, 0.0), jacobi(s.a), 1e-300, rep.iterations);
    EXPECT_GE(rep.residual_history.back(), repf.residual_history.back());
  }
}

TEST(Cgmres, EpsilonBelowToleranceRejected) {
  const SparseMatrix a = SparseMatrix::identity(2);
  EXPECT_THROW(cgmres_optimised(a, Vector{1, 1}, Vector{0, 0}, IdentityPreconditioner{}, 1e-6, 1e-7, 5, {}), Error);
}

TEST(Cgmres, DefaultEpsilonIsTenTimesTol) {
  Rng rng(77);
  const auto s = planted(rng, 40);
  const auto a = cgmres_optimised(s.a, s.b, Vector(40, 0.0), jacobi(s.a), 1e-8, 80, s.constraints);
  const auto b = cgmres_optimised(s.a, s.b, Vector(40, 0.0), jacobi(s.a), 1e-8, 1e-7, 80, s.constraints);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second.phases, b.second.phases);
}

TEST(Cgmres, FailedConstrainedSolveFallsBack) {
  // ||x||^2 = 1 and ||x||^2 = 4 together cannot be satisfied.
  const Index n = 10;
  const SparseMatrix a = spk::testing::laplacian_1d(n);
  const Vector b(n, 1.0), x0(n, 0.0);
  const std::vector<QuadraticConstraint> cons{
      QuadraticConstraint(SparseMatrix::identity(n), Vector(n, 0.0), -1.0),
      QuadraticConstraint(SparseMatrix::identity(n), Vector(n, 0.0), -4.0)};
  const auto [x, rep] = cgmres_optimised(a, b, x0, IdentityPreconditioner{}, 1e-10, kInf, n, cons);
  const auto [xf, repf] = fgmres(a, b, x0, IdentityPreconditioner{}, 1e-300, rep.iterations);
  EXPECT_NE(rep.status, SolveStatus::Converged);
  EXPECT_GE(rep.failed_constrained_iterations(), 1u);
  for (Index l = 1; l <= rep.iterations; ++l)
    if (rep.phases[l - 1] == IterationPhase::ConstrainedFailed) {
      EXPECT_EQ(rep.residual_history[l - 1], repf.residual_history[l - 1]);
    }
}
