#pragma once

// Small equality-constrained least-squares problems with independently
// computed reference minimisers: a dense KKT solve for linear constraints and
// enumeration of the feasible set for quadratic constraints in 1-2 variables.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "spk/ec_sqp.hpp"

namespace spk::testing {

struct EcCase {
  std::string name;
  EcProblem problem;
  Vector expected;
};

inline ReducedConstraint linear_constraint(Vector a, double rhs) {
  ReducedConstraint r;
  r.g = std::move(a);
  r.g0 = -rhs;
  return r;
}

inline ReducedConstraint quadratic_constraint(DenseMatrix g, Vector lin, double g0) {
  ReducedConstraint r;
  r.G = std::move(g);
  r.g = std::move(lin);
  r.g0 = g0;
  return r;
}

inline double objective(const EcProblem& p, std::span<const double> y) {
  Vector r = p.H.multiply(y);
  r[0] -= p.beta;
  return 0.5 * dot(r, r);
}

// min 1/2||beta e1 - H y||^2 s.t. C y = d via the full KKT matrix.
inline Vector kkt_oracle(const EcProblem& p) {
  const Index n = p.H.cols(), k = p.constraints.size();
  DenseMatrix kkt(n + k, n + k);
  const DenseMatrix hth = p.H.transpose().multiply(p.H);
  Vector rhs(n + k, 0.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) kkt(i, j) = hth(i, j);
    rhs[i] = p.beta * p.H(0, i);
  }
  for (Index c = 0; c < k; ++c) {
    for (Index j = 0; j < n; ++j) {
      kkt(n + c, j) = p.constraints[c].g[j];
      kkt(j, n + c) = p.constraints[c].g[j];
    }
    rhs[n + c] = -p.constraints[c].g0;
  }
  Vector sol = dense_lu_solve(kkt, rhs);
  sol.resize(n);
  return sol;
}

// Global minimiser over a closed curve y(theta), theta in [0, 2 pi): coarse
// enumeration followed by bisection on the analytic derivative of f(y(theta)).
inline Vector curve_oracle(const EcProblem& p, const std::function<Vector(double)>& y,
                           const std::function<Vector(double)>& dy) {
  const auto f = [&](double t) { return objective(p, y(t)); };
  const auto df = [&](double t) {
    Vector r = p.H.multiply(y(t));
    r[0] -= p.beta;
    return dot(r, p.H.multiply(dy(t)));
  };
  const int samples = 20000;
  const double h = 2.0 * std::numbers::pi / samples;
  int best = 0;
  for (int i = 1; i < samples; ++i)
    if (f(i * h) < f(best * h)) best = i;
  double lo = (best - 1) * h, hi = (best + 1) * h;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (df(mid) > 0.0 ? hi : lo) = mid;
  }
  return y(0.5 * (lo + hi));
}

inline std::vector<EcCase> ec_reference_cases() {
  std::vector<EcCase> cases;
  const auto add_linear = [&](std::string name, DenseMatrix h, double beta, std::vector<ReducedConstraint> cons) {
    EcCase c{std::move(name), {std::move(h), beta, std::move(cons), {}}, {}};
    c.expected = kkt_oracle(c.problem);
    cases.push_back(std::move(c));
  };

  add_linear("linear-1var", DenseMatrix::from_rows({{2}, {1}}), 1.0, {linear_constraint({1}, 0.3)});
  add_linear("linear-2var", DenseMatrix::from_rows({{1.0, 0.4}, {0.7, -1.2}, {0.0, 0.9}}), 1.5,
             {linear_constraint({1, 1}, 0.25)});
  add_linear("linear-3var-2cons", DenseMatrix::from_rows({{2.0, -0.3, 0.1}, {0.5, 1.1, 0.4}, {0.0, 0.8, -0.6}, {0.0, 0.0, 0.7}}),
             3.0, {linear_constraint({1, -1, 0.5}, 0.2), linear_constraint({0.3, 0.2, 1.0}, -0.4)});
  add_linear("linear-4var-2cons",
             DenseMatrix::from_rows({{1.0, 0.2, -0.4, 0.3},
                                     {0.9, 1.5, 0.1, -0.2},
                                     {0.0, 0.6, 1.3, 0.5},
                                     {0.0, 0.0, 0.4, 0.8},
                                     {0.0, 0.0, 0.0, 0.35}}),
             2.0, {linear_constraint({1, 1, 1, 1}, 1.0), linear_constraint({0, 1, 0, -1}, 0.1)});

  // One variable: the feasible set is the (at most two) roots of the quadratic.
  const auto add_scalar = [&](std::string name, DenseMatrix h, double beta, double a, double b, double c) {
    EcCase cs{std::move(name), {std::move(h), beta, {quadratic_constraint(DenseMatrix::from_rows({{a}}), {b}, c)}, {}}, {}};
    const double disc = std::sqrt(b * b - 4 * a * c);
    const Vector r1{(-b + disc) / (2 * a)}, r2{(-b - disc) / (2 * a)};
    cs.expected = objective(cs.problem, r1) <= objective(cs.problem, r2) ? r1 : r2;
    cases.push_back(std::move(cs));
  };
  add_scalar("quad-1var-positive-root", DenseMatrix::from_rows({{1}, {0}}), 1.0, 1.0, 0.0, -4.0);
  add_scalar("quad-1var-negative-root", DenseMatrix::from_rows({{-1}, {0.5}}), 1.0, 1.0, 0.0, -4.0);
  add_scalar("quad-1var-shifted", DenseMatrix::from_rows({{1}, {1}}), 1.0, 1.0, 1.0, -6.0);

  // Two variables, ellipse y1^2/a^2 + y2^2/b^2 = 1.
  const auto add_ellipse = [&](std::string name, DenseMatrix h, double beta, double a, double b) {
    const auto g = DenseMatrix::from_rows({{1.0 / (a * a), 0.0}, {0.0, 1.0 / (b * b)}});
    EcCase cs{std::move(name), {std::move(h), beta, {quadratic_constraint(g, {0, 0}, -1.0)}, {}}, {}};
    cs.expected = curve_oracle(
        cs.problem, [a, b](double t) { return Vector{a * std::cos(t), b * std::sin(t)}; },
        [a, b](double t) { return Vector{-a * std::sin(t), b * std::cos(t)}; });
    cases.push_back(std::move(cs));
  };
  add_ellipse("quad-2var-circle", DenseMatrix::from_rows({{1.0, 0.3}, {0.2, 2.0}, {0.0, 0.5}}), 2.0, 1.0, 1.0);
  add_ellipse("quad-2var-ellipse", DenseMatrix::from_rows({{0.8, -0.5}, {1.0, 1.2}, {0.0, 0.4}}), 1.0, 2.0, 0.5);

  // Circle intersected with a line: feasible set {(1, 0), (0, 1)}.
  {
    EcCase cs{"quad-2var-circle-and-line",
              {DenseMatrix::from_rows({{1.0, 0.5}, {0.3, 1.0}, {0.0, 0.2}}),
               1.0,
               {quadratic_constraint(DenseMatrix::identity(2), {0, 0}, -1.0), linear_constraint({1, 1}, 1.0)},
               {}},
              {}};
    const Vector p1{1, 0}, p2{0, 1};
    cs.expected = objective(cs.problem, p1) <= objective(cs.problem, p2) ? p1 : p2;
    cases.push_back(std::move(cs));
  }
  return cases;
}

}  // namespace spk::testing
