#pragma once

// Legendre polynomials and the Gauss, Gauss-Lobatto and collapsed-triangle
// quadrature rules built on them.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "spk/error.hpp"
#include "spk/linalg.hpp"

namespace spk {

// (P_n(x), P_n'(x)) by the three-term recurrence, valid on [-1, 1].
inline std::pair<double, double> legendre(Index n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p0 = 1.0, p1 = x;
  for (Index k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  double dp;
  if (std::abs(x) < 1.0) {
    dp = n * (x * p1 - p0) / (x * x - 1.0);
  } else {
    const double sign = (x > 0.0 || n % 2 == 1) ? 1.0 : -1.0;
    dp = sign * 0.5 * n * (n + 1.0);
  }
  return {p1, dp};
}

namespace detail {

// Root of f in [lo, hi] where f(lo), f(hi) have opposite signs: Newton steps,
// replaced by bisection whenever they leave the bracket or stall.
template <class F>
double safeguarded_newton(F&& f, double lo, double hi) {
  double flo = f(lo).first;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const auto [fx, dfx] = f(x);
    if (fx == 0.0) return x;
    if ((fx < 0.0) == (flo < 0.0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
    }
    double next = dfx != 0.0 ? x - fx / dfx : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-16 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-16) return next;
    x = next;
  }
  return x;
}

// Roots of g on (a, b), bracketed by sign changes on a uniform grid.
template <class F>
std::vector<double> bracketed_roots(F&& g, double a, double b, Index expected) {
  const Index samples = 400 * (expected + 1);
  std::vector<double> roots;
  double x0 = a, f0 = g(a).first;
  for (Index k = 1; k <= samples; ++k) {
    const double x1 = a + (b - a) * static_cast<double>(k) / samples;
    const double f1 = g(x1).first;
    if (f1 == 0.0) {
      if (k < samples) roots.push_back(x1);
    } else if (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
      roots.push_back(safeguarded_newton(g, x0, x1));
    }
    x0 = x1;
    f0 = f1;
  }
  if (roots.size() != expected) throw Error("root bracketing failed");
  return roots;
}

}  // namespace detail

struct QuadratureRule {
  Vector points;
  Vector weights;
};

// n-point Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(Index n) {
  if (n < 1) throw Error("Gauss rule needs at least one point");
  QuadratureRule r;
  r.points = detail::bracketed_roots([n](double x) { return legendre(n, x); }, -1.0, 1.0, n);
  for (double x : r.points) {
    const double dp = legendre(n, x).second;
    r.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
  }
  return r;
}

// n-point Gauss-Lobatto-Legendre rule on [-1, 1] (endpoints included).
inline QuadratureRule gauss_lobatto(Index n) {
  if (n < 2) throw Error("Lobatto rule needs at least two points");
  const Index p = n - 1;
  QuadratureRule r;
  r.points.push_back(-1.0);
  if (p >= 2) {
    auto interior = detail::bracketed_roots(
        [p](double x) {
          // Roots of P_p'; derivative from the Legendre ODE.
          const auto [v, dv] = legendre(p, x);
          return std::pair{dv, (2.0 * x * dv - p * (p + 1.0) * v) / (1.0 - x * x)};
        },
        -1.0 + 1e-14, 1.0 - 1e-14, p - 1);
    r.points.insert(r.points.end(), interior.begin(), interior.end());
  }
  r.points.push_back(1.0);
  for (double x : r.points) {
    const double v = legendre(p, x).first;
    r.weights.push_back(2.0 / (p * (p + 1.0) * v * v));
  }
  return r;
}

// Rule on the reference triangle {(s, t): s, t >= 0, s + t <= 1} from the
// Duffy map of an n x n Gauss tensor rule; exact to total degree 2n - 2.
struct TriangleRule {
  std::vector<std::array<double, 2>> points;  // barycentric (s, t); the third is 1 - s - t
  Vector weights;                             // sum to 1/2
};

inline TriangleRule triangle_rule(Index n) {
  const auto g = gauss_legendre(n);
  TriangleRule r;
  for (Index i = 0; i < n; ++i) {
    const double u = 0.5 * (g.points[i] + 1.0);
    for (Index j = 0; j < n; ++j) {
      const double v = 0.5 * (g.points[j] + 1.0);
      r.points.push_back({u, (1.0 - u) * v});
      r.weights.push_back(0.25 * g.weights[i] * g.weights[j] * (1.0 - u));
    }
  }
  return r;
}

// Edge-midpoint rule, exact for quadratics.
inline TriangleRule triangle_midpoint_rule() {
  return {{{0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}}, {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
}

}  // namespace spk
