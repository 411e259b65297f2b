#pragma once

// Gauss-Legendre implicit Runge-Kutta methods for linear systems
//   E z' = F z + g
// where E may have zero rows (algebraic equations).

#include <span>
#include <vector>

#include "spk/linalg.hpp"
#include "spk/quadrature.hpp"

namespace spk {

struct ButcherTableau {
  Index s = 0;
  DenseMatrix A;
  Vector b;
  Vector c;
};

// s-stage Gauss-Legendre tableau, 1 <= s <= 10. The nodes are the zeros of
// the shifted Legendre polynomial on (0, 1); a_ij and b_i integrate the
// Lagrange polynomials on those nodes with the s-point Gauss rule itself,
// which is exact for their degree s - 1.
inline ButcherTableau gauss_legendre_tableau(Index s) {
  if (s < 1 || s > 10) throw Error("Gauss-Legendre tableau: stage count must be in [1, 10]");
  const QuadratureRule g = gauss_legendre(s);
  ButcherTableau t;
  t.s = s;
  t.A = DenseMatrix(s, s);
  for (Index i = 0; i < s; ++i) {
    t.c.push_back(0.5 * (g.points[i] + 1.0));
    t.b.push_back(0.5 * g.weights[i]);
  }
  const auto lagrange = [&](Index j, double x) {
    double v = 1.0;
    for (Index m = 0; m < s; ++m)
      if (m != j) v *= (x - t.c[m]) / (t.c[j] - t.c[m]);
    return v;
  };
  for (Index i = 0; i < s; ++i)
    for (Index j = 0; j < s; ++j) {
      double a = 0.0;
      for (Index k = 0; k < s; ++k) a += t.b[k] * lagrange(j, t.c[i] * t.c[k]);
      t.A(i, j) = t.c[i] * a;
    }
  return t;
}

// Stacked stage system for x = [k^1; ...; k^s], each block of size d.
struct StageSystem {
  SparseMatrix matrix;
  Vector rhs;
  Index stages = 0;
  Index block_size = 0;

  std::span<const double> stage(std::span<const double> x, Index i) const { return x.subspan(i * block_size, block_size); }
};

namespace detail {

inline std::vector<bool> algebraic_rows(const SparseMatrix& e) {
  std::vector<bool> alg(e.rows(), true);
  const auto rp = e.row_ptr();
  const auto v = e.values();
  for (Index i = 0; i < e.rows(); ++i)
    for (Index k = rp[i]; k < rp[i + 1]; ++k)
      if (v[k] != 0.0) alg[i] = false;
  return alg;
}

}  // namespace detail

// Stage equations E k^i - dt sum_j a_ij F k^j = F z_n + g on rows where E is
// nonzero. Rows of E that are identically zero are algebraic and are imposed
// on the stage values directly, F k^i = 0; this keeps the algebraic relations
// satisfied by z_{n+1} whenever z_n satisfies them.
inline StageSystem assemble_stage_system(const SparseMatrix& e, const SparseMatrix& f, std::span<const double> g,
                                         std::span<const double> z_n, double dt, const ButcherTableau& tab) {
  const Index d = e.rows();
  detail::require_dims(e.cols() == d && f.rows() == d && f.cols() == d && g.size() == d && z_n.size() == d,
                       "stage system");
  const auto alg = detail::algebraic_rows(e);
  const Index s = tab.s;
  BlockAssembler out(s * d, s * d);
  for (const auto& t : e.triplets())
    for (Index i = 0; i < s; ++i) out.add(i * d + t.row, i * d + t.col, t.value);
  for (const auto& t : f.triplets())
    for (Index i = 0; i < s; ++i) {
      if (alg[t.row]) {
        out.add(i * d + t.row, i * d + t.col, t.value);
        continue;
      }
      for (Index j = 0; j < s; ++j) out.add(i * d + t.row, j * d + t.col, -dt * tab.A(i, j) * t.value);
    }

  Vector fz = f.multiply(z_n);
  StageSystem sys{std::move(out).build(), Vector(s * d, 0.0), s, d};
  for (Index i = 0; i < s; ++i)
    for (Index r = 0; r < d; ++r)
      if (!alg[r]) sys.rhs[i * d + r] = fz[r] + g[r];
  return sys;
}

// z_n + dt sum_i b_i x|^i
inline Vector reconstruct(std::span<const double> z_n, double dt, const ButcherTableau& tab,
                          std::span<const double> x) {
  const Index d = z_n.size();
  detail::require_dims(x.size() == tab.s * d, "stage reconstruction");
  Vector z(z_n.begin(), z_n.end());
  for (Index i = 0; i < tab.s; ++i) axpy(dt * tab.b[i], x.subspan(i * d, d), z);
  return z;
}

}  // namespace spk
