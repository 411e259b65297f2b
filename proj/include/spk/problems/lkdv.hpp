#pragma once

// Linear KdV  u_t + u_x + u_xxx = 0  on a periodic interval, written as the
// first-order system  u_t + v_x = 0,  v = u + w_x,  w = u_x  and discretised
// with discontinuous piecewise polynomials and central fluxes.
//
// State layout: z = [U; V; W], each block (q+1)*M nodal coefficients,
// element-major, nodes at the Gauss-Lobatto points of each element.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "spk/constraints.hpp"
#include "spk/glrk.hpp"
#include "spk/quadrature.hpp"
#include "spk/stepping.hpp"

namespace spk::lkdv {

struct DgMesh1D {
  double X = 40.0;
  Index M = 50;
  Index q = 1;

  Index nodes_per_element() const { return q + 1; }
  Index dofs() const { return (q + 1) * M; }
  double h() const { return X / static_cast<double>(M); }
};

namespace detail {

// Lagrange basis on the reference element [-1, 1].
class ReferenceBasis {
 public:
  explicit ReferenceBasis(Vector nodes) : nodes_(std::move(nodes)) {}

  Index size() const { return nodes_.size(); }
  const Vector& nodes() const { return nodes_; }

  double value(Index j, double x) const {
    double v = 1.0;
    for (Index m = 0; m < size(); ++m)
      if (m != j) v *= (x - nodes_[m]) / (nodes_[j] - nodes_[m]);
    return v;
  }

  double derivative(Index j, double x) const {
    double d = 0.0;
    for (Index k = 0; k < size(); ++k) {
      if (k == j) continue;
      double p = 1.0 / (nodes_[j] - nodes_[k]);
      for (Index m = 0; m < size(); ++m)
        if (m != j && m != k) p *= (x - nodes_[m]) / (nodes_[j] - nodes_[m]);
      d += p;
    }
    return d;
  }

 private:
  Vector nodes_;
};

inline Vector reference_nodes(Index q) {
  if (q == 0) return Vector{0.0};
  return gauss_lobatto(q + 1).points;
}

}  // namespace detail

class LkdvDiscretisation {
 public:
  explicit LkdvDiscretisation(DgMesh1D mesh)
      : mesh_(mesh), basis_(detail::reference_nodes(mesh.q)), quad_(gauss_legendre(mesh.q + 2)) {
    if (mesh.M < 1 || !(mesh.X > 0.0)) throw Error("lkdv: invalid mesh");
    const Index p = basis_.size();
    const double h = mesh_.h();
    elem_mass_ = DenseMatrix(p, p);
    elem_deriv_ = DenseMatrix(p, p);
    for (Index k = 0; k < quad_.points.size(); ++k) {
      const double xi = quad_.points[k], w = quad_.weights[k];
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) {
          elem_mass_(i, j) += 0.5 * h * w * basis_.value(i, xi) * basis_.value(j, xi);
          elem_deriv_(i, j) += w * basis_.derivative(j, xi) * basis_.value(i, xi);
        }
    }
    elem_mass_inv_ = DenseMatrix(p, p);
    const DenseLu lu(elem_mass_);
    for (Index j = 0; j < p; ++j) {
      Vector e(p, 0.0);
      e[j] = 1.0;
      const Vector c = lu.solve(e);
      for (Index i = 0; i < p; ++i) elem_mass_inv_(i, j) = c[i];
    }
    build_operators();
  }

  const DgMesh1D& mesh() const { return mesh_; }
  Index dofs() const { return mesh_.dofs(); }
  Index state_size() const { return 3 * dofs(); }

  // Mass matrix M_ij = int phi_i phi_j.
  const SparseMatrix& mass() const { return mass_; }
  // B_ij = int G(phi_j) phi_i, i.e. the mass matrix times the derivative.
  const SparseMatrix& weak_derivative() const { return weak_; }
  // G = M^{-1} B acting on coefficients.
  const SparseMatrix& derivative() const { return deriv_; }
  // omega_i = int phi_i
  const Vector& weights() const { return weights_; }

  double node_x(Index m, Index a) const { return mesh_.h() * (m + 0.5 * (basis_.nodes()[a] + 1.0)); }

  // U evaluated at x inside element m (x in its closure).
  double evaluate(std::span<const double> u, Index m, double x) const {
    const double xi = 2.0 * (x - m * mesh_.h()) / mesh_.h() - 1.0;
    double v = 0.0;
    for (Index a = 0; a < basis_.size(); ++a) v += u[m * basis_.size() + a] * basis_.value(a, xi);
    return v;
  }

  // L2 projection onto the DG space.
  Vector project(const std::function<double(double)>& u) const {
    const Index p = basis_.size();
    const auto rule = gauss_legendre(p + 8);
    Vector out(dofs(), 0.0);
    for (Index m = 0; m < mesh_.M; ++m) {
      Vector rhs(p, 0.0);
      for (Index k = 0; k < rule.points.size(); ++k) {
        const double xi = rule.points[k];
        const double x = mesh_.h() * (m + 0.5 * (xi + 1.0));
        for (Index i = 0; i < p; ++i) rhs[i] += 0.5 * mesh_.h() * rule.weights[k] * u(x) * basis_.value(i, xi);
      }
      const Vector c = elem_mass_inv_.multiply(rhs);
      for (Index i = 0; i < p; ++i) out[m * p + i] = c[i];
    }
    return out;
  }

  double l2_error(std::span<const double> u, const std::function<double(double)>& exact) const {
    const Index p = basis_.size();
    const auto rule = gauss_legendre(p + 8);
    double s = 0.0;
    for (Index m = 0; m < mesh_.M; ++m)
      for (Index k = 0; k < rule.points.size(); ++k) {
        const double xi = rule.points[k];
        const double x = mesh_.h() * (m + 0.5 * (xi + 1.0));
        double uh = 0.0;
        for (Index a = 0; a < p; ++a) uh += u[m * p + a] * basis_.value(a, xi);
        s += 0.5 * mesh_.h() * rule.weights[k] * (uh - exact(x)) * (uh - exact(x));
      }
    return std::sqrt(s);
  }

  // [U; V; W] with U = Pi u0, W = G U, V = U + G W.
  Vector initial_state(const std::function<double(double)>& u0) const {
    const Vector u = project(u0);
    const Vector w = deriv_.multiply(u);
    const Vector v = add(u, deriv_.multiply(w));
    return stack(u, v, w);
  }

  Vector stack(std::span<const double> u, std::span<const double> v, std::span<const double> w) const {
    Vector z(u.begin(), u.end());
    z.insert(z.end(), v.begin(), v.end());
    z.insert(z.end(), w.begin(), w.end());
    return z;
  }

  std::span<const double> block(std::span<const double> z, Index b) const { return z.subspan(b * dofs(), dofs()); }

  // Throws ConsistencyError unless W = G U to 1e-10.
  void check_consistent(std::span<const double> z) const {
    spk::detail::require_dims(z.size() == state_size(), "lkdv state");
    const Vector gu = deriv_.multiply(block(z, 0));
    const double gap = norm_inf(subtract(block(z, 2), gu));
    if (!(gap <= 1e-10)) throw ConsistencyError("lkdv: W differs from G U by " + std::to_string(gap));
  }

  // Mass, momentum and energy, as constraints on a state z whose targets are
  // the values at z0.
  std::vector<QuadraticConstraint> invariants(std::span<const double> z0) const {
    const Index n = dofs();
    Vector omega(3 * n, 0.0);
    std::copy(weights_.begin(), weights_.end(), omega.begin());
    BlockAssembler mom(3 * n, 3 * n), en(3 * n, 3 * n);
    mom.add_block(0, 0, mass_, 0.5);
    en.add_block(0, 0, mass_, -0.5);
    en.add_block(2 * n, 2 * n, mass_, 0.5);
    std::vector<QuadraticConstraint> out;
    out.push_back(QuadraticConstraint::linear(std::move(omega), 0.0, "mass"));
    out.emplace_back(std::move(mom).build(), Vector(3 * n, 0.0), 0.0, "momentum");
    out.emplace_back(std::move(en).build(), Vector(3 * n, 0.0), 0.0, "energy");
    for (auto& c : out) {
      const double target = spk::evaluate(c, z0);
      c = QuadraticConstraint(c.matrix(), c.linear_term(), -target, c.label(), std::max(1.0, std::abs(target)));
    }
    return out;
  }

  // Crank-Nicolson system in z^{n+1} = [U^{n+1}; V; W^{n+1}]:
  //   M U/dt + B V               = M U^n/dt
  //   -M U/2 + M V - B W/2        = M U^n/2 + B W^n/2
  //   -B U + M W                  = 0
  SparseMatrix cn_matrix(double dt) const {
    const Index n = dofs();
    BlockAssembler a(3 * n, 3 * n);
    a.add_block(0, 0, mass_, 1.0 / dt);
    a.add_block(0, n, weak_);
    a.add_block(n, 0, mass_, -0.5);
    a.add_block(n, n, mass_);
    a.add_block(n, 2 * n, weak_, -0.5);
    a.add_block(2 * n, 0, weak_, -1.0);
    a.add_block(2 * n, 2 * n, mass_);
    return std::move(a).build();
  }

  // Semi-discrete form E z' = F z with E = diag(M, 0, 0) and
  // F = [[0, -B, 0], [M, -M, B], [B, 0, -M]].
  std::pair<SparseMatrix, SparseMatrix> semi_discrete() const {
    const Index n = dofs();
    BlockAssembler e(3 * n, 3 * n), f(3 * n, 3 * n);
    e.add_block(0, 0, mass_);
    f.add_block(0, n, weak_, -1.0);
    f.add_block(n, 0, mass_);
    f.add_block(n, n, mass_, -1.0);
    f.add_block(n, 2 * n, weak_);
    f.add_block(2 * n, 0, weak_);
    f.add_block(2 * n, 2 * n, mass_, -1.0);
    return {std::move(e).build(), std::move(f).build()};
  }

  LinearScheme crank_nicolson(double dt, std::span<const double> z0) const {
    check_consistent(z0);
    LinearScheme s;
    s.matrix = cn_matrix(dt);
    s.rhs = [m = mass_, b = weak_, n = dofs(), dt](std::span<const double> z) {
      const Vector mu = m.multiply(z.subspan(0, n));
      const Vector bw = b.multiply(z.subspan(2 * n, n));
      Vector f(3 * n, 0.0);
      for (Index i = 0; i < n; ++i) {
        f[i] = mu[i] / dt;
        f[n + i] = 0.5 * mu[i] + 0.5 * bw[i];
      }
      return f;
    };
    s.laws = [inv = invariants(z0)](std::span<const double>) { return inv; };
    s.dt = dt;
    return s;
  }

  LinearScheme glrk(double dt, const ButcherTableau& tab, std::span<const double> z0) const {
    check_consistent(z0);
    auto [e, f] = semi_discrete();
    LinearScheme s;
    s.matrix = assemble_stage_system(e, f, Vector(state_size(), 0.0), z0, dt, tab).matrix;
    s.rhs = [e = std::move(e), f = std::move(f), dt, tab, n = state_size()](std::span<const double> z) {
      return assemble_stage_system(e, f, Vector(n, 0.0), z, dt, tab).rhs;
    };
    s.laws = [inv = invariants(z0)](std::span<const double>) { return inv; };
    s.tableau = tab;
    s.dt = dt;
    return s;
  }

 private:
  void build_operators() {
    const Index p = basis_.size(), M = mesh_.M, n = dofs();
    std::vector<Triplet> mt, bt, minv;
    for (Index m = 0; m < M; ++m)
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) {
          mt.push_back({m * p + i, m * p + j, elem_mass_(i, j)});
          bt.push_back({m * p + i, m * p + j, elem_deriv_(i, j)});
          minv.push_back({m * p + i, m * p + j, elem_mass_inv_(i, j)});
        }
    // Interface x_m between element m-1 (its right end) and m (its left end):
    // -[U]{phi} with [U] = U_{m-1}(1) - U_m(-1).
    for (Index m = 0; m < M; ++m) {
      const Index l = (m + M - 1) % M;
      for (Index i = 0; i < p; ++i) {
        const double li = basis_.value(i, -1.0), ri = basis_.value(i, 1.0);
        for (Index j = 0; j < p; ++j) {
          const double lj = basis_.value(j, -1.0), rj = basis_.value(j, 1.0);
          bt.push_back({m * p + i, l * p + j, -0.5 * li * rj});
          bt.push_back({m * p + i, m * p + j, 0.5 * li * lj});
          bt.push_back({l * p + i, l * p + j, -0.5 * ri * rj});
          bt.push_back({l * p + i, m * p + j, 0.5 * ri * lj});
        }
      }
    }
    mass_ = SparseMatrix(n, n, std::move(mt));
    weak_ = SparseMatrix(n, n, std::move(bt));
    const SparseMatrix mass_inv(n, n, std::move(minv));
    deriv_ = multiply(mass_inv, weak_);
    weights_ = mass_.multiply(Vector(n, 1.0));
  }

  static SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<Triplet> t;
    const auto ar = a.row_ptr(), ac = a.col_idx();
    const auto av = a.values();
    const auto br = b.row_ptr(), bc = b.col_idx();
    const auto bv = b.values();
    for (Index i = 0; i < a.rows(); ++i)
      for (Index k = ar[i]; k < ar[i + 1]; ++k)
        for (Index l = br[ac[k]]; l < br[ac[k] + 1]; ++l) t.push_back({i, bc[l], av[k] * bv[l]});
    return SparseMatrix(a.rows(), b.cols(), std::move(t));
  }

  DgMesh1D mesh_;
  detail::ReferenceBasis basis_;
  QuadratureRule quad_;
  DenseMatrix elem_mass_, elem_deriv_, elem_mass_inv_;
  SparseMatrix mass_, weak_, deriv_;
  Vector weights_;
};

// Travelling wave sin(alpha (x - (1 - alpha^2) t)) + 1, an exact solution.
inline double travelling_wave(double t, double x, double alpha = std::numbers::pi / 5.0) {
  return std::sin(alpha * (x - (1.0 - alpha * alpha) * t)) + 1.0;
}

inline SparseMatrix dg_derivative_operator(const DgMesh1D& mesh) { return LkdvDiscretisation(mesh).derivative(); }

struct AssembledStep {
  SparseMatrix matrix;
  Vector rhs;
  std::vector<QuadraticConstraint> constraints;  // on the unknown of the system
};

// One Crank-Nicolson step out of a consistent z_n, with the invariants
// targeting their values at z_n.
inline AssembledStep assemble_cn_step(const DgMesh1D& mesh, std::span<const double> z_n, double dt) {
  const LkdvDiscretisation d(mesh);
  const LinearScheme s = d.crank_nicolson(dt, z_n);
  return {s.matrix, s.rhs(z_n), s.constraints(z_n)};
}

inline AssembledStep assemble_glrk_step(const DgMesh1D& mesh, std::span<const double> z_n, double dt,
                                        const ButcherTableau& tab) {
  const LkdvDiscretisation d(mesh);
  const LinearScheme s = d.glrk(dt, tab, z_n);
  return {s.matrix, s.rhs(z_n), s.constraints(z_n)};
}

}  // namespace spk::lkdv
