#pragma once

// Heat equation u_t = lap u on the unit square, homogeneous Neumann
// conditions, continuous P1 elements on an M x M grid of squares split along
// the (0,0)-(1,1) diagonal. Node (i, j) has index i + j (M + 1).

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "spk/constraints.hpp"
#include "spk/krylov.hpp"
#include "spk/preconditioners.hpp"
#include "spk/quadrature.hpp"
#include "spk/stepping.hpp"

namespace spk::heat {

using Point = std::array<double, 2>;

struct UnitSquareMesh {
  Index M = 50;

  Index nodes() const { return (M + 1) * (M + 1); }
  Index cells() const { return 2 * M * M; }
  double h() const { return 1.0 / M; }
  Index node(Index i, Index j) const { return i + j * (M + 1); }
  Point coordinate(Index n) const { return {(n % (M + 1)) * h(), (n / (M + 1)) * h()}; }

  std::array<Index, 3> triangle(Index c) const {
    const Index sq = c / 2, i = sq % M, j = sq / M;
    if (c % 2 == 0) return {node(i, j), node(i + 1, j), node(i + 1, j + 1)};
    return {node(i, j), node(i + 1, j + 1), node(i, j + 1)};
  }
};

class HeatDiscretisation {
 public:
  explicit HeatDiscretisation(UnitSquareMesh mesh) : mesh_(mesh) {
    if (mesh.M < 1) throw Error("heat: need at least one cell per side");
    assemble();
  }

  const UnitSquareMesh& mesh() const { return mesh_; }
  Index dofs() const { return mesh_.nodes(); }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiff_; }
  // omega = M 1, so omega^T z = int u
  const Vector& weights() const { return omega_; }

  // L2 projection of u0 onto P1.
  Vector project(const std::function<double(const Point&)>& u0) const {
    const auto rule = triangle_rule(5);
    Vector b(dofs(), 0.0);
    for (Index c = 0; c < mesh_.cells(); ++c) {
      const auto t = mesh_.triangle(c);
      const Point p0 = mesh_.coordinate(t[0]), p1 = mesh_.coordinate(t[1]), p2 = mesh_.coordinate(t[2]);
      const double jac = std::abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
      for (Index q = 0; q < rule.weights.size(); ++q) {
        const double s = rule.points[q][0], r = rule.points[q][1];
        const std::array<double, 3> lam{1.0 - s - r, s, r};
        const Point x{lam[0] * p0[0] + lam[1] * p1[0] + lam[2] * p2[0], lam[0] * p0[1] + lam[1] * p1[1] + lam[2] * p2[1]};
        const double w = jac * rule.weights[q] * u0(x);
        for (Index k = 0; k < 3; ++k) b[t[k]] += w * lam[k];
      }
    }
    const double tol = 1e-15 * std::max(1.0, norm2(b));
    auto [u, report] = fgmres(mass_, b, Vector(dofs(), 0.0), Preconditioner(jacobi(mass_), "jacobi"), tol, 200);
    if (report.status != SolveStatus::Converged) throw Error("heat: L2 projection did not converge");
    return u;
  }

  // Mass conservation against z0 and the CN dissipation law for the step out
  // of z_n: 1/2 |z+|_M^2 - 1/2 |z_n|_M^2 + dt/4 (z+ + z_n)^T L (z+ + z_n) = 0.
  std::vector<QuadraticConstraint> laws(std::span<const double> z0, std::span<const double> z_n, double dt) const {
    spk::detail::require_dims(z0.size() == dofs() && z_n.size() == dofs(), "heat state");
    std::vector<QuadraticConstraint> out;
    const double m0 = dot(omega_, z0);
    out.push_back(QuadraticConstraint::linear(omega_, -m0, "mass", std::max(1.0, std::abs(m0))));
    const Vector mz = mass_.multiply(z_n), lz = stiff_.multiply(z_n);
    const double c = -(0.5 * dot(z_n, mz) - 0.25 * dt * dot(z_n, lz));
    Vector v = lz;
    scale(0.5 * dt, v);
    out.emplace_back(linear_combination(0.5, mass_, 0.25 * dt, stiff_), std::move(v), c, "dissipation",
                     std::max(1.0, std::abs(c)));
    return out;
  }

  SparseMatrix cn_matrix(double dt) const { return linear_combination(1.0, mass_, 0.5 * dt, stiff_); }

  LinearScheme crank_nicolson(double dt, std::span<const double> z0) const {
    spk::detail::require_dims(z0.size() == dofs(), "heat state");
    LinearScheme s;
    s.matrix = cn_matrix(dt);
    s.rhs = [r = linear_combination(1.0, mass_, -0.5 * dt, stiff_)](std::span<const double> z) { return r.multiply(z); };
    s.laws = [self = *this, z0 = Vector(z0.begin(), z0.end()), dt](std::span<const double> z_n) {
      return self.laws(z0, z_n, dt);
    };
    s.dt = dt;
    return s;
  }

 private:
  void assemble() {
    std::vector<Triplet> m, l;
    for (Index c = 0; c < mesh_.cells(); ++c) {
      const auto t = mesh_.triangle(c);
      std::array<Point, 3> p;
      for (Index k = 0; k < 3; ++k) p[k] = mesh_.coordinate(t[k]);
      const double area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
      const double area = 0.5 * std::abs(area2);
      // grad lambda_k = (b_k, c_k) / (2 area)
      std::array<double, 3> bx, cy;
      for (Index k = 0; k < 3; ++k) {
        const Point& a = p[(k + 1) % 3];
        const Point& b = p[(k + 2) % 3];
        bx[k] = a[1] - b[1];
        cy[k] = b[0] - a[0];
      }
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) {
          m.push_back({t[i], t[j], area / 12.0 * (i == j ? 2.0 : 1.0)});
          l.push_back({t[i], t[j], (bx[i] * bx[j] + cy[i] * cy[j]) / (4.0 * area)});
        }
    }
    mass_ = SparseMatrix(dofs(), dofs(), std::move(m));
    stiff_ = SparseMatrix(dofs(), dofs(), std::move(l));
    omega_ = mass_.multiply(Vector(dofs(), 1.0));
  }

  UnitSquareMesh mesh_;
  SparseMatrix mass_, stiff_;
  Vector omega_;
};

// 10^3 [ (x (x - 1))^5 + y (y - 1)^6 ]
inline double polynomial_initial_data(const Point& p) {
  const double x = p[0], y = p[1];
  return 1e3 * (std::pow(x * (x - 1.0), 5) + y * std::pow(y - 1.0, 6));
}

struct AssembledStep {
  SparseMatrix matrix;
  Vector rhs;
  std::vector<QuadraticConstraint> constraints;
};

inline AssembledStep assemble_heat_cn(const UnitSquareMesh& mesh, std::span<const double> z_n, double dt) {
  const HeatDiscretisation d(mesh);
  const LinearScheme s = d.crank_nicolson(dt, z_n);
  return {s.matrix, s.rhs(z_n), s.constraints(z_n)};
}

}  // namespace spk::heat
