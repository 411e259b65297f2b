#pragma once

// Linear rotating shallow water  u_t + f u^perp + c^2 grad rho = 0,
// rho_t + div u = 0  on a doubly periodic rectangle. Velocity in lowest-order
// Raviart-Thomas, rho piecewise constant, on an M x M grid of squares each
// split along its (0,0)-(1,1) diagonal.
//
// State layout: z = [U; rho], U the 3 M^2 edge normal components and rho the
// 2 M^2 cell values.

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "spk/constraints.hpp"
#include "spk/quadrature.hpp"
#include "spk/stepping.hpp"

namespace spk::swe {

using Point = std::array<double, 2>;

// Structured periodic triangulation. Edge 3*(i + j*M) + {0, 1, 2} is the
// bottom, left and diagonal edge of square (i, j); the global normal of an
// edge with tangent t is (t_y, -t_x).
struct TriMeshPeriodic {
  double X = 40.0, Y = 40.0;
  Index M = 32;

  struct Triangle {
    std::array<Point, 3> vertex;       // unwrapped coordinates
    std::array<Index, 3> edge;         // global edge opposite each vertex
    std::array<double, 3> orientation; // +1 when the global normal points outward
    double area = 0.0;
  };

  Index vertices() const { return M * M; }
  Index edges() const { return 3 * M * M; }
  Index cells() const { return 2 * M * M; }
  double hx() const { return X / M; }
  double hy() const { return Y / M; }

  Index edge_index(Index i, Index j, Index kind) const { return 3 * ((i % M) + (j % M) * M) + kind; }

  Point edge_normal(Index e) const {
    const Index kind = e % 3;
    Point t = kind == 0 ? Point{hx(), 0.0} : kind == 1 ? Point{0.0, hy()} : Point{hx(), hy()};
    const double len = std::hypot(t[0], t[1]);
    return {t[1] / len, -t[0] / len};
  }

  double edge_length(Index e) const {
    const Index kind = e % 3;
    return kind == 0 ? hx() : kind == 1 ? hy() : std::hypot(hx(), hy());
  }

  // Cell 2*(i + j*M) is below the diagonal of square (i, j), the next one above.
  Triangle triangle(Index c) const {
    const Index sq = c / 2, i = sq % M, j = sq / M;
    const Point p00{i * hx(), j * hy()}, p10{(i + 1) * hx(), j * hy()}, p11{(i + 1) * hx(), (j + 1) * hy()},
        p01{i * hx(), (j + 1) * hy()};
    Triangle t;
    if (c % 2 == 0) {
      t.vertex = {p00, p10, p11};
      t.edge = {edge_index(i + 1, j, 1), edge_index(i, j, 2), edge_index(i, j, 0)};
    } else {
      t.vertex = {p00, p11, p01};
      t.edge = {edge_index(i, j + 1, 0), edge_index(i, j, 1), edge_index(i, j, 2)};
    }
    t.area = 0.5 * hx() * hy();
    const Point centre{(t.vertex[0][0] + t.vertex[1][0] + t.vertex[2][0]) / 3.0,
                       (t.vertex[0][1] + t.vertex[1][1] + t.vertex[2][1]) / 3.0};
    for (Index k = 0; k < 3; ++k) {
      // Edge opposite vertex k runs between the other two; its midpoint minus
      // the centroid points outward.
      const Point& a = t.vertex[(k + 1) % 3];
      const Point& b = t.vertex[(k + 2) % 3];
      const Point out{0.5 * (a[0] + b[0]) - centre[0], 0.5 * (a[1] + b[1]) - centre[1]};
      const Point n = edge_normal(t.edge[k]);
      t.orientation[k] = out[0] * n[0] + out[1] * n[1] > 0.0 ? 1.0 : -1.0;
    }
    return t;
  }
};

class SweDiscretisation {
 public:
  SweDiscretisation(TriMeshPeriodic mesh, double f, double c2) : mesh_(mesh), f_(f), c2_(c2) {
    if (mesh.M < 2 || !(mesh.X > 0.0) || !(mesh.Y > 0.0)) throw Error("swe: invalid mesh");
    assemble();
  }

  const TriMeshPeriodic& mesh() const { return mesh_; }
  Index velocity_dofs() const { return mesh_.edges(); }
  Index pressure_dofs() const { return mesh_.cells(); }
  Index state_size() const { return velocity_dofs() + pressure_dofs(); }
  double coriolis() const { return f_; }
  double c2() const { return c2_; }

  // int phi_a . phi_b
  const SparseMatrix& velocity_mass() const { return mu_; }
  // int phi_b^perp . phi_a
  const SparseMatrix& coriolis_matrix() const { return cor_; }
  // D_{T,e} = int_T div phi_e
  const SparseMatrix& divergence() const { return div_; }
  // diag(|T|)
  const SparseMatrix& pressure_mass() const { return mr_; }

  // Value of basis function k (local, opposite vertex k) of triangle t at x.
  static Point basis(const TriMeshPeriodic::Triangle& t, Index k, const Point& x, double edge_len) {
    const double s = t.orientation[k] * edge_len / (2.0 * t.area);
    return {s * (x[0] - t.vertex[k][0]), s * (x[1] - t.vertex[k][1])};
  }

  // Velocity field of coefficient vector u at barycentric point (l1, l2) of cell c.
  Point velocity(std::span<const double> u, Index c, double l1, double l2) const {
    const auto t = mesh_.triangle(c);
    const Point x = at(t, l1, l2);
    Point v{0.0, 0.0};
    for (Index k = 0; k < 3; ++k) {
      const Point p = basis(t, k, x, mesh_.edge_length(t.edge[k]));
      v[0] += u[t.edge[k]] * p[0];
      v[1] += u[t.edge[k]] * p[1];
    }
    return v;
  }

  // Edge coefficients of the RT interpolant (normal component at midpoints).
  Vector interpolate_velocity(const std::function<Point(const Point&)>& field) const {
    Vector u(velocity_dofs(), 0.0);
    for (Index sq = 0; sq < mesh_.M * mesh_.M; ++sq) {
      const Index i = sq % mesh_.M, j = sq / mesh_.M;
      const Point base{i * mesh_.hx(), j * mesh_.hy()};
      const std::array<Point, 3> mid{Point{base[0] + 0.5 * mesh_.hx(), base[1]},
                                     Point{base[0], base[1] + 0.5 * mesh_.hy()},
                                     Point{base[0] + 0.5 * mesh_.hx(), base[1] + 0.5 * mesh_.hy()}};
      for (Index k = 0; k < 3; ++k) {
        const Index e = 3 * sq + k;
        const Point v = field(mid[k]), n = mesh_.edge_normal(e);
        u[e] = v[0] * n[0] + v[1] * n[1];
      }
    }
    return u;
  }

  // Cell averages of rho0.
  Vector project_pressure(const std::function<double(const Point&)>& rho0) const {
    const auto rule = triangle_midpoint_rule();
    Vector r(pressure_dofs(), 0.0);
    for (Index c = 0; c < pressure_dofs(); ++c) {
      const auto t = mesh_.triangle(c);
      double s = 0.0;
      for (Index q = 0; q < rule.weights.size(); ++q) s += 2.0 * rule.weights[q] * rho0(at(t, rule.points[q][0], rule.points[q][1]));
      r[c] = s;
    }
    return r;
  }

  Vector stack(std::span<const double> u, std::span<const double> rho) const {
    Vector z(u.begin(), u.end());
    z.insert(z.end(), rho.begin(), rho.end());
    return z;
  }

  // Mass int rho and energy 1/2 int |u|^2 + c^2 rho^2, targeting their values at z0.
  std::vector<QuadraticConstraint> invariants(std::span<const double> z0) const {
    const Index ne = velocity_dofs(), n = state_size();
    Vector omega(n, 0.0);
    const Vector area = mr_.diagonal();
    std::copy(area.begin(), area.end(), omega.begin() + ne);
    BlockAssembler en(n, n);
    en.add_block(0, 0, mu_, 0.5);
    en.add_block(ne, ne, mr_, 0.5 * c2_);
    std::vector<QuadraticConstraint> out;
    out.push_back(QuadraticConstraint::linear(std::move(omega), 0.0, "mass"));
    out.emplace_back(std::move(en).build(), Vector(n, 0.0), 0.0, "energy");
    for (auto& c : out) {
      const double target = spk::evaluate(c, z0);
      c = QuadraticConstraint(c.matrix(), c.linear_term(), -target, c.label(), std::max(1.0, std::abs(target)));
    }
    return out;
  }

  // [[Mu/dt + f/2 C, -c^2/2 D^T], [D/2, Mrho/dt]]
  SparseMatrix cn_matrix(double dt) const {
    const Index ne = velocity_dofs(), n = state_size();
    BlockAssembler a(n, n);
    a.add_block(0, 0, mu_, 1.0 / dt);
    a.add_block(0, 0, cor_, 0.5 * f_);
    a.add_block(0, ne, div_t_, -0.5 * c2_);
    a.add_block(ne, 0, div_, 0.5);
    a.add_block(ne, ne, mr_, 1.0 / dt);
    return std::move(a).build();
  }

  SparseMatrix cn_rhs_matrix(double dt) const {
    const Index ne = velocity_dofs(), n = state_size();
    BlockAssembler a(n, n);
    a.add_block(0, 0, mu_, 1.0 / dt);
    a.add_block(0, 0, cor_, -0.5 * f_);
    a.add_block(0, ne, div_t_, 0.5 * c2_);
    a.add_block(ne, 0, div_, -0.5);
    a.add_block(ne, ne, mr_, 1.0 / dt);
    return std::move(a).build();
  }

  LinearScheme crank_nicolson(double dt, std::span<const double> z0) const {
    spk::detail::require_dims(z0.size() == state_size(), "swe state");
    LinearScheme s;
    s.matrix = cn_matrix(dt);
    s.rhs = [r = cn_rhs_matrix(dt)](std::span<const double> z) { return r.multiply(z); };
    s.laws = [inv = invariants(z0)](std::span<const double>) { return inv; };
    s.dt = dt;
    return s;
  }

 private:
  static Point at(const TriMeshPeriodic::Triangle& t, double l1, double l2) {
    const double l0 = 1.0 - l1 - l2;
    return {l0 * t.vertex[0][0] + l1 * t.vertex[1][0] + l2 * t.vertex[2][0],
            l0 * t.vertex[0][1] + l1 * t.vertex[1][1] + l2 * t.vertex[2][1]};
  }

  void assemble() {
    const auto rule = triangle_midpoint_rule();
    std::vector<Triplet> mu, cor, div, mr;
    for (Index c = 0; c < mesh_.cells(); ++c) {
      const auto t = mesh_.triangle(c);
      std::array<double, 3> len{};
      for (Index k = 0; k < 3; ++k) len[k] = mesh_.edge_length(t.edge[k]);
      for (Index q = 0; q < rule.weights.size(); ++q) {
        const Point x = at(t, rule.points[q][0], rule.points[q][1]);
        const double w = 2.0 * t.area * rule.weights[q];
        std::array<Point, 3> phi;
        for (Index k = 0; k < 3; ++k) phi[k] = basis(t, k, x, len[k]);
        for (Index a = 0; a < 3; ++a)
          for (Index b = 0; b < 3; ++b) {
            mu.push_back({t.edge[a], t.edge[b], w * (phi[a][0] * phi[b][0] + phi[a][1] * phi[b][1])});
            // phi_b^perp = (-phi_b,y, phi_b,x)
            cor.push_back({t.edge[a], t.edge[b], w * (-phi[b][1] * phi[a][0] + phi[b][0] * phi[a][1])});
          }
      }
      for (Index k = 0; k < 3; ++k) div.push_back({c, t.edge[k], t.orientation[k] * len[k]});
      mr.push_back({c, c, t.area});
    }
    const Index ne = mesh_.edges(), nc = mesh_.cells();
    mu_ = SparseMatrix(ne, ne, std::move(mu));
    cor_ = SparseMatrix(ne, ne, std::move(cor));
    div_ = SparseMatrix(nc, ne, std::move(div));
    div_t_ = div_.transpose();
    mr_ = SparseMatrix(nc, nc, std::move(mr));
  }

  TriMeshPeriodic mesh_;
  double f_, c2_;
  SparseMatrix mu_, cor_, div_, div_t_, mr_;
};

// Gaussian height 10 exp(-((x - 20)^2 + (y - 20)^2) / 20^2).
inline double gaussian_pressure(const Point& p) {
  const double dx = p[0] - 20.0, dy = p[1] - 20.0;
  return 10.0 * std::exp(-(dx * dx + dy * dy) / 400.0);
}

inline Vector gaussian_initial_state(const SweDiscretisation& d) {
  return d.stack(Vector(d.velocity_dofs(), 0.0), d.project_pressure(gaussian_pressure));
}

inline SparseMatrix coriolis_perp_matrix(const TriMeshPeriodic& mesh) {
  return SweDiscretisation(mesh, 1.0, 1.0).coriolis_matrix();
}

struct AssembledStep {
  SparseMatrix matrix;
  Vector rhs;
  std::vector<QuadraticConstraint> constraints;
};

inline AssembledStep assemble_swe_cn(const TriMeshPeriodic& mesh, std::span<const double> z_n, double dt, double f,
                                     double c2) {
  const SweDiscretisation d(mesh, f, c2);
  const LinearScheme s = d.crank_nicolson(dt, z_n);
  return {s.matrix, s.rhs(z_n), s.constraints(z_n)};
}

}  // namespace spk::swe
