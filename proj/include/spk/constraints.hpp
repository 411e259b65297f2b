#pragma once

// Quadratic constraints  x^T M x + v^T x + c = 0  on the unknown of a linear
// system, their reduction onto a (preconditioned) Krylov basis, and lifting
// through the affine stage-reconstruction map of a Runge-Kutta step.

#include <string>
#include <utility>

#include "spk/linalg.hpp"

namespace spk {

namespace detail {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

class QuadraticConstraint {
 public:
  // `m` is replaced by its symmetric part. `scale` is the magnitude against
  // which feasibility is judged (|misfit| <= feas_tol * scale); it defaults to
  // 1, i.e. an absolute test.
  QuadraticConstraint(const SparseMatrix& m, Vector v, double c, std::string label = {}, double scale = 1.0)
      : m_(symmetric_part(m)), v_(std::move(v)), c_(c), label_(std::move(label)), scale_(scale) {
    detail::require_dims(m_.rows() == v_.size(), "constraint matrix and vector sizes differ");
  }

  static QuadraticConstraint linear(Vector v, double c, std::string label = {}, double scale = 1.0) {
    const Index n = v.size();
    return QuadraticConstraint(SparseMatrix::zero(n, n), std::move(v), c, std::move(label), scale);
  }

  Index size() const { return v_.size(); }
  bool is_linear() const { return m_.nnz() == 0; }

  const SparseMatrix& matrix() const { return m_; }
  const Vector& linear_term() const { return v_; }
  double constant() const { return c_; }
  const std::string& label() const { return label_; }
  double scale() const { return scale_; }

  QuadraticConstraint with_scale(double s) const {
    QuadraticConstraint q = *this;
    q.scale_ = s;
    return q;
  }

 private:
  SparseMatrix m_;
  Vector v_;
  double c_;
  std::string label_;
  double scale_;
};

// x^T sym(M) x + v^T x + c
inline double evaluate(const QuadraticConstraint& con, std::span<const double> x) {
  detail::require_dims(x.size() == con.size(), "constraint evaluation");
  detail::CompensatedSum s;
  if (!con.is_linear()) {
    const Vector mx = con.matrix().multiply(x);
    for (Index i = 0; i < x.size(); ++i) s.add(x[i] * mx[i]);
  }
  const auto& v = con.linear_term();
  for (Index i = 0; i < x.size(); ++i) s.add(v[i] * x[i]);
  s.add(con.constant());
  return s.value();
}

// A constraint expressed in Krylov coordinates y, for x = x0 + Z y:
//   y^T G y + g^T y + g0.
struct ReducedConstraint {
  DenseMatrix G;
  Vector g;
  double g0 = 0.0;
  double scale = 1.0;

  Index size() const { return g.size(); }

  double evaluate(std::span<const double> y) const {
    detail::require_dims(y.size() == g.size(), "reduced constraint evaluation");
    double s = g0 + dot(g, y);
    if (!G.empty()) s += dot(y, G.multiply(y));
    return s;
  }

  // Gradient 2 G y + g.
  Vector jacobian(std::span<const double> y) const {
    detail::require_dims(y.size() == g.size(), "reduced constraint jacobian");
    Vector j = g;
    if (!G.empty()) axpy(2.0, G.multiply(y), j);
    return j;
  }
};

inline Vector jacobian(const ReducedConstraint& r, std::span<const double> y) { return r.jacobian(y); }

// Incrementally maintained reduction of one constraint onto a growing basis.
// Appending a column costs one sparse product with M plus one dot product per
// existing column.
class ConstraintReduction {
 public:
  ConstraintReduction(const QuadraticConstraint& con, std::span<const double> x0) : con_(&con) {
    detail::require_dims(x0.size() == con.size(), "reduction initial guess");
    w_ = con.linear_term();
    if (!con.is_linear()) axpy(2.0, con.matrix().multiply(x0), w_);
    reduced_.g0 = spk::evaluate(con, x0);
    reduced_.scale = con.scale();
  }

  Index columns() const { return reduced_.g.size(); }

  // Processes every column of `basis` beyond those already reduced.
  void update(std::span<const Vector> basis) {
    const Index old = columns();
    if (basis.size() <= old) return;
    const Index ell = basis.size();
    const bool quad = !con_->is_linear();
    if (quad) reduced_.G.resize(ell, ell);
    for (Index k = old; k < ell; ++k) {
      const Vector& zk = basis[k];
      detail::require_dims(zk.size() == con_->size(), "reduction basis column");
      reduced_.g.push_back(dot(zk, w_));
      if (!quad) continue;
      const Vector mz = con_->matrix().multiply(zk);
      for (Index i = 0; i <= k; ++i) {
        const double gik = dot(basis[i], mz);
        reduced_.G(i, k) = gik;
        reduced_.G(k, i) = gik;
      }
    }
  }

  const ReducedConstraint& reduced() const { return reduced_; }

 private:
  const QuadraticConstraint* con_;
  Vector w_;  // (M + M^T) x0 + v
  ReducedConstraint reduced_;
};

// Batch reduction against a dense basis Z (columns are basis vectors).
inline ReducedConstraint reduce(const QuadraticConstraint& con, std::span<const double> x0, const DenseMatrix& z) {
  detail::require_dims(x0.size() == con.size() && z.rows() == con.size(), "reduce");
  const Index n = z.rows(), ell = z.cols();
  ReducedConstraint r;
  r.g0 = evaluate(con, x0);
  r.scale = con.scale();
  Vector w = con.linear_term();
  if (!con.is_linear()) axpy(2.0, con.matrix().multiply(x0), w);
  r.g = z.multiply_transpose(w);
  if (!con.is_linear() && ell > 0) {
    DenseMatrix mz(n, ell);
    for (Index j = 0; j < ell; ++j) {
      const Vector col = con.matrix().multiply(z.column(j));
      for (Index i = 0; i < n; ++i) mz(i, j) = col[i];
    }
    r.G = z.transpose().multiply(mz);
  }
  return r;
}

// Constraint on stacked stage vectors x = [x|1; ...; x|s] equivalent to
// evaluating `con` at z_n + dt * sum_i b_i x|i.
inline QuadraticConstraint lift_through_affine(const QuadraticConstraint& con, std::span<const double> z_n, double dt,
                                               std::span<const double> weights, Index stages) {
  const Index d = con.size();
  detail::require_dims(z_n.size() == d && weights.size() == stages && stages > 0, "lift_through_affine");
  DenseMatrix bbt(stages, stages);
  for (Index i = 0; i < stages; ++i)
    for (Index j = 0; j < stages; ++j) bbt(i, j) = dt * dt * weights[i] * weights[j];
  SparseMatrix m = con.is_linear() ? SparseMatrix::zero(d * stages, d * stages) : kron(bbt, con.matrix());

  Vector w = con.linear_term();
  if (!con.is_linear()) axpy(2.0, con.matrix().multiply(z_n), w);
  Vector v(d * stages);
  for (Index i = 0; i < stages; ++i)
    for (Index k = 0; k < d; ++k) v[i * d + k] = dt * weights[i] * w[k];

  return QuadraticConstraint(m, std::move(v), evaluate(con, z_n), con.label(), con.scale());
}

}  // namespace spk
