#pragma once

// Small dense and CSR sparse linear algebra used throughout the library.
//
// Vectors are plain std::vector<double>; read-only arguments are taken as
// std::span<const double> so that matrix columns and sub-blocks can be passed
// without copying.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "spk/error.hpp"

namespace spk {

using Vector = std::vector<double>;
using Index = std::size_t;

// ---------------------------------------------------------------------------
// Vector kernels

inline double dot(std::span<const double> x, std::span<const double> y) {
  detail::require_dims(x.size() == y.size(), "dot");
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) {
  // Scaled accumulation so that very large or very small entries do not
  // overflow or underflow the sum of squares.
  double scale = 0.0, ssq = 1.0;
  for (double v : x) {
    if (v == 0.0) continue;
    const double a = std::abs(v);
    if (scale < a) {
      ssq = 1.0 + ssq * (scale / a) * (scale / a);
      scale = a;
    } else {
      ssq += (a / scale) * (a / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  detail::require_dims(x.size() == y.size(), "axpy");
  for (Index i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

inline Vector add(std::span<const double> x, std::span<const double> y) {
  detail::require_dims(x.size() == y.size(), "add");
  Vector r(x.begin(), x.end());
  for (Index i = 0; i < r.size(); ++i) r[i] += y[i];
  return r;
}

inline Vector subtract(std::span<const double> x, std::span<const double> y) {
  detail::require_dims(x.size() == y.size(), "subtract");
  Vector r(x.begin(), x.end());
  for (Index i = 0; i < r.size(); ++i) r[i] -= y[i];
  return r;
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Dense matrices (row-major)

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(Index rows, Index cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(Index n) {
    DenseMatrix m(n, n);
    for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  // Row-major initialisation, mostly for tests: {{1, 2}, {3, 4}}.
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const Index r = rows.size();
    const Index c = r == 0 ? 0 : rows.front().size();
    DenseMatrix m(r, c);
    for (Index i = 0; i < r; ++i) {
      detail::require_dims(rows[i].size() == c, "ragged row list");
      for (Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(Index i, Index j) { return data_[i * cols_ + j]; }
  double operator()(Index i, Index j) const { return data_[i * cols_ + j]; }

  std::span<double> row(Index i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(Index i) const { return {data_.data() + i * cols_, cols_}; }

  Vector column(Index j) const {
    Vector c(rows_);
    for (Index i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Vector multiply(std::span<const double> x) const {
    detail::require_dims(x.size() == cols_, "dense matvec");
    Vector y(rows_, 0.0);
    for (Index i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      double s = 0.0;
      for (Index j = 0; j < cols_; ++j) s += r[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  // y = A^T x
  Vector multiply_transpose(std::span<const double> x) const {
    detail::require_dims(x.size() == rows_, "dense transpose matvec");
    Vector y(cols_, 0.0);
    for (Index i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      for (Index j = 0; j < cols_; ++j) y[j] += r[j] * x[i];
    }
    return y;
  }

  DenseMatrix multiply(const DenseMatrix& b) const {
    detail::require_dims(cols_ == b.rows_, "dense matmul");
    DenseMatrix c(rows_, b.cols_);
    for (Index i = 0; i < rows_; ++i)
      for (Index k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (Index j = 0; j < b.cols_; ++j) c(i, j) += a * b(k, j);
      }
    return c;
  }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (Index i = 0; i < rows_; ++i)
      for (Index j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const { return spk::norm_inf(data_); }

  double norm_inf() const {
    double m = 0.0;
    for (Index i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (double v : row(i)) s += std::abs(v);
      m = std::max(m, s);
    }
    return m;
  }

  // Grow to (rows, cols), keeping existing entries in place.
  void resize(Index rows, Index cols) {
    if (cols == cols_) {
      data_.resize(rows * cols, 0.0);
      rows_ = rows;
      return;
    }
    std::vector<double> next(rows * cols, 0.0);
    for (Index i = 0; i < std::min(rows, rows_); ++i)
      for (Index j = 0; j < std::min(cols, cols_); ++j) next[i * cols + j] = (*this)(i, j);
    data_ = std::move(next);
    rows_ = rows;
    cols_ = cols;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Compressed sparse row matrices

struct Triplet {
  Index row;
  Index col;
  double value;
};

class SparseMatrix {
 public:
  SparseMatrix() : row_ptr_(1, 0) {}

  // Builds a CSR matrix from (row, col, value) triplets. Duplicate entries are
  // summed; column indices are sorted within each row.
  SparseMatrix(Index rows, Index cols, std::vector<Triplet> triplets)
      : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols)
        throw DimensionMismatch("sparse triplet outside matrix bounds");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    col_idx_.reserve(triplets.size());
    values_.reserve(triplets.size());
    for (Index k = 0; k < triplets.size();) {
      const Index r = triplets[k].row, c = triplets[k].col;
      double v = 0.0;
      while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) v += triplets[k++].value;
      col_idx_.push_back(c);
      values_.push_back(v);
      ++row_ptr_[r + 1];
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
  }

  // Takes raw CSR arrays; validates the structural invariants.
  SparseMatrix(Index rows, Index cols, std::vector<Index> row_ptr, std::vector<Index> col_idx,
               std::vector<double> values)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    validate();
  }

  static SparseMatrix identity(Index n) { return diagonal_matrix(Vector(n, 1.0)); }

  static SparseMatrix diagonal_matrix(std::span<const double> d) {
    std::vector<Triplet> t;
    t.reserve(d.size());
    for (Index i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return SparseMatrix(d.size(), d.size(), std::move(t));
  }

  static SparseMatrix zero(Index rows, Index cols) { return SparseMatrix(rows, cols, {}); }

  static SparseMatrix from_dense(const DenseMatrix& d, double drop = 0.0) {
    std::vector<Triplet> t;
    for (Index i = 0; i < d.rows(); ++i)
      for (Index j = 0; j < d.cols(); ++j)
        if (std::abs(d(i, j)) > drop) t.push_back({i, j, d(i, j)});
    return SparseMatrix(d.rows(), d.cols(), std::move(t));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return values_.size(); }

  std::span<const Index> row_ptr() const { return row_ptr_; }
  std::span<const Index> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  void multiply(std::span<const double> x, std::span<double> y) const {
    detail::require_dims(x.size() == cols_ && y.size() == rows_, "spmv");
    for (Index i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[i] = s;
    }
  }

  Vector multiply(std::span<const double> x) const {
    Vector y(rows_);
    multiply(x, y);
    return y;
  }

  // Entry lookup by binary search within the row; zero if structurally absent.
  double at(Index i, Index j) const {
    const auto b = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto e = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return values_[static_cast<Index>(it - col_idx_.begin())];
  }

  Vector diagonal() const {
    Vector d(std::min(rows_, cols_), 0.0);
    for (Index i = 0; i < d.size(); ++i) d[i] = at(i, i);
    return d;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (Index i = 0; i < rows_; ++i)
      for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({i, col_idx_[k], values_[k]});
    return t;
  }

  SparseMatrix transpose() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (Index i = 0; i < rows_; ++i)
      for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({col_idx_[k], i, values_[k]});
    return SparseMatrix(cols_, rows_, std::move(t));
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (Index i = 0; i < rows_; ++i)
      for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d(i, col_idx_[k]) += values_[k];
    return d;
  }

  SparseMatrix scaled(double alpha) const {
    SparseMatrix s = *this;
    for (double& v : s.values_) v *= alpha;
    return s;
  }

  double norm_inf() const {
    double m = 0.0;
    for (Index i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += std::abs(values_[k]);
      m = std::max(m, s);
    }
    return m;
  }

  double max_abs() const { return spk::norm_inf(values_); }

 private:
  void validate() const {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() ||
        col_idx_.size() != values_.size())
      throw DimensionMismatch("malformed CSR arrays");
    for (Index i = 0; i < rows_; ++i) {
      if (row_ptr_[i] > row_ptr_[i + 1]) throw DimensionMismatch("row_ptr must be nondecreasing");
      for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        if (col_idx_[k] >= cols_) throw DimensionMismatch("column index out of bounds");
        if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
          throw DimensionMismatch("column indices must be strictly increasing within a row");
      }
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_;
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

inline Vector spmv(const SparseMatrix& a, std::span<const double> x) { return a.multiply(x); }

// alpha*A + beta*B
inline SparseMatrix linear_combination(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
  detail::require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "sparse linear combination");
  auto ta = a.triplets();
  for (auto& t : ta) t.value *= alpha;
  for (auto t : b.triplets()) {
    t.value *= beta;
    ta.push_back(t);
  }
  return SparseMatrix(a.rows(), a.cols(), std::move(ta));
}

// (M + M^T) / 2
inline SparseMatrix symmetric_part(const SparseMatrix& m) {
  detail::require_dims(m.rows() == m.cols(), "symmetric part of non-square matrix");
  return linear_combination(0.5, m, 0.5, m.transpose());
}

// Collects triplets for a matrix assembled from blocks at row/column offsets.
class BlockAssembler {
 public:
  BlockAssembler(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  void add(Index r, Index c, double v) {
    if (v != 0.0) triplets_.push_back({r, c, v});
  }

  void add_block(Index row_offset, Index col_offset, const SparseMatrix& block, double factor = 1.0) {
    detail::require_dims(row_offset + block.rows() <= rows_ && col_offset + block.cols() <= cols_,
                         "block placement");
    if (factor == 0.0) return;
    for (const auto& t : block.triplets())
      triplets_.push_back({row_offset + t.row, col_offset + t.col, factor * t.value});
  }

  SparseMatrix build() && { return SparseMatrix(rows_, cols_, std::move(triplets_)); }

 private:
  Index rows_, cols_;
  std::vector<Triplet> triplets_;
};

// kron(K, B) for a small dense K and sparse B.
inline SparseMatrix kron(const DenseMatrix& k, const SparseMatrix& b) {
  BlockAssembler out(k.rows() * b.rows(), k.cols() * b.cols());
  for (Index i = 0; i < k.rows(); ++i)
    for (Index j = 0; j < k.cols(); ++j)
      if (k(i, j) != 0.0) out.add_block(i * b.rows(), j * b.cols(), b, k(i, j));
  return std::move(out).build();
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting

class DenseLu {
 public:
  // Throws SingularMatrix when a pivot falls below 1e-14 relative to the
  // largest entry of the matrix.
  explicit DenseLu(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    detail::require_dims(lu_.rows() == lu_.cols(), "LU of non-square matrix");
    const Index n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), Index{0});
    const double tiny = 1e-14 * std::max(lu_.max_abs(), 1e-300);
    for (Index k = 0; k < n; ++k) {
      Index p = k;
      double best = std::abs(lu_(k, k));
      for (Index i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > best) best = std::abs(lu_(i, k)), p = i;
      if (!(best > tiny)) throw SingularMatrix("dense LU: pivot below threshold");
      if (p != k) {
        std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
        std::swap(perm_[k], perm_[p]);
      }
      const double inv = 1.0 / lu_(k, k);
      for (Index i = k + 1; i < n; ++i) {
        double& lik = lu_(i, k);
        if (lik == 0.0) continue;
        lik *= inv;
        double* ri = lu_.row(i).data();
        const double* rk = lu_.row(k).data();
        for (Index j = k + 1; j < n; ++j) ri[j] -= lik * rk[j];
      }
    }
  }

  explicit DenseLu(const SparseMatrix& a) : DenseLu(a.to_dense()) {}

  Index size() const { return lu_.rows(); }

  Vector solve(std::span<const double> b) const {
    const Index n = lu_.rows();
    detail::require_dims(b.size() == n, "LU solve");
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (Index i = 0; i < n; ++i) {
      const double* ri = lu_.row(i).data();
      double s = x[i];
      for (Index j = 0; j < i; ++j) s -= ri[j] * x[j];
      x[i] = s;
    }
    for (Index i = n; i-- > 0;) {
      const double* ri = lu_.row(i).data();
      double s = x[i];
      for (Index j = i + 1; j < n; ++j) s -= ri[j] * x[j];
      x[i] = s / ri[i];
    }
    return x;
  }

 private:
  DenseMatrix lu_;
  std::vector<Index> perm_;
};

inline Vector dense_lu_solve(const DenseMatrix& a, std::span<const double> b) { return DenseLu(a).solve(b); }

// ---------------------------------------------------------------------------
// Householder QR least squares

struct LeastSquaresResult {
  Vector y;
  double residual_norm = 0.0;
};

class HouseholderQr {
 public:
  // Factorises an m x n matrix with m >= n. Throws RankDeficient when a
  // diagonal entry of R is negligible relative to the largest one.
  explicit HouseholderQr(const DenseMatrix& a) : qr_(a), tau_(a.cols(), 0.0) {
    const Index m = qr_.rows(), n = qr_.cols();
    detail::require_dims(m >= n, "least squares needs rows >= cols");
    double rmax = 0.0;
    for (Index k = 0; k < n; ++k) {
      double alpha = 0.0;
      {
        Vector col(m - k);
        for (Index i = k; i < m; ++i) col[i - k] = qr_(i, k);
        alpha = norm2(col);
      }
      if (alpha == 0.0) throw RankDeficient("least squares: zero column in elimination");
      if (qr_(k, k) > 0) alpha = -alpha;
      // v = x - alpha e1, stored below the diagonal with v_k implicit.
      const double vk = qr_(k, k) - alpha;
      for (Index i = k + 1; i < m; ++i) qr_(i, k) /= vk;
      tau_[k] = -vk / alpha;
      qr_(k, k) = alpha;
      for (Index j = k + 1; j < n; ++j) {
        double s = qr_(k, j);
        for (Index i = k + 1; i < m; ++i) s += qr_(i, k) * qr_(i, j);
        s *= tau_[k];
        qr_(k, j) -= s;
        for (Index i = k + 1; i < m; ++i) qr_(i, j) -= s * qr_(i, k);
      }
      rmax = std::max(rmax, std::abs(alpha));
    }
    for (Index k = 0; k < n; ++k)
      if (std::abs(qr_(k, k)) <= 1e-14 * rmax) throw RankDeficient("least squares: rank-deficient matrix");
  }

  Index rows() const { return qr_.rows(); }
  Index cols() const { return qr_.cols(); }

  // Q^T b
  Vector apply_qt(std::span<const double> b) const {
    const Index m = qr_.rows(), n = qr_.cols();
    detail::require_dims(b.size() == m, "Q^T b");
    Vector c(b.begin(), b.end());
    for (Index k = 0; k < n; ++k) {
      double s = c[k];
      for (Index i = k + 1; i < m; ++i) s += qr_(i, k) * c[i];
      s *= tau_[k];
      c[k] -= s;
      for (Index i = k + 1; i < m; ++i) c[i] -= s * qr_(i, k);
    }
    return c;
  }

  LeastSquaresResult solve(std::span<const double> b) const {
    const Index m = qr_.rows(), n = qr_.cols();
    Vector c = apply_qt(b);
    LeastSquaresResult out;
    out.y.assign(n, 0.0);
    for (Index i = n; i-- > 0;) {
      double s = c[i];
      for (Index j = i + 1; j < n; ++j) s -= qr_(i, j) * out.y[j];
      out.y[i] = s / qr_(i, i);
    }
    out.residual_norm = norm2(std::span<const double>(c).subspan(n, m - n));
    return out;
  }

  // ||b - A y|| evaluated through the factorisation (accurate for small residuals).
  double residual_norm(std::span<const double> b, std::span<const double> y) const {
    const Index m = qr_.rows(), n = qr_.cols();
    detail::require_dims(y.size() == n, "QR residual");
    Vector c = apply_qt(b);
    for (Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Index j = i; j < n; ++j) s += qr_(i, j) * y[j];
      c[i] -= s;
    }
    (void)m;
    return norm2(c);
  }

  // Upper-triangular factor R (n x n).
  DenseMatrix r() const {
    const Index n = qr_.cols();
    DenseMatrix r(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = i; j < n; ++j) r(i, j) = qr_(i, j);
    return r;
  }

 private:
  DenseMatrix qr_;
  Vector tau_;
};

inline LeastSquaresResult qr_lstsq(const DenseMatrix& a, std::span<const double> b) {
  return HouseholderQr(a).solve(b);
}

}  // namespace spk
