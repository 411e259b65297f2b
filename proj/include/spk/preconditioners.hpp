#pragma once

// Right preconditioners for the flexible Krylov solvers. Any type with
//   Vector apply(std::span<const double>) const
// can be used; `Preconditioner` is a type-erased handle for runtime choice.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <memory>
#include <queue>
#include <string>

#include "spk/linalg.hpp"

namespace spk {

template <class P>
concept PreconditionerLike = requires(const P& p, std::span<const double> x) {
  { p.apply(x) } -> std::convertible_to<Vector>;
};

class IdentityPreconditioner {
 public:
  Vector apply(std::span<const double> x) const { return Vector(x.begin(), x.end()); }
};

class JacobiPreconditioner {
 public:
  explicit JacobiPreconditioner(const SparseMatrix& a) {
    detail::require_dims(a.rows() == a.cols(), "Jacobi on non-square matrix");
    inv_diag_ = a.diagonal();
    for (double& d : inv_diag_) {
      if (d == 0.0) throw FactorisationFailure("Jacobi: zero diagonal entry");
      d = 1.0 / d;
    }
  }

  Vector apply(std::span<const double> x) const {
    detail::require_dims(x.size() == inv_diag_.size(), "Jacobi apply");
    Vector y(x.size());
    for (Index i = 0; i < x.size(); ++i) y[i] = x[i] * inv_diag_[i];
    return y;
  }

 private:
  Vector inv_diag_;
};

// Exact solve through a dense LU factorisation; only sensible for small
// systems (tests, reference runs).
class DenseLuPreconditioner {
 public:
  explicit DenseLuPreconditioner(const SparseMatrix& a) : lu_(std::make_shared<DenseLu>(a)) {}
  Vector apply(std::span<const double> x) const { return lu_->solve(x); }

 private:
  std::shared_ptr<const DenseLu> lu_;
};

// Row-wise threshold incomplete LU (ILUT) without pivoting.
//
// Entries of the working row smaller than drop_tol * ||a_i||_2 are discarded;
// of the survivors, each of the strict-lower and strict-upper parts keeps at
// most floor(fill_factor * count in a_i) of its largest entries. The diagonal
// is always kept. A pivot below 1e-14 * ||A||_inf is shifted by
// 1e-10 * ||A||_inf; if it is still below 1e-14 the factorisation fails.
class IlutPreconditioner {
 public:
  IlutPreconditioner(const SparseMatrix& a, double drop_tol, double fill_factor) {
    detail::require_dims(a.rows() == a.cols(), "ILUT on non-square matrix");
    if (!(drop_tol >= 0.0) || !(fill_factor > 0.0))
      throw FactorisationFailure("ILUT: drop_tol must be >= 0 and fill_factor > 0");
    factor(a, drop_tol, fill_factor);
  }

  Index size() const { return n_; }
  Index nnz() const { return l_vals_.size() + u_vals_.size() + n_; }

  Vector apply(std::span<const double> b) const {
    detail::require_dims(b.size() == n_, "ILUT apply");
    Vector x(b.begin(), b.end());
    for (Index i = 0; i < n_; ++i) {
      double s = x[i];
      for (Index k = l_ptr_[i]; k < l_ptr_[i + 1]; ++k) s -= l_vals_[k] * x[l_cols_[k]];
      x[i] = s;
    }
    for (Index i = n_; i-- > 0;) {
      double s = x[i];
      for (Index k = u_ptr_[i]; k < u_ptr_[i + 1]; ++k) s -= u_vals_[k] * x[u_cols_[k]];
      x[i] = s / diag_[i];
    }
    return x;
  }

 private:
  static Index cap(double fill_factor, Index original) {
    if (std::isinf(fill_factor)) return std::numeric_limits<Index>::max();
    return static_cast<Index>(std::floor(fill_factor * static_cast<double>(original)));
  }

  void factor(const SparseMatrix& a, double drop_tol, double fill_factor) {
    n_ = a.rows();
    const double anorm = std::max(a.norm_inf(), std::numeric_limits<double>::min());
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto va = a.values();

    l_ptr_.assign(1, 0);
    u_ptr_.assign(1, 0);
    diag_.assign(n_, 0.0);

    Vector w(n_, 0.0);
    std::vector<char> used(n_, 0);
    std::vector<Index> pattern;
    std::priority_queue<Index, std::vector<Index>, std::greater<>> lower;

    for (Index i = 0; i < n_; ++i) {
      pattern.clear();
      Index orig_lower = 0, orig_upper = 0;
      double rownorm = 0.0;
      for (Index k = rp[i]; k < rp[i + 1]; ++k) {
        const Index j = ci[k];
        w[j] = va[k];
        used[j] = 1;
        pattern.push_back(j);
        rownorm += va[k] * va[k];
        if (j < i) {
          lower.push(j);
          ++orig_lower;
        } else if (j > i) {
          ++orig_upper;
        }
      }
      if (!used[i]) {
        used[i] = 1;
        w[i] = 0.0;
        pattern.push_back(i);
      }
      const double tau = drop_tol * std::sqrt(rownorm);

      while (!lower.empty()) {
        const Index k = lower.top();
        lower.pop();
        if (w[k] == 0.0) continue;
        w[k] /= diag_[k];
        if (std::abs(w[k]) <= tau) {
          w[k] = 0.0;
          continue;
        }
        const double lik = w[k];
        for (Index p = u_ptr_[k]; p < u_ptr_[k + 1]; ++p) {
          const Index j = u_cols_[p];
          if (!used[j]) {
            used[j] = 1;
            w[j] = 0.0;
            pattern.push_back(j);
            if (j < i) lower.push(j);
          }
          w[j] -= lik * u_vals_[p];
        }
      }

      std::vector<std::pair<Index, double>> lpart, upart;
      for (Index j : pattern) {
        const double v = w[j];
        if (j != i && std::abs(v) > tau && v != 0.0) (j < i ? lpart : upart).push_back({j, v});
      }
      keep_largest(lpart, cap(fill_factor, orig_lower));
      keep_largest(upart, cap(fill_factor, orig_upper));

      double pivot = w[i];
      if (std::abs(pivot) < 1e-14 * anorm) pivot += (pivot < 0.0 ? -1.0 : 1.0) * 1e-10 * anorm;
      if (std::abs(pivot) < 1e-14) throw FactorisationFailure("ILUT: zero pivot");
      diag_[i] = pivot;

      for (const auto& [j, v] : lpart) {
        l_cols_.push_back(j);
        l_vals_.push_back(v);
      }
      for (const auto& [j, v] : upart) {
        u_cols_.push_back(j);
        u_vals_.push_back(v);
      }
      l_ptr_.push_back(l_cols_.size());
      u_ptr_.push_back(u_cols_.size());

      for (Index j : pattern) {
        used[j] = 0;
        w[j] = 0.0;
      }
    }
  }

  static void keep_largest(std::vector<std::pair<Index, double>>& part, Index count) {
    if (part.size() > count) {
      std::nth_element(part.begin(), part.begin() + static_cast<std::ptrdiff_t>(count), part.end(),
                       [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
      part.resize(count);
    }
    std::sort(part.begin(), part.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  Index n_ = 0;
  std::vector<Index> l_ptr_, l_cols_, u_ptr_, u_cols_;
  Vector l_vals_, u_vals_, diag_;
};

inline IlutPreconditioner ilu_factor(const SparseMatrix& a, double drop_tol, double fill_factor) {
  return IlutPreconditioner(a, drop_tol, fill_factor);
}

inline JacobiPreconditioner jacobi(const SparseMatrix& a) { return JacobiPreconditioner(a); }

// Type-erased preconditioner handle. Copies share the underlying factors.
class Preconditioner {
 public:
  Preconditioner() : Preconditioner(IdentityPreconditioner{}, "none") {}

  template <PreconditionerLike P>
  Preconditioner(P p, std::string name = "custom")
      : impl_(std::make_shared<Model<P>>(std::move(p))), name_(std::move(name)) {}

  Vector apply(std::span<const double> x) const { return impl_->apply(x); }
  const std::string& name() const { return name_; }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual Vector apply(std::span<const double> x) const = 0;
  };
  template <class P>
  struct Model final : Concept {
    explicit Model(P p) : p(std::move(p)) {}
    Vector apply(std::span<const double> x) const override { return p.apply(x); }
    P p;
  };

  std::shared_ptr<const Concept> impl_;
  std::string name_;
};

}  // namespace spk
