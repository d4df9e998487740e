#pragma once

// Dense symmetric linear algebra for the PSD handling of the Type-3 bounds:
// Jacobi eigensolver, Cholesky, diagonal-dominance test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "ddro/errors.hpp"

namespace ddro {

namespace linalg_tol {
inline constexpr double kEigResidual = 1e-9;
inline constexpr double kCholeskyClamp = 1e-12;
inline constexpr int kMaxJacobiSweeps = 100;
}  // namespace linalg_tol

// Square matrix stored row-major. Used for factors and generic products.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Symmetric n x n matrix. Writes through set() keep both triangles equal.
class SymMatrix {
 public:
  SymMatrix() : SymMatrix(1) {}
  explicit SymMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {
    if (n == 0) throw ValidationError("SymMatrix dimension must be >= 1");
  }

  // Rejects input whose triangles differ by more than 1e-12 relative, then
  // stores the exact average.
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
      : SymMatrix(rows.size()) {
    std::size_t i = 0;
    for (const auto& r : rows) {
      if (r.size() != n_) throw ValidationError("SymMatrix rows must be square");
      std::size_t j = 0;
      for (double v : r) data_[i * n_ + j++] = v;
      ++i;
    }
    symmetrize_checked();
  }

  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    SymMatrix m(rows.size());
    for (std::size_t i = 0; i < m.n_; ++i) {
      if (rows[i].size() != m.n_) throw ValidationError("SymMatrix rows must be square");
      for (std::size_t j = 0; j < m.n_; ++j) m.data_[i * m.n_ + j] = rows[i][j];
    }
    m.symmetrize_checked();
    return m;
  }

  static SymMatrix identity(std::size_t n) {
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
  }

  std::size_t n() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }

  double norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  double trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, i);
    return s;
  }

  SymMatrix scaled(double a) const {
    SymMatrix m = *this;
    for (double& v : m.data_) v *= a;
    return m;
  }

  double quad_form(std::span<const double> v) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) s += v[i] * (*this)(i, j) * v[j];
    return s;
  }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out[i][j] = (*this)(i, j);
    return out;
  }

  DenseMatrix dense() const {
    DenseMatrix d(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) d(i, j) = (*this)(i, j);
    return d;
  }

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  void symmetrize_checked() {
    const double scale = std::max(1.0, norm_inf());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double a = data_[i * n_ + j];
        const double b = data_[j * n_ + i];
        if (std::abs(a - b) > 1e-12 * scale) throw ValidationError("matrix is not symmetric");
        set(i, j, 0.5 * (a + b));
      }
  }

  std::size_t n_;
  std::vector<double> data_;
};

struct EigenPair {
  double value;
  std::vector<double> vector;
};

// Cyclic Jacobi with threshold sweeps. Returns pairs sorted ascending by value.
inline std::vector<EigenPair> sym_eig(const SymMatrix& m) {
  const std::size_t n = m.n();
  DenseMatrix a = m.dense();
  DenseMatrix v = DenseMatrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += a(i, j) * a(i, j);
  total = std::sqrt(total);

  for (int sweep = 0; sweep < linalg_tol::kMaxJacobiSweeps; ++sweep) {
    const double off = off_norm();
    if (off <= 1e-15 * total || off == 0.0) break;
    // Early sweeps skip rotations on already-small entries.
    const double threshold = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= threshold || apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<EigenPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].value = a(i, i);
    out[i].vector.resize(n);
    for (std::size_t k = 0; k < n; ++k) out[i].vector[k] = v(k, i);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EigenPair& x, const EigenPair& y) { return x.value < y.value; });
  return out;
}

inline double min_eigenvalue(const SymMatrix& m) { return sym_eig(m).front().value; }

inline bool is_psd(const SymMatrix& m, double tol) { return min_eigenvalue(m) >= -tol; }

// Lower-triangular L with m = L L^T. Pivots in [-1e-12, 0] are clamped to zero.
inline DenseMatrix cholesky(const SymMatrix& m) {
  const std::size_t n = m.n();
  const double scale = std::max(1.0, m.norm_inf());
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d < -linalg_tol::kCholeskyClamp) throw NotPsd("cholesky: negative pivot");
    const double ljj = d > 0.0 ? std::sqrt(d) : 0.0;
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (ljj > 0.0) {
        l(i, j) = s / ljj;
      } else if (std::abs(s) > 1e-9 * scale) {
        throw NotPsd("cholesky: zero pivot with nonzero off-diagonal");
      }
    }
  }
  return l;
}

// Exact test of a_ii >= sum_{j != i} |a_ij|.
inline bool is_dd(const SymMatrix& m) {
  for (std::size_t i = 0; i < m.n(); ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < m.n(); ++j)
      if (j != i) off += std::abs(m(i, j));
    if (m(i, i) < off) return false;
  }
  return true;
}

// Solves m x = b for symmetric positive definite m via its Cholesky factor.
inline std::vector<double> spd_solve(const SymMatrix& m, std::span<const double> b) {
  const DenseMatrix l = cholesky(m);
  const std::size_t n = m.n();
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    if (l(i, i) == 0.0) throw NotPsd("spd_solve: singular matrix");
    y[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

// 1-norm condition estimate via explicit inverse; fine at the sizes used here.
inline double condition_estimate(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  DenseMatrix lu = a;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  DenseMatrix inv = DenseMatrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(lu(r, c)) > std::abs(lu(piv, c))) piv = r;
    if (std::abs(lu(piv, c)) < 1e-300) return INFINITY;
    if (piv != c)
      for (std::size_t k = 0; k < n; ++k) {
        std::swap(lu(piv, k), lu(c, k));
        std::swap(inv(piv, k), inv(c, k));
      }
    const double d = lu(c, c);
    for (std::size_t k = 0; k < n; ++k) {
      lu(c, k) /= d;
      inv(c, k) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = lu(r, c);
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        lu(r, k) -= f * lu(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  auto norm1 = [n](const DenseMatrix& m) {
    double best = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::abs(m(i, j));
      best = std::max(best, s);
    }
    return best;
  };
  return norm1(a) * norm1(inv);
}

}  // namespace ddro
