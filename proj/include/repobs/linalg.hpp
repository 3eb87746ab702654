#pragma once

// Small dense linear algebra: just what the optimizers and models need.
// Symmetric eigenproblems use cyclic Jacobi, the generalized SPD problem is
// reduced through a Cholesky factor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "repobs/error.hpp"

namespace repobs {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double value = 0.0) : data_(n, value) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  static Vector ones(std::size_t n) { return Vector(n, 1.0); }
  static Vector unit(std::size_t n, std::size_t i) {
    Vector e(n);
    e[i] = 1.0;
    return e;
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  Vector& operator+=(const Vector& o) {
    check_same(o);
    for (std::size_t i = 0; i < size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    check_same(o);
    for (std::size_t i = 0; i < size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vector& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(Vector a, double s) { return a *= s; }
  friend Vector operator*(double s, Vector a) { return a *= s; }
  friend Vector operator-(Vector a) { return a *= -1.0; }
  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  void check_same(const Vector& o) const {
    require(o.size() == size(), ErrorKind::dimension,
            "vector sizes " + std::to_string(size()) + " and " + std::to_string(o.size()));
  }

  std::vector<double> data_;
};

inline double dot(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::dimension, "dot product of mismatched vectors");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double squared_norm(const Vector& a) { return dot(a, a); }
inline double norm(const Vector& a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::dimension, "distance between mismatched vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      require(r.size() == cols_, ErrorKind::dimension, "ragged matrix initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// Columns given as vectors of equal length.
  static Matrix from_columns(const std::vector<Vector>& columns) {
    require(!columns.empty(), ErrorKind::dimension, "no columns");
    Matrix m(columns.front().size(), columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      require(columns[j].size() == m.rows(), ErrorKind::dimension, "ragged columns");
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = columns[j][i];
    }
    return m;
  }

  static Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> data() const noexcept { return data_; }

  Vector column(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  void set_column(std::size_t j, const Vector& c) {
    require(c.size() == rows_, ErrorKind::dimension, "column length");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
  }

  /// First `n` columns.
  Matrix left_columns(std::size_t n) const {
    require(n <= cols_, ErrorKind::dimension, "too many columns requested");
    Matrix m(rows_, n);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Matrix& operator+=(const Matrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    require(a.cols_ == b.rows_, ErrorKind::dimension, "matrix product shapes");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend Vector operator*(const Matrix& a, const Vector& x) {
    require(a.cols_ == x.size(), ErrorKind::dimension, "matrix-vector shapes");
    Vector y(a.rows_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

 private:
  void check_same(const Matrix& o) const {
    require(o.rows_ == rows_ && o.cols_ == cols_, ErrorKind::dimension, "matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Aᵀx without forming the transpose.
inline Vector transpose_times(const Matrix& a, const Vector& x) {
  require(a.rows() == x.size(), ErrorKind::dimension, "transpose-vector shapes");
  Vector y(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += a(i, j) * x[i];
  return y;
}

inline double trace(const Matrix& m) {
  require(m.square(), ErrorKind::dimension, "trace of non-square matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, i);
  return s;
}

/// (x, m x)
inline double quadratic_form(const Matrix& m, const Vector& x) { return dot(x, m * x); }

/// Aᵀ M A
inline Matrix congruence(const Matrix& a, const Matrix& m) { return a.transpose() * (m * a); }

/// tr(Aᵀ M A) computed as the sum of (a_i, M a_i) over columns.
inline double trace_congruence(const Matrix& a, const Matrix& m) {
  require(m.square() && m.rows() == a.rows(), ErrorKind::dimension, "trace_congruence shapes");
  double s = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) s += quadratic_form(m, a.column(j));
  return s;
}

inline double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

inline bool is_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

inline bool is_finite(const Vector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr int kJacobiMaxSweeps = 100;

/// Returns (m + mᵀ)/2, or throws when m is not symmetric to relative
/// tolerance `tol` (relative to the largest entry).
inline Matrix symmetrized(const Matrix& m, double tol = kSymmetryTolerance) {
  require(m.square(), ErrorKind::dimension, "symmetric matrix must be square");
  const double scale = std::max(1.0, m.max_abs());
  Matrix s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > tol * scale)
        fail(ErrorKind::symmetry, "entries (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") and its transpose differ");
      s(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
  return s;
}

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline EigenDecomposition sym_eig(const Matrix& input) {
  Matrix a = symmetrized(input);
  const std::size_t n = a.rows();
  require(n >= 1, ErrorKind::dimension, "empty matrix");
  Matrix v = Matrix::identity(n);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  const double scale = std::max(frobenius_norm(a), std::numeric_limits<double>::min());
  int sweep = 0;
  while (off_diagonal() > 1e-15 * scale) {
    if (++sweep > kJacobiMaxSweeps)
      fail(ErrorKind::convergence, "Jacobi eigensolver exceeded " + std::to_string(kJacobiMaxSweeps) +
                                       " sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
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

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// Lower-triangular L with L Lᵀ = m.
inline Matrix cholesky(const Matrix& input) {
  const Matrix m = symmetrized(input);
  const std::size_t n = m.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
  // Pivots this small relative to the diagonal are rounding noise on a
  // singular matrix.
  const double pivot_floor = 1e-14 * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > pivot_floor))
      fail(ErrorKind::definiteness, "matrix is not positive definite (pivot " + std::to_string(j) + ")");
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Solves L y = b for lower-triangular L.
inline Vector forward_substitute(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  require(b.size() == n, ErrorKind::dimension, "forward substitution shapes");
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

/// Solves Lᵀ x = y for lower-triangular L.
inline Vector backward_substitute_transposed(const Matrix& l, const Vector& y) {
  const std::size_t n = l.rows();
  require(y.size() == n, ErrorKind::dimension, "backward substitution shapes");
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

inline Vector cholesky_solve(const Matrix& l, const Vector& rhs) {
  return backward_substitute_transposed(l, forward_substitute(l, rhs));
}

inline Vector solve_spd(const Matrix& m, const Vector& rhs) {
  require(m.rows() == rhs.size(), ErrorKind::dimension, "solve_spd right-hand side length");
  return cholesky_solve(cholesky(m), rhs);
}

inline double log_det_from_cholesky(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

/// Generalized symmetric-definite eigenproblem b v = λ w v.
/// Eigenvectors are w-orthonormal: Vᵀ w V = I and Vᵀ b V = diag(λ).
inline EigenDecomposition gen_eig_spd(const Matrix& b, const Matrix& w) {
  const Matrix bs = symmetrized(b);
  require(bs.rows() == w.rows(), ErrorKind::dimension, "pencil matrices differ in size");
  const Matrix l = cholesky(w);
  const std::size_t n = l.rows();

  // C = L⁻¹ B L⁻ᵀ, built column by column.
  Matrix linv_b(n, n);
  for (std::size_t j = 0; j < n; ++j) linv_b.set_column(j, forward_substitute(l, bs.column(j)));
  const Matrix half = linv_b.transpose();  // B L⁻ᵀ
  Matrix c(n, n);
  for (std::size_t j = 0; j < n; ++j) c.set_column(j, forward_substitute(l, half.column(j)));

  EigenDecomposition standard = sym_eig(symmetrized(c, 1e-8));
  Matrix vectors(n, n);
  for (std::size_t k = 0; k < n; ++k)
    vectors.set_column(k, backward_substitute_transposed(l, standard.vectors.column(k)));
  return {std::move(standard.values), std::move(vectors)};
}

/// Modified Gram-Schmidt on the columns; throws when they are dependent.
inline Matrix orthonormalize_columns(const Matrix& m) {
  Matrix q = m;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    Vector c = q.column(j);
    const double original = norm(c);
    for (std::size_t k = 0; k < j; ++k) {
      const Vector qk = q.column(k);
      c -= dot(qk, c) * qk;
    }
    const double n = norm(c);
    if (!(n > 1e-12 * std::max(original, 1.0)))
      fail(ErrorKind::rank, "columns are linearly dependent at column " + std::to_string(j));
    q.set_column(j, c * (1.0 / n));
  }
  return q;
}

/// Numerical rank via the eigenvalues of mᵀm. rel_tol is on singular values; forming
/// mᵀm leaves roundoff near √ε in that ratio, so the default sits above it.
inline std::size_t numerical_rank(const Matrix& m, double rel_tol = 1e-6) {
  const EigenDecomposition e = sym_eig(m.transpose() * m);
  const double top = std::max(e.values[0], 0.0);
  std::size_t r = 0;
  for (double v : e.values)
    if (v > rel_tol * rel_tol * top && v > 0.0) ++r;
  return r;
}

}  // namespace repobs
