#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "riskmse/errors.hpp"

namespace riskmse {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInput("dot: size mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInput("sub: size mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInput("add: size mismatch");
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec scaled(const Vec& a, double s) {
  Vec r(a);
  for (double& x : r) x *= s;
  return r;
}

// Dense row-major matrix. Used for eigenvector bases and cross-covariances.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw InvalidInput("Mat: negative dimension");
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  // y = M x
  Vec apply(const Vec& x) const {
    if (static_cast<int>(x.size()) != cols_) throw InvalidInput("Mat::apply: size mismatch");
    Vec y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  // y = M^T x
  Vec apply_transposed(const Vec& x) const {
    if (static_cast<int>(x.size()) != rows_) throw InvalidInput("Mat::apply_transposed: size mismatch");
    Vec y(cols_, 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) y[j] += (*this)(i, j) * x[i];
    return y;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

// Symmetric matrix with enforced symmetric storage: set() writes both
// triangles, so entries (i,j) and (j,i) are always bit-identical.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n, double fill = 0.0)
      : n_(n), a_(static_cast<std::size_t>(n) * n, fill) {
    if (n < 0) throw InvalidInput("SymMatrix: negative dimension");
  }

  static SymMatrix identity(int n, double scale = 1.0) {
    SymMatrix m(n);
    for (int i = 0; i < n; ++i) m.set(i, i, scale);
    return m;
  }

  // Symmetrizes arbitrary square input as (A + A^T) / 2.
  static SymMatrix from_dense(const Mat& m) {
    if (m.rows() != m.cols()) throw InvalidInput("SymMatrix::from_dense: not square");
    SymMatrix s(m.rows());
    for (int i = 0; i < m.rows(); ++i)
      for (int j = i; j < m.cols(); ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
    return s;
  }

  int dim() const { return n_; }

  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

  void set(int i, int j, double v) {
    a_[static_cast<std::size_t>(i) * n_ + j] = v;
    a_[static_cast<std::size_t>(j) * n_ + i] = v;
  }

  bool finite() const {
    return std::all_of(a_.begin(), a_.end(), [](double x) { return std::isfinite(x); });
  }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  Vec apply(const Vec& x) const {
    if (static_cast<int>(x.size()) != n_) throw InvalidInput("SymMatrix::apply: size mismatch");
    Vec y(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int j = 0; j < n_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  double quadratic_form(const Vec& x) const { return dot(x, apply(x)); }

 private:
  int n_ = 0;
  std::vector<double> a_;
};

// Spectral decomposition of a symmetric matrix. Eigenvalues are sorted in
// descending order; entries at or below clamp_tol are replaced by exact
// zeros, so `rank` counts the strictly positive spectrum.
struct EigenDecomp {
  Vec values;     // descending, clamped
  Mat vectors;    // column j is the eigenvector for values[j]
  int rank = 0;   // number of strictly positive eigenvalues after clamping
  double clamp_tol = 0.0;

  // x expressed in the eigenbasis: returns vectors^T x.
  Vec to_basis(const Vec& x) const { return vectors.apply_transposed(x); }
  Vec from_basis(const Vec& w) const { return vectors.apply(w); }
};

// Cyclic Jacobi eigendecomposition. Intended for the small posterior
// covariance sizes this library works with (dim <= 64 enforced).
inline EigenDecomp eig_sym(const SymMatrix& m, double rel_tol = 1e-10) {
  const int n = m.dim();
  if (n == 0) throw InvalidInput("eig_sym: empty matrix");
  if (n > 64) throw InvalidInput("eig_sym: dimension above supported limit (64)");
  if (!m.finite()) throw InvalidInput("eig_sym: non-finite entries");
  if (!(rel_tol > 0.0)) throw InvalidInput("eig_sym: rel_tol must be positive");

  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
  Mat v = Mat::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
  };

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));

  const int max_sweeps = 64;
  if (scale > 0.0) {
    const double stop = 1e-15 * scale * n;
    int sweep = 0;
    while (off_norm() > stop) {
      if (++sweep > max_sweeps)
        throw AccuracyFailure("eig_sym: Jacobi sweeps exhausted", a(0, 0));
      for (int p = 0; p < n - 1; ++p) {
        for (int q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (std::abs(apq) <= 1e-18 * scale) continue;
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          for (int k = 0; k < n; ++k) {
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = c * akp - s * akq;
            a(k, q) = s * akp + c * akq;
          }
          for (int k = 0; k < n; ++k) {
            const double apk = a(p, k), aqk = a(q, k);
            a(p, k) = c * apk - s * aqk;
            a(q, k) = s * apk + c * aqk;
          }
          for (int k = 0; k < n; ++k) {
            const double vkp = v(k, p), vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });

  EigenDecomp d;
  d.values.resize(n);
  d.vectors = Mat(n, n);
  double max_abs = 0.0;
  for (int j = 0; j < n; ++j) max_abs = std::max(max_abs, std::abs(a(j, j)));
  d.clamp_tol = rel_tol * std::max(max_abs, 1e-300);
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    double lam = a(src, src);
    if (lam <= d.clamp_tol) lam = 0.0;
    d.values[j] = lam;
    for (int i = 0; i < n; ++i) d.vectors(i, j) = v(i, src);
  }
  d.rank = static_cast<int>(std::count_if(d.values.begin(), d.values.end(),
                                          [](double x) { return x > 0.0; }));
  return d;
}

// Moore-Penrose pseudoinverse assembled from a spectral decomposition.
inline SymMatrix pinv(const EigenDecomp& d) {
  const int n = static_cast<int>(d.values.size());
  Mat out(n, n);
  for (int k = 0; k < d.rank; ++k) {
    const double inv = 1.0 / d.values[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) += inv * d.vectors(i, k) * d.vectors(j, k);
  }
  return SymMatrix::from_dense(out);
}

inline SymMatrix pinv(const SymMatrix& m, double rel_tol = 1e-10) {
  return pinv(eig_sym(m, rel_tol));
}

}  // namespace riskmse
