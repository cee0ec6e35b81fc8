#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <vector>

#include "riskmse/errors.hpp"
#include "riskmse/numerics/algebra.hpp"

namespace riskmse {

// Multi-index of per-coordinate powers; the total degree is the sum.
using MultiIndex = std::vector<int>;

inline int degree(const MultiIndex& q) { return std::accumulate(q.begin(), q.end(), 0); }

// A conditional raw-moment oracle: evaluates E{prod_i X_i^{q_i} | Y} for
// multi-indices up to total degree 4.
using MomentOracle = std::function<double(const MultiIndex&)>;

inline constexpr int kMaxMomentDegree = 4;

inline double binomial(int n, int k) {
  static const double table[5][5] = {{1, 0, 0, 0, 0},
                                     {1, 1, 0, 0, 0},
                                     {1, 2, 1, 0, 0},
                                     {1, 3, 3, 1, 0},
                                     {1, 4, 6, 4, 1}};
  return table[n][k];
}

// All multi-indices over `dim` coordinates with total degree <= max_deg,
// in a deterministic order.
inline std::vector<MultiIndex> multi_indices_up_to(int dim, int max_deg) {
  std::vector<MultiIndex> out;
  MultiIndex cur(dim, 0);
  std::function<void(int, int)> rec = [&](int coord, int remaining) {
    if (coord == dim) {
      out.push_back(cur);
      return;
    }
    for (int p = 0; p <= remaining; ++p) {
      cur[coord] = p;
      rec(coord + 1, remaining - p);
    }
    cur[coord] = 0;
  };
  rec(0, max_deg);
  return out;
}

// Dense store for raw moments up to degree 4; models fill one per posterior
// and hand out lookups through the MomentOracle interface.
class RawMomentTable {
 public:
  RawMomentTable() = default;
  explicit RawMomentTable(int dim) : dim_(dim) {}

  int dim() const { return dim_; }

  void set(const MultiIndex& q, double value) { vals_[q] = value; }

  double raw(const MultiIndex& q) const {
    if (static_cast<int>(q.size()) != dim_) throw InvalidInput("RawMomentTable: index dimension mismatch");
    if (degree(q) > kMaxMomentDegree) throw InvalidInput("RawMomentTable: degree above 4");
    const auto it = vals_.find(q);
    if (it == vals_.end()) throw InvalidInput("RawMomentTable: moment not populated");
    return it->second;
  }

  MomentOracle oracle() const {
    auto self = std::make_shared<RawMomentTable>(*this);
    return [self](const MultiIndex& q) { return self->raw(q); };
  }

  // Table for a vector of independent coordinates, given per-coordinate raw
  // moments raw_by_coord[c][k] = E{X_c^k}, k = 0..4.
  static RawMomentTable independent(const std::vector<std::array<double, 5>>& raw_by_coord);

  // Table for a multivariate normal with the given mean and covariance.
  static RawMomentTable gaussian(const Vec& mean, const SymMatrix& cov);

 private:
  int dim_ = 0;
  std::map<MultiIndex, double> vals_;
};

inline RawMomentTable RawMomentTable::independent(
    const std::vector<std::array<double, 5>>& raw_by_coord) {
  const int dim = static_cast<int>(raw_by_coord.size());
  RawMomentTable t(dim);
  for (const auto& q : multi_indices_up_to(dim, kMaxMomentDegree)) {
    double v = 1.0;
    for (int c = 0; c < dim; ++c) v *= raw_by_coord[c][q[c]];
    t.set(q, v);
  }
  return t;
}

// E{prod (X_i - m_i)^{q_i}} expanded over raw moments.
inline double central_moment(const MomentOracle& raw, const Vec& mean, const MultiIndex& q) {
  const int dim = static_cast<int>(mean.size());
  if (static_cast<int>(q.size()) != dim) throw InvalidInput("central_moment: index dimension mismatch");
  double total = 0.0;
  MultiIndex s(dim, 0);
  std::function<void(int, double)> rec = [&](int coord, double coeff) {
    if (coord == dim) {
      total += coeff * raw(s);
      return;
    }
    for (int p = 0; p <= q[coord]; ++p) {
      s[coord] = p;
      rec(coord + 1, coeff * binomial(q[coord], p) * std::pow(-mean[coord], q[coord] - p));
    }
    s[coord] = 0;
  };
  rec(0, 1.0);
  return total;
}

// Central moments of a zero-mean Gaussian via the pair decomposition, for
// total degree <= 4.
inline double gaussian_central_moment(const SymMatrix& cov, const MultiIndex& q) {
  const int deg = degree(q);
  if (deg % 2 == 1) return 0.0;
  if (deg == 0) return 1.0;
  std::vector<int> idx;
  for (int c = 0; c < static_cast<int>(q.size()); ++c)
    for (int p = 0; p < q[c]; ++p) idx.push_back(c);
  if (deg == 2) return cov(idx[0], idx[1]);
  return cov(idx[0], idx[1]) * cov(idx[2], idx[3]) +
         cov(idx[0], idx[2]) * cov(idx[1], idx[3]) +
         cov(idx[0], idx[3]) * cov(idx[1], idx[2]);
}

inline RawMomentTable RawMomentTable::gaussian(const Vec& mean, const SymMatrix& cov) {
  const int dim = static_cast<int>(mean.size());
  RawMomentTable t(dim);
  // raw(q) = E{prod (m_i + Z_i)^{q_i}} expanded over central moments.
  for (const auto& q : multi_indices_up_to(dim, kMaxMomentDegree)) {
    double total = 0.0;
    MultiIndex s(dim, 0);
    std::function<void(int, double)> rec = [&](int coord, double coeff) {
      if (coord == dim) {
        total += coeff * gaussian_central_moment(cov, s);
        return;
      }
      for (int p = 0; p <= q[coord]; ++p) {
        s[coord] = p;
        rec(coord + 1, coeff * binomial(q[coord], p) * std::pow(mean[coord], q[coord] - p));
      }
      s[coord] = 0;
    };
    rec(0, 1.0);
    t.set(q, total);
  }
  return t;
}

// Derived conditional statistics used by the variance-of-loss functionals.

// M(i, j) = E{Z_i^2 Z_j | Y} with Z = X - E{X|Y}.
inline Mat third_central_matrix(const MomentOracle& raw, const Vec& mean) {
  const int n = static_cast<int>(mean.size());
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      MultiIndex q(n, 0);
      q[i] += 2;
      q[j] += 1;
      m(i, j) = central_moment(raw, mean, q);
    }
  return m;
}

// t3_j = E{||Z||^2 Z_j | Y} = sum_i M(i, j).
inline Vec third_central_sum(const Mat& third) {
  Vec t(third.cols(), 0.0);
  for (int i = 0; i < third.rows(); ++i)
    for (int j = 0; j < third.cols(); ++j) t[j] += third(i, j);
  return t;
}

// Var(||Z||^2 | Y) = E{||Z||^4 | Y} - (tr Sigma)^2.
inline double var_of_squared_norm(const MomentOracle& raw, const Vec& mean, double trace_cov) {
  const int n = static_cast<int>(mean.size());
  double fourth = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      MultiIndex q(n, 0);
      q[i] += 2;
      q[j] += 2;
      fourth += central_moment(raw, mean, q);
    }
  return fourth - trace_cov * trace_cov;
}

// R(Y) = E{||X||^2 X | Y} - E{||X||^2 | Y} E{X | Y}, from raw moments.
inline Vec r_statistic(const MomentOracle& raw, int dim) {
  Vec r(dim, 0.0);
  double sq = 0.0;
  for (int i = 0; i < dim; ++i) {
    MultiIndex q(dim, 0);
    q[i] = 2;
    sq += raw(q);
  }
  for (int j = 0; j < dim; ++j) {
    double third = 0.0;
    for (int i = 0; i < dim; ++i) {
      MultiIndex q(dim, 0);
      q[i] += 2;
      q[j] += 1;
      third += raw(q);
    }
    MultiIndex e(dim, 0);
    e[j] = 1;
    r[j] = third - sq * raw(e);
  }
  return r;
}

// Posterior covariance from raw moments.
inline SymMatrix covariance_from_raw(const MomentOracle& raw, const Vec& mean) {
  const int n = static_cast<int>(mean.size());
  SymMatrix cov(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      MultiIndex q(n, 0);
      q[i] += 1;
      q[j] += 1;
      cov.set(i, j, central_moment(raw, mean, q));
    }
  return cov;
}

inline Vec mean_from_raw(const MomentOracle& raw, int dim) {
  Vec m(dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    MultiIndex q(dim, 0);
    q[i] = 1;
    m[i] = raw(q);
  }
  return m;
}

}  // namespace riskmse
