#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "riskmse/model.hpp"
#include "riskmse/moments.hpp"
#include "riskmse/numerics/algebra.hpp"

namespace riskmse {

// Risk weights live on the extended half line [0, inf]; infinity selects the
// variance-optimal endpoint of the curve.
inline constexpr double kMuInf = std::numeric_limits<double>::infinity();

// Per-posterior work shared by every estimator and functional evaluation:
// the spectral decomposition of the covariance, the endpoint estimators, and
// the derived conditional statistics. Built once per observation.
struct PreparedPosterior {
  PosteriorSummary p;
  EigenDecomp eig;
  Vec u_mean;           // mean in the covariance eigenbasis
  Vec u_rstat;          // R(Y) in the eigenbasis
  Vec x_inf;            // variance-optimal estimator
  Vec u_delta;          // mean - x_inf in the eigenbasis; zero on the null space
  Vec delta;            // mean - x_inf
  Vec t3;               // E{||Z||^2 Z | Y}
  double tr_cov = 0.0;
  double var_sqnorm = 0.0;      // Var(||Z||^2 | Y)
  double sigma_max = 0.0;       // largest eigenvalue, 0 when rank 0
  double sigma_min_pos = 0.0;   // smallest nonzero eigenvalue, 0 when rank 0
  int rank = 0;
  double null_skew_discarded = 0.0;  // largest |R| component dropped on the null space

  int dim() const { return static_cast<int>(p.mean.size()); }
};

inline PreparedPosterior prepare(const PosteriorSummary& p) {
  p.validate();
  PreparedPosterior w;
  w.p = p;
  w.eig = eig_sym(p.cov);
  w.rank = w.eig.rank;
  const int n = p.dim();
  w.u_mean = w.eig.to_basis(p.mean);
  w.u_rstat = w.eig.to_basis(p.r_stat);

  // Endpoint of the curve in the eigenbasis: half the pseudoinverse applied
  // to R on the range of the covariance, the mean's own coordinates on the
  // null space. R's residual null-space components have no admissible
  // direction to act on and are dropped; their size is recorded.
  Vec w_inf(n);
  for (int i = 0; i < n; ++i) {
    if (i < w.rank) {
      w_inf[i] = 0.5 * w.u_rstat[i] / w.eig.values[i];
    } else {
      w_inf[i] = w.u_mean[i];
      w.null_skew_discarded = std::max(w.null_skew_discarded, std::abs(w.u_rstat[i]));
    }
  }
  w.x_inf = w.eig.from_basis(w_inf);

  w.u_delta.assign(n, 0.0);
  for (int i = 0; i < w.rank; ++i) w.u_delta[i] = w.u_mean[i] - w_inf[i];
  w.delta = sub(p.mean, w.x_inf);

  w.tr_cov = p.cov.trace();
  const Mat third = third_central_matrix(p.oracle, p.mean);
  w.t3 = third_central_sum(third);
  w.var_sqnorm = var_of_squared_norm(p.oracle, p.mean, w.tr_cov);
  if (w.rank > 0) {
    w.sigma_max = w.eig.values[0];
    w.sigma_min_pos = w.eig.values[w.rank - 1];
  }
  return w;
}

inline void check_mu(double mu) {
  if (std::isnan(mu) || mu < 0.0) throw InvalidInput("risk weight must lie in [0, inf]");
}

// The optimal estimator for risk weight mu: minimizer of
// E{||X - e||^2 | Y} + mu Var(||X - e||^2 | Y) over e. At mu = 0 this is the
// conditional mean; at mu = inf it is the variance-optimal endpoint.
inline Vec risk_aware_estimate(const PreparedPosterior& w, double mu) {
  check_mu(mu);
  if (mu == 0.0 || w.rank == 0) return w.p.mean;
  if (std::isinf(mu)) return w.x_inf;
  const int n = w.dim();
  Vec coeffs(n);
  for (int i = 0; i < n; ++i) {
    if (i < w.rank)
      coeffs[i] = (w.u_mean[i] + mu * w.u_rstat[i]) / (1.0 + 2.0 * mu * w.eig.values[i]);
    else
      coeffs[i] = w.u_mean[i];
  }
  return w.eig.from_basis(coeffs);
}

inline PreparedPosterior prepare(const GenerativeModel& model, const Vec& y) {
  return prepare(model.posterior(y));
}

// delta = X*_0 - X*_inf, the chord of the optimal curve.
inline Vec delta_x(const PreparedPosterior& w) { return w.delta; }

// One-shift form of the curve: X*_mu = X*_0 + U G(mu) U^T (X*_inf - X*_0)
// with G = diag(2 mu sigma_i / (1 + 2 mu sigma_i), 0). Must agree with
// risk_aware_estimate; kept as an independent route for consistency checks.
inline Vec curve_shift_identity(const PreparedPosterior& w, double mu) {
  check_mu(mu);
  const int n = w.dim();
  Vec coeffs(n);
  for (int i = 0; i < n; ++i) {
    double g = 0.0;
    if (i < w.rank) {
      const double s = w.eig.values[i];
      g = std::isinf(mu) ? 1.0 : 2.0 * mu * s / (1.0 + 2.0 * mu * s);
    }
    coeffs[i] = w.u_mean[i] - g * w.u_delta[i];
  }
  return w.eig.from_basis(coeffs);
}

// Two-point form: X*_mu - X*_mu2 = (mu - mu2) U H(mu, mu2) U^T (X*_inf - X*_0)
// with H = diag(2 sigma_i / ((1 + 2 mu sigma_i)(1 + 2 mu2 sigma_i)), 0).
// Requires finite weights.
inline Vec difference_identity(const PreparedPosterior& w, double mu, double mu2) {
  check_mu(mu);
  check_mu(mu2);
  if (std::isinf(mu) || std::isinf(mu2))
    throw InvalidInput("difference_identity: weights must be finite");
  const int n = w.dim();
  Vec coeffs(n, 0.0);
  for (int i = 0; i < w.rank; ++i) {
    const double s = w.eig.values[i];
    const double h = 2.0 * s / ((1.0 + 2.0 * mu * s) * (1.0 + 2.0 * mu2 * s));
    coeffs[i] = -(mu - mu2) * h * w.u_delta[i];
  }
  return w.eig.from_basis(coeffs);
}

// Largest third-central-moment row norm, scaled dimensionlessly. Zero means
// the conditional law is skew-symmetric and the curve collapses to the mean.
inline double skew_symmetry_residual(const PreparedPosterior& w) {
  const Mat third = third_central_matrix(w.p.oracle, w.p.mean);
  const int n = w.dim();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) row += third(i, j) * third(i, j);
    worst = std::max(worst, std::sqrt(row));
  }
  return worst / (1.0 + std::pow(w.sigma_max, 1.5));
}

}  // namespace riskmse
