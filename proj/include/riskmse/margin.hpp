#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "riskmse/functionals.hpp"
#include "riskmse/numerics/quadrature.hpp"

namespace riskmse {

// Hedgeable risk margin of one posterior: the pseudoinverse-weighted squared
// norm of the gap between the conditional mean and the variance-optimal
// estimate. Zero for a degenerate (rank zero) posterior.
inline double hedge_margin(const PreparedPosterior& w) {
  double acc = 0.0;
  for (int i = 0; i < w.rank; ++i)
    acc += w.u_delta[i] * w.u_delta[i] / w.eig.values[i];
  return acc;
}

inline double hedge_margin(const PosteriorSummary& p) { return hedge_margin(prepare(p)); }

// Integrand of the projection identity: the margin equals the integral over
// tau in [0, inf) of sum_i 2 [U'delta]_i^2 / (1 + 2 tau sigma_i)^2, the
// squared speed of travel along the estimator curve in the weighted norm.
inline double projection_integrand(const PreparedPosterior& w, double tau) {
  double acc = 0.0;
  for (int i = 0; i < w.rank; ++i) {
    const double den = 1.0 + 2.0 * tau * w.eig.values[i];
    acc += 2.0 * w.u_delta[i] * w.u_delta[i] / (den * den);
  }
  return acc;
}

// Exact tail of the projection integral beyond tau_max.
inline double projection_tail_bound(const PreparedPosterior& w, double tau_max) {
  double acc = 0.0;
  for (int i = 0; i < w.rank; ++i) {
    const double lam = w.eig.values[i];
    acc += w.u_delta[i] * w.u_delta[i] / (lam * (1.0 + 2.0 * tau_max * lam));
  }
  return acc;
}

inline double projection_integral(const PreparedPosterior& w, double tau_max = 1e6) {
  if (w.rank == 0) return 0.0;
  const QuadResult q = integrate_1d([&](double t) { return projection_integrand(w, t); }, 0.0,
                                    tau_max, 1e-13, 1e-10);
  return q.value;
}

// Spectral statistics of the sampled posterior covariances. Essential
// suprema are not Monte-Carlo observable, so they are estimated as extreme
// empirical quantiles; the raw extremes seen are reported alongside, and
// user-supplied values may override the estimates.
struct SpectralStats {
  std::optional<double> rho_min;
  double rho_max = 0.0;
  double quantile_used = 0.0;
  double observed_sigma_max = 0.0;
  std::optional<double> observed_sigma_min;
  bool rho_max_overridden = false;
  bool rho_min_overridden = false;
};

struct MarginReport {
  std::vector<double> c_values;
  std::vector<double> delta_sq;    // per observation, squared norm of the gap
  std::vector<double> range_sq;    // same, from eigenbasis range components
  FunctionalEstimate expected_margin;
  double d_value = 0.0;
  double d_std_error = 0.0;
  FunctionalEstimate e_lower;      // E{ ||gap||^2 / sigma_max }
  FunctionalEstimate e_upper;      // E{ ||gap||^2 / sigma_min }
  FunctionalEstimate mse_zero;     // mse of the conditional mean
  FunctionalEstimate sev_floor;    // sev of the variance-optimal estimator
  double u_bound = 0.0;
  double norm_scale = 0.0;         // typical squared magnitude, for zero tests
  SpectralStats spectral;

  double l_bound(double mu) const;
};

// Uniform upper bound on the product gap along the curve.
inline double bound_upper(const MarginReport& report, double mse0, double sev_inf) {
  const double rho = report.spectral.rho_max;
  const double d2 = report.d_value * report.d_value;
  return (rho * rho * mse0 + rho * sev_inf) * d2 + rho * rho * rho * d2 * d2;
}

// Lower bound on the product gap at finite weight mu; zero in the limit.
inline double bound_lower(const MarginReport& report, double mse0, double sev_inf, double mu) {
  if (!report.spectral.rho_min)
    throw UndefinedQuantity("bound_lower: rho_min unavailable (rank-deficient posteriors seen)");
  if (std::isnan(mu) || mu < 0.0) throw InvalidInput("bound_lower: mu must be >= 0");
  if (std::isinf(mu)) return 0.0;
  const double rmin = *report.spectral.rho_min;
  const double rmax = report.spectral.rho_max;
  const double den = 1.0 + 2.0 * mu * rmax;
  const double alpha = 0.25 * rmin * rmin / (den * den);
  const double d2 = report.d_value * report.d_value;
  return (alpha * mse0 + rmin * mu * mu * alpha * sev_inf) * d2 +
         rmin * mu * mu * alpha * alpha * d2 * d2;
}

inline double MarginReport::l_bound(double mu) const {
  return bound_lower(*this, mse_zero.value, sev_floor.value, mu);
}

inline MarginReport margin_report(const PosteriorCache& cache, double quantile = 0.001,
                                  std::optional<double> rho_max_override = std::nullopt,
                                  std::optional<double> rho_min_override = std::nullopt) {
  if (!(quantile > 0.0) || quantile > 0.05)
    throw InvalidInput("margin_report: quantile must lie in (0, 0.05]");
  const std::size_t n = cache.size();
  MarginReport rep;
  rep.c_values.resize(n);
  rep.delta_sq.resize(n);
  rep.range_sq.resize(n);
  std::vector<double> el(n), eu(n), mse0(n), sevinf(n), smax(n), scale(n);
  std::vector<double> smin;
  smin.reserve(n);
  bool full_rank = true;
  for (std::size_t i = 0; i < n; ++i) {
    const PreparedPosterior& w = cache.items()[i];
    rep.c_values[i] = hedge_margin(w);
    const double d2 = dot(w.delta, w.delta);
    rep.delta_sq[i] = d2;
    double r2 = 0.0;
    for (int k = 0; k < w.rank; ++k) r2 += w.u_delta[k] * w.u_delta[k];
    rep.range_sq[i] = r2;
    el[i] = w.rank > 0 ? d2 / w.sigma_max : 0.0;
    eu[i] = w.rank > 0 ? d2 / w.sigma_min_pos : 0.0;
    mse0[i] = w.tr_cov;
    sevinf[i] = sev_summand(w, w.x_inf);
    smax[i] = w.rank > 0 ? w.sigma_max : 0.0;
    scale[i] = w.tr_cov + dot(w.p.mean, w.p.mean);
    if (w.rank < w.dim())
      full_rank = false;
    else
      smin.push_back(w.sigma_min_pos);
  }

  const MeanSe c = mean_and_se(rep.c_values);
  rep.expected_margin = {c.mean, c.std_error, c.n};
  if (c.mean > 0.0) {
    rep.d_value = 2.0 * std::sqrt(c.mean);
    rep.d_std_error = c.std_error / std::sqrt(c.mean);
  }
  const MeanSe ml = mean_and_se(el);
  const MeanSe mu_ = mean_and_se(eu);
  rep.e_lower = {ml.mean, ml.std_error, ml.n};
  rep.e_upper = {mu_.mean, mu_.std_error, mu_.n};
  const MeanSe m0 = mean_and_se(mse0);
  const MeanSe sf = mean_and_se(sevinf);
  rep.mse_zero = {m0.mean, m0.std_error, m0.n};
  rep.sev_floor = {sf.mean, sf.std_error, sf.n};
  rep.norm_scale = pairwise_sum(scale) / static_cast<double>(n);

  rep.spectral.quantile_used = quantile;
  rep.spectral.observed_sigma_max = *std::max_element(smax.begin(), smax.end());
  if (rho_max_override) {
    if (!(*rho_max_override >= 0.0)) throw InvalidInput("margin_report: rho_max must be >= 0");
    rep.spectral.rho_max = *rho_max_override;
    rep.spectral.rho_max_overridden = true;
  } else {
    rep.spectral.rho_max = riskmse::quantile(smax, 1.0 - quantile);
  }
  if (full_rank && !smin.empty())
    rep.spectral.observed_sigma_min = *std::min_element(smin.begin(), smin.end());
  if (rho_min_override) {
    if (!(*rho_min_override > 0.0)) throw InvalidInput("margin_report: rho_min must be > 0");
    rep.spectral.rho_min = *rho_min_override;
    rep.spectral.rho_min_overridden = true;
  } else if (full_rank && !smin.empty()) {
    rep.spectral.rho_min = riskmse::quantile(smin, quantile);
  }
  if (rep.spectral.rho_min && *rep.spectral.rho_min > rep.spectral.rho_max)
    throw InvalidInput("margin_report: rho_min exceeds rho_max");

  rep.u_bound = bound_upper(rep, rep.mse_zero.value, rep.sev_floor.value);
  return rep;
}

inline MarginReport margin_report(const GenerativeModel& model, const ObservationBatch& batch,
                                  double quantile = 0.001, int threads = 1,
                                  std::optional<double> rho_max_override = std::nullopt,
                                  std::optional<double> rho_min_override = std::nullopt) {
  return margin_report(PosteriorCache::build(model, batch, threads), quantile, rho_max_override,
                       rho_min_override);
}

// Diagnostic localization of the product minimizer: the leading term of the
// upper bound on mu_star for a chosen eps, with the neglected remainder
// magnitude reported separately rather than folded in.
struct MuStarLocalization {
  double leading = 0.0;
  double remainder = 0.0;
};

inline MuStarLocalization mu_star_localization(const MarginReport& report, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("mu_star_localization: eps must be positive");
  if (!report.spectral.rho_min)
    throw UndefinedQuantity("mu_star_localization: rho_min unavailable");
  const double mean_d2 =
      pairwise_sum(report.delta_sq) / static_cast<double>(report.delta_sq.size());
  if (mean_d2 <= 1e-20 * std::max(report.norm_scale, 1e-300))
    throw UndefinedQuantity(
        "mu_star_localization: expected squared gap is zero (skew-symmetric model)");
  const double mean_r2 =
      pairwise_sum(report.range_sq) / static_cast<double>(report.range_sq.size());
  double var_d2 = 0.0;
  for (double v : report.delta_sq) var_d2 += (v - mean_d2) * (v - mean_d2);
  var_d2 = report.delta_sq.size() > 1
               ? var_d2 / static_cast<double>(report.delta_sq.size() - 1)
               : 0.0;
  MuStarLocalization loc;
  loc.leading = std::sqrt(mean_r2) / (eps * *report.spectral.rho_min * std::sqrt(mean_d2));
  loc.remainder = var_d2 / (eps * std::pow(mean_d2, 1.5));
  return loc;
}

}  // namespace riskmse
