#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "riskmse/functionals.hpp"

namespace riskmse {

// Default risk-weight grid: zero, sixty log-spaced finite weights, infinity.
inline std::vector<double> log_mu_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo)) throw InvalidInput("log_mu_grid: need 0 < lo < hi");
  if (count < 2) throw InvalidInput("log_mu_grid: need at least two points");
  std::vector<double> grid;
  grid.push_back(0.0);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i)
    grid.push_back(std::exp(llo + (lhi - llo) * i / (count - 1)));
  grid.push_back(kMuInf);
  return grid;
}

inline std::vector<double> default_mu_grid() { return log_mu_grid(1e-4, 1e4, 60); }

// The frontier of (mse, sev) pairs along the optimal curve, with the refined
// product minimizer. Summand tables are kept when requested so that paired
// (common random numbers) comparisons between grid points are possible
// without recomputation.
struct FrontierCurve {
  std::vector<double> grid;
  std::vector<FrontierPoint> points;
  double mu_star = 0.0;
  FrontierPoint star;
  double h_value = 0.0;       // min over the curve of mse * sev
  double h_std_error = 0.0;
  double anchor = 0.0;        // mse(X*_0) * sev(X*_inf)
  double anchor_std_error = 0.0;
  std::vector<std::vector<double>> mse_summands;  // per grid point, when kept
  std::vector<std::vector<double>> sev_summands;
};

namespace tradeoff_detail {

// Closed-form derivative of the product along the curve, used to polish the
// minimizer after the golden-section stage. Exact per-posterior formulas in
// the covariance eigenbasis.
inline double product_derivative(const PosteriorCache& cache, double mu) {
  const std::size_t n = cache.size();
  std::vector<double> mse_s(n), sev_s(n), dmse_s(n), dsev_s(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PreparedPosterior& w = cache.items()[k];
    double mse = w.tr_cov, sev = w.var_sqnorm, dmse = 0.0, dsev = 0.0;
    for (int i = 0; i < w.rank; ++i) {
      const double lam = w.eig.values[i];
      const double d2 = w.u_delta[i] * w.u_delta[i];
      const double den = 1.0 + 2.0 * mu * lam;
      const double g = 2.0 * mu * lam / den;
      const double gp = 2.0 * lam / (den * den);
      mse += g * g * d2;
      sev += 4.0 * lam * ((1.0 - g) * (1.0 - g) - 1.0) * d2;
      dmse += 2.0 * g * gp * d2;
      dsev += -8.0 * lam * (1.0 - g) * gp * d2;
    }
    mse_s[k] = mse;
    sev_s[k] = sev;
    dmse_s[k] = dmse;
    dsev_s[k] = dsev;
  }
  const double inv = 1.0 / static_cast<double>(n);
  const double m = pairwise_sum(mse_s) * inv;
  const double s = pairwise_sum(sev_s) * inv;
  const double dm = pairwise_sum(dmse_s) * inv;
  const double ds = pairwise_sum(dsev_s) * inv;
  return dm * s + m * ds;
}

inline double product_at(const PosteriorCache& cache, double mu) {
  const auto s = functional_detail::curve_summands(cache, mu);
  const double inv = 1.0 / static_cast<double>(s.mse.size());
  return (pairwise_sum(s.mse) * inv) * (pairwise_sum(s.sev) * inv);
}

// Golden-section minimization of the product on log weight over [a, b],
// followed by a bisection on the derivative sign when one is bracketed.
inline double refine_mu_star(const PosteriorCache& cache, double a, double b) {
  const double inv_phi = 0.6180339887498948482;
  double la = std::log(a), lb = std::log(b);
  double l1 = lb - inv_phi * (lb - la);
  double l2 = la + inv_phi * (lb - la);
  double f1 = product_at(cache, std::exp(l1));
  double f2 = product_at(cache, std::exp(l2));
  for (int it = 0; it < 90 && (lb - la) > 1e-13; ++it) {
    if (f1 <= f2) {
      lb = l2;
      l2 = l1;
      f2 = f1;
      l1 = lb - inv_phi * (lb - la);
      f1 = product_at(cache, std::exp(l1));
    } else {
      la = l1;
      l1 = l2;
      f1 = f2;
      l2 = la + inv_phi * (lb - la);
      f2 = product_at(cache, std::exp(l2));
    }
  }
  double lo = std::max(a, std::exp(la) * 0.5);
  double hi = std::min(b, std::exp(lb) * 2.0);
  double dlo = product_derivative(cache, lo);
  double dhi = product_derivative(cache, hi);
  if (dlo < 0.0 && dhi > 0.0) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double dm = product_derivative(cache, mid);
      if (dm < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }
  return std::exp(0.5 * (la + lb));
}

}  // namespace tradeoff_detail

inline FrontierCurve frontier_scan(const PosteriorCache& cache, std::vector<double> grid,
                                   bool refine = true, bool keep_summands = false) {
  for (double mu : grid) check_mu(mu);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty() || grid.front() != 0.0) grid.insert(grid.begin(), 0.0);
  if (!std::isinf(grid.back())) grid.push_back(kMuInf);

  FrontierCurve curve;
  curve.grid = grid;
  curve.points.reserve(grid.size());
  for (double mu : grid) {
    auto s = functional_detail::curve_summands(cache, mu);
    curve.points.push_back(functional_detail::point_from_summands(mu, s));
    if (keep_summands) {
      curve.mse_summands.push_back(std::move(s.mse));
      curve.sev_summands.push_back(std::move(s.sev));
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    if (curve.points[i].product < curve.points[best].product) best = i;

  curve.mu_star = curve.points[best].mu;
  curve.star = curve.points[best];

  if (refine && curve.points.size() >= 3) {
    const std::size_t last = curve.points.size() - 1;
    double a = 0.0, b = 0.0;
    if (best == 0) {
      b = grid[1];
      a = std::isinf(grid[2]) ? grid[1] * 1e-6 : grid[1] * grid[1] / grid[2];
    } else if (best == last) {
      const double hi_fin = grid[last - 1];
      a = hi_fin;
      b = (best >= 2 && grid[last - 2] > 0.0) ? hi_fin * hi_fin / grid[last - 2] : hi_fin * 1e6;
    } else {
      a = grid[best - 1] > 0.0 ? grid[best - 1]
                               : grid[best] * grid[best] / (std::isinf(grid[best + 1])
                                                                ? grid[best] * 1e6
                                                                : grid[best + 1]);
      b = std::isinf(grid[best + 1]) ? grid[best] * grid[best] / grid[best - 1] * 1e12
                                     : grid[best + 1];
    }
    if (a > 0.0 && b > a && std::isfinite(b)) {
      const double mu_ref = tradeoff_detail::refine_mu_star(cache, a, b);
      const FrontierPoint cand = frontier_point(cache, mu_ref);
      if (cand.product < curve.star.product) {
        curve.mu_star = mu_ref;
        curve.star = cand;
      }
    }
  }

  curve.h_value = curve.star.product;
  curve.h_std_error = curve.star.product_std_error;

  const FrontierPoint& first = curve.points.front();
  const FrontierPoint& last_pt = curve.points.back();
  curve.anchor = first.mse.value * last_pt.sev.value;
  curve.anchor_std_error =
      std::sqrt(std::max(0.0, last_pt.sev.value * last_pt.sev.value * first.mse.std_error * first.mse.std_error +
                                  first.mse.value * first.mse.value * last_pt.sev.std_error * last_pt.sev.std_error));
  return curve;
}

inline FrontierCurve frontier_scan(const GenerativeModel& model, const ObservationBatch& batch,
                                   std::vector<double> grid, bool refine = true,
                                   int threads = 1, bool keep_summands = false) {
  return frontier_scan(PosteriorCache::build(model, batch, threads), std::move(grid), refine,
                       keep_summands);
}

// Paired comparison of two summand arrays sharing the same observations:
// mean and standard error of the per-sample differences.
inline MeanSe paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidInput("paired_difference: size mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return mean_and_se(d);
}

// Verdict for one probe estimator against the frontier floor.
struct UncertaintyCheck {
  FunctionalEstimate mse;
  FunctionalEstimate sev;
  double product = 0.0;
  double product_std_error = 0.0;
  double h_value = 0.0;
  double margin = 0.0;   // product - h
  bool passed = false;   // product >= h - 3 * combined std error
};

inline UncertaintyCheck verify_uncertainty(const PosteriorCache& cache, const EstimatorFn& est,
                                           const FrontierCurve& curve) {
  std::vector<double> ms(cache.size()), vs(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const PreparedPosterior& w = cache.items()[i];
    const Vec e = est(w, cache.observations()[i]);
    if (static_cast<int>(e.size()) != w.dim() || !all_finite(e))
      throw InvalidInput("estimator returned a bad point estimate");
    ms[i] = mse_summand(w, e);
    vs[i] = sev_summand(w, e);
  }
  UncertaintyCheck chk;
  const MeanSe m = mean_and_se(ms);
  const MeanSe v = mean_and_se(vs);
  chk.mse = {m.mean, m.std_error, m.n};
  chk.sev = {v.mean, v.std_error, v.n};
  chk.product = m.mean * v.mean;
  const double cov = covariance_of_means(ms, vs);
  chk.product_std_error = std::sqrt(std::max(
      0.0, v.mean * v.mean * m.std_error * m.std_error +
               m.mean * m.mean * v.std_error * v.std_error + 2.0 * m.mean * v.mean * cov));
  chk.h_value = curve.h_value;
  chk.margin = chk.product - curve.h_value;
  const double combined = std::sqrt(chk.product_std_error * chk.product_std_error +
                                    curve.h_std_error * curve.h_std_error);
  chk.passed = chk.product >= curve.h_value - 3.0 * combined;
  return chk;
}

// Smallest risk weight whose curve point meets sev <= epsilon, located by
// doubling plus log bisection to the requested relative width. Infeasible
// targets (below the variance floor of the curve) throw, carrying the floor.
inline double solve_constrained(const PosteriorCache& cache, double epsilon,
                                double rel_width = 1e-3) {
  if (!(rel_width > 0.0)) throw InvalidInput("solve_constrained: rel_width must be positive");
  if (std::isnan(epsilon)) throw InvalidInput("solve_constrained: epsilon is NaN");
  const auto sev_at = [&](double mu) {
    const auto s = functional_detail::curve_summands(cache, mu);
    return pairwise_sum(s.sev) / static_cast<double>(s.sev.size());
  };
  const double floor = sev_at(kMuInf);
  if (epsilon < floor)
    throw InfeasibleConstraint("solve_constrained: epsilon below the variance floor of the curve",
                               floor);
  if (sev_at(0.0) <= epsilon) return 0.0;

  double hi = 1e-6;
  while (sev_at(hi) > epsilon) {
    hi *= 10.0;
    if (hi > 1e12) return kMuInf;
  }
  double lo = hi / 10.0;
  while ((hi - lo) > rel_width * hi) {
    const double mid = std::sqrt(lo * hi);
    if (sev_at(mid) <= epsilon)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline double solve_constrained(const GenerativeModel& model, double epsilon,
                                const ObservationBatch& batch, int threads = 1) {
  return solve_constrained(PosteriorCache::build(model, batch, threads), epsilon);
}

// Lipschitz constants of the two functionals along the curve:
// K_mse = 4 E{sigma_max ||delta||^2}, K_sev = 4 E{sigma_max^2 ||delta||^2}.
// Caution: the curve's sev slope at mu = 0 reaches 16 E{sigma_max^2 ||delta||^2}
// in the scalar case, so k_sev alone under-covers small-mu increments; the
// product 4 * k_sev bounds every increment. The tradeoff tests pin both facts.
struct LipschitzConstants {
  FunctionalEstimate k_mse;
  FunctionalEstimate k_sev;
};

inline LipschitzConstants lipschitz_constants(const PosteriorCache& cache) {
  std::vector<double> km(cache.size()), ks(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const PreparedPosterior& w = cache.items()[i];
    const double d2 = dot(w.delta, w.delta);
    km[i] = 4.0 * w.sigma_max * d2;
    ks[i] = 4.0 * w.sigma_max * w.sigma_max * d2;
  }
  LipschitzConstants k;
  const MeanSe m = mean_and_se(km);
  const MeanSe s = mean_and_se(ks);
  k.k_mse = {m.mean, m.std_error, m.n};
  k.k_sev = {s.mean, s.std_error, s.n};
  return k;
}

// Tail bound for the approach to the variance-optimal endpoint, in estimator
// space: E{||x_mu - x_inf||^2} <= E{sum_i dU_i^2 / sigma_i^2} / (4 mu^2),
// from the per-coordinate gap dU_i / (1 + 2 mu sigma_i).
inline double endpoint_distance_bound(const PosteriorCache& cache, double mu) {
  if (!(mu > 0.0)) throw InvalidInput("endpoint_distance_bound: mu must be positive");
  std::vector<double> vals(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const PreparedPosterior& w = cache.items()[i];
    double acc = 0.0;
    for (int k = 0; k < w.rank; ++k)
      acc += w.u_delta[k] * w.u_delta[k] / (w.eig.values[k] * w.eig.values[k]);
    vals[i] = acc;
  }
  return pairwise_sum(vals) / static_cast<double>(vals.size()) / (4.0 * mu * mu);
}

}  // namespace riskmse
