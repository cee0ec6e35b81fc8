#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "riskmse/estimators.hpp"
#include "riskmse/model.hpp"
#include "riskmse/numerics/stats.hpp"

namespace riskmse {

// A Monte Carlo estimate of a population functional. For totally hidden
// models the outer expectation is trivial: one sample, zero standard error.
struct FunctionalEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
};

// An estimator of X from Y. Receives the prepared posterior for y alongside
// the raw observation so that optimal-curve probes avoid recomputation.
using EstimatorFn = std::function<Vec(const PreparedPosterior&, const Vec& y)>;

// Prepared posteriors for a batch of observations. Per-observation failures
// (posterior not computable at the sampled y) are counted and skipped, and
// the failure rate is policed by the callers that own a tolerance for it.
class PosteriorCache {
 public:
  PosteriorCache() = default;

  const std::vector<PreparedPosterior>& items() const { return items_; }
  const std::vector<Vec>& observations() const { return obs_; }
  long n_failed() const { return n_failed_; }
  const std::vector<std::string>& failure_messages() const { return failure_messages_; }
  std::size_t size() const { return items_.size(); }
  double failure_rate() const {
    const double total = static_cast<double>(items_.size()) + static_cast<double>(n_failed_);
    return total == 0.0 ? 0.0 : static_cast<double>(n_failed_) / total;
  }

  static PosteriorCache build(const GenerativeModel& model, const ObservationBatch& batch,
                              int threads = 1);

 private:
  std::vector<PreparedPosterior> items_;
  std::vector<Vec> obs_;
  long n_failed_ = 0;
  std::vector<std::string> failure_messages_;
};

inline PosteriorCache PosteriorCache::build(const GenerativeModel& model,
                                            const ObservationBatch& batch, int threads) {
  PosteriorCache cache;
  const std::size_t n = batch.obs.size();
  std::vector<PreparedPosterior> slots(n);
  std::vector<char> ok(n, 0);
  std::vector<std::string> errs(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      slots[i] = prepare(model.posterior(batch.obs[i]));
      ok[i] = 1;
    } catch (const Error& e) {
      errs[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (ok[i]) {
      cache.items_.push_back(std::move(slots[i]));
      cache.obs_.push_back(batch.obs[i]);
    } else {
      ++cache.n_failed_;
      if (cache.failure_messages_.size() < 8) cache.failure_messages_.push_back(errs[i]);
    }
  }
  if (cache.items_.empty()) throw InvalidInput("PosteriorCache: no usable observations");
  return cache;
}

// Conditional mean squared error of an arbitrary point estimate at one
// posterior: E{||X - e||^2 | Y} = tr Sigma + ||e - mean||^2.
inline double mse_summand(const PreparedPosterior& w, const Vec& est) {
  const Vec a = sub(w.p.mean, est);
  return w.tr_cov + dot(a, a);
}

// Conditional variance of the squared loss:
// Var(||X - e||^2 | Y) = Var(||Z||^2|Y) + 4 a^T Sigma a + 4 a^T t3, a = mean - e.
inline double sev_summand(const PreparedPosterior& w, const Vec& est) {
  const Vec a = sub(w.p.mean, est);
  return w.var_sqnorm + 4.0 * w.p.cov.quadratic_form(a) + 4.0 * dot(a, w.t3);
}

inline FunctionalEstimate estimate_from_summands(const std::vector<double>& summands) {
  const MeanSe ms = mean_and_se(summands);
  return {ms.mean, ms.std_error, ms.n};
}

namespace functional_detail {

template <typename Summand>
FunctionalEstimate average_over(const PosteriorCache& cache, const EstimatorFn& est,
                                Summand&& summand) {
  std::vector<double> vals(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const PreparedPosterior& w = cache.items()[i];
    const Vec e = est(w, cache.observations()[i]);
    if (static_cast<int>(e.size()) != w.dim() || !all_finite(e))
      throw InvalidInput("estimator returned a bad point estimate");
    vals[i] = summand(w, e);
  }
  return estimate_from_summands(vals);
}

}  // namespace functional_detail

// mse(est) = E{||X - est(Y)||^2}, via the conditional bias decomposition.
inline FunctionalEstimate mse_of(const PosteriorCache& cache, const EstimatorFn& est) {
  return functional_detail::average_over(cache, est, mse_summand);
}

// sev(est) = E{Var(||X - est(Y)||^2 | Y)}, fully expanded conditional route.
inline FunctionalEstimate sev_direct(const PosteriorCache& cache, const EstimatorFn& est) {
  return functional_detail::average_over(cache, est, sev_summand);
}

inline constexpr double kSevQuadraticScale = 4.0;

// Fast route for sev: baseline (sev at the variance-optimal endpoint) plus
// the calibrated quadratic correction
//   sev(est) = sev(X*_inf) + 4 E{(est - X*_inf)^T Sigma (est - X*_inf)}.
// The scale is an exact identity, not a fit; tests cross-check it against
// the direct route.
inline FunctionalEstimate sev_quadratic(const PosteriorCache& cache, const EstimatorFn& est,
                                        const FunctionalEstimate& baseline) {
  std::vector<double> vals(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const PreparedPosterior& w = cache.items()[i];
    const Vec e = est(w, cache.observations()[i]);
    if (static_cast<int>(e.size()) != w.dim() || !all_finite(e))
      throw InvalidInput("estimator returned a bad point estimate");
    const Vec g = sub(e, w.x_inf);
    vals[i] = kSevQuadraticScale * w.p.cov.quadratic_form(g);
  }
  const MeanSe ms = mean_and_se(vals);
  FunctionalEstimate out;
  out.value = baseline.value + ms.mean;
  out.std_error = std::sqrt(baseline.std_error * baseline.std_error + ms.std_error * ms.std_error);
  out.n_samples = ms.n;
  return out;
}

// Quadratic route with a built-in agreement check against the direct route.
// Tolerance: three combined standard errors plus a deterministic floor for
// closed-form (zero standard error) paths.
inline FunctionalEstimate sev_quadratic_checked(const PosteriorCache& cache, const EstimatorFn& est,
                                                const FunctionalEstimate& baseline,
                                                double deterministic_tol = 1e-9) {
  const FunctionalEstimate fast = sev_quadratic(cache, est, baseline);
  const FunctionalEstimate direct = sev_direct(cache, est);
  const double se = std::sqrt(fast.std_error * fast.std_error + direct.std_error * direct.std_error);
  const double scale = std::max({1.0, std::abs(fast.value), std::abs(direct.value)});
  if (std::abs(fast.value - direct.value) > 3.0 * se + deterministic_tol * scale)
    throw ConsistencyError("sev_quadratic: quadratic and direct routes disagree");
  return fast;
}

// One point of the mse/sev frontier, evaluated at the optimal estimator for
// the given risk weight on a shared posterior cache.
struct FrontierPoint {
  double mu = 0.0;
  FunctionalEstimate mse;
  FunctionalEstimate sev;
  double product = 0.0;
  double product_std_error = 0.0;
};

namespace functional_detail {

struct SummandPair {
  std::vector<double> mse;
  std::vector<double> sev;
};

inline SummandPair curve_summands(const PosteriorCache& cache, double mu) {
  SummandPair s;
  s.mse.resize(cache.size());
  s.sev.resize(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const PreparedPosterior& w = cache.items()[i];
    const Vec e = risk_aware_estimate(w, mu);
    s.mse[i] = mse_summand(w, e);
    s.sev[i] = sev_summand(w, e);
  }
  return s;
}

inline FrontierPoint point_from_summands(double mu, const SummandPair& s) {
  FrontierPoint pt;
  pt.mu = mu;
  const MeanSe m = mean_and_se(s.mse);
  const MeanSe v = mean_and_se(s.sev);
  pt.mse = {m.mean, m.std_error, m.n};
  pt.sev = {v.mean, v.std_error, v.n};
  pt.product = m.mean * v.mean;
  const double cov = covariance_of_means(s.mse, s.sev);
  const double var_prod = v.mean * v.mean * m.std_error * m.std_error +
                          m.mean * m.mean * v.std_error * v.std_error +
                          2.0 * m.mean * v.mean * cov;
  pt.product_std_error = std::sqrt(std::max(0.0, var_prod));
  return pt;
}

}  // namespace functional_detail

inline FrontierPoint frontier_point(const PosteriorCache& cache, double mu) {
  check_mu(mu);
  return functional_detail::point_from_summands(mu, functional_detail::curve_summands(cache, mu));
}

// Convenience wrappers that build the cache on the fly. The cache-based
// overloads are the primary interface; everything downstream reuses one
// posterior computation per observation.
inline FunctionalEstimate mse_of(const GenerativeModel& model, const EstimatorFn& est,
                                 const ObservationBatch& batch, int threads = 1) {
  return mse_of(PosteriorCache::build(model, batch, threads), est);
}

inline FunctionalEstimate sev_direct(const GenerativeModel& model, const EstimatorFn& est,
                                     const ObservationBatch& batch, int threads = 1) {
  return sev_direct(PosteriorCache::build(model, batch, threads), est);
}

inline FrontierPoint frontier_point(const GenerativeModel& model, double mu,
                                    const ObservationBatch& batch, int threads = 1) {
  return frontier_point(PosteriorCache::build(model, batch, threads), mu);
}

// Probe estimator constructors.

inline EstimatorFn estimator_conditional_mean() {
  return [](const PreparedPosterior& w, const Vec&) { return w.p.mean; };
}

inline EstimatorFn estimator_constant(Vec c) {
  return [c = std::move(c)](const PreparedPosterior& w, const Vec&) {
    if (c.size() == 1 && w.dim() > 1) return Vec(static_cast<std::size_t>(w.dim()), c[0]);
    return c;
  };
}

// scale * mean + shift, elementwise.
inline EstimatorFn estimator_affine(double scale, double shift) {
  return [scale, shift](const PreparedPosterior& w, const Vec&) {
    Vec e = w.p.mean;
    for (double& x : e) x = scale * x + shift;
    return e;
  };
}

// (1 - t) X*_0 + t X*_inf; for t in [0, 1] this walks the optimal chord.
inline EstimatorFn estimator_mix(double t) {
  return [t](const PreparedPosterior& w, const Vec&) {
    Vec e(w.p.mean.size());
    for (std::size_t i = 0; i < e.size(); ++i)
      e[i] = (1.0 - t) * w.p.mean[i] + t * w.x_inf[i];
    return e;
  };
}

inline EstimatorFn estimator_risk_aware(double mu) {
  check_mu(mu);
  return [mu](const PreparedPosterior& w, const Vec&) { return risk_aware_estimate(w, mu); };
}

}  // namespace riskmse
