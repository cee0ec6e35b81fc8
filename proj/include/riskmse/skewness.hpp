#pragma once

#include <cmath>

#include "riskmse/margin.hpp"
#include "riskmse/models/gaussian.hpp"
#include "riskmse/models/hidden.hpp"

namespace riskmse {

// Skewness magnitude of a model: twice the square root of the expected
// hedgeable margin. Zero (within tolerance) for skew-symmetric models.
struct SkewnessValue {
  double d = 0.0;
  double std_error = 0.0;
};

inline SkewnessValue skewness_d(const PosteriorCache& cache) {
  std::vector<double> c(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) c[i] = hedge_margin(cache.items()[i]);
  const MeanSe m = mean_and_se(c);
  SkewnessValue s;
  if (m.mean > 0.0) {
    s.d = 2.0 * std::sqrt(m.mean);
    s.std_error = m.std_error / std::sqrt(m.mean);
  }
  return s;
}

inline SkewnessValue skewness_d(const GenerativeModel& model, const ObservationBatch& batch,
                                int threads = 1) {
  return skewness_d(PosteriorCache::build(model, batch, threads));
}

// Scalar reduction check: for a one-dimensional totally hidden state, d
// equals the absolute Pearson moment coefficient of skewness.
struct PearsonCheck {
  SkewnessValue d;
  double pearson = 0.0;
  double gap = 0.0;
};

inline PearsonCheck pearson_reduction_check(const GenerativeModel& model,
                                            const ObservationBatch& batch) {
  if (model.state_dim() != 1 || !model.totally_hidden())
    throw InvalidInput("pearson_reduction_check: needs a scalar totally hidden model");
  const PosteriorSummary p = model.posterior(Vec{});
  const double m1 = p.oracle(MultiIndex{1});
  const double m2 = p.oracle(MultiIndex{2});
  const double m3 = p.oracle(MultiIndex{3});
  const double var = m2 - m1 * m1;
  if (!(var > 0.0)) throw UndefinedQuantity("pearson_reduction_check: zero variance");
  const double mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
  PearsonCheck chk;
  chk.d = skewness_d(model, batch);
  chk.pearson = std::abs(mu3) / std::pow(var, 1.5);
  chk.gap = std::abs(chk.d.d - chk.pearson);
  return chk;
}

// Relative skewness pseudometric between two models, computed from their
// cached d values: sqrt|d_a^2 - d_b^2|.
struct RelativeSkewness {
  double value = 0.0;
};

inline RelativeSkewness relative_skewness(const SkewnessValue& a, const SkewnessValue& b) {
  return {std::sqrt(std::abs(a.d * a.d - b.d * b.d))};
}

inline RelativeSkewness relative_skewness(const GenerativeModel& model_a,
                                          const GenerativeModel& model_b,
                                          const ObservationBatch& batch_a,
                                          const ObservationBatch& batch_b, int threads = 1) {
  return relative_skewness(skewness_d(model_a, batch_a, threads),
                           skewness_d(model_b, batch_b, threads));
}

// Inverse design: a scalar model whose skewness magnitude is the requested
// alpha, via the gamma family (d = 2/sqrt(shape), scale-free). Zero alpha
// returns the symmetric gaussian reference.
inline GenerativeModel gamma_inverse_design(double alpha) {
  if (std::isnan(alpha) || alpha < 0.0)
    throw InvalidInput("gamma_inverse_design: alpha must be >= 0");
  if (alpha == 0.0) return make_gaussian(1, 1.0, 1.0);
  const double shape = 4.0 / (alpha * alpha);
  return make_gamma_hidden(shape, 1.0);
}

}  // namespace riskmse
