#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "riskmse/model.hpp"
#include "riskmse/numerics/quadrature.hpp"

namespace riskmse {

// Scalar exponential state observed through multiplicative-scale additive
// noise: X ~ Exponential(mean x_mean), Y = X + v with v | X ~ N(0, (c X)^2).
// The posterior has no closed form; raw moments come from adaptive
// quadrature of the unnormalized posterior density on (0, inf).
namespace exp_noise_detail {

class Model final : public GenerativeModel::Impl {
 public:
  Model(double x_mean, double noise_factor) : x_mean_(x_mean), c_(noise_factor) {
    if (!(x_mean_ > 0.0)) throw InvalidInput("exp_noise: x_mean must be positive");
    if (!(c_ > 0.0)) throw InvalidInput("exp_noise: noise_factor must be positive");
  }

  std::string name() const override { return "exp_noise"; }
  int state_dim() const override { return 1; }
  int obs_dim() const override { return 1; }

  Vec sample_observation(Sampler& rng) const override {
    const double x = rng.exponential(x_mean_);
    return {x + c_ * x * rng.normal()};
  }

  // log of the unnormalized posterior density in x, for observation y.
  double log_weight(double x, double y) const {
    const double resid = (y - x) / (c_ * x);
    return -x / x_mean_ - std::log(x) - 0.5 * resid * resid;
  }

  PosteriorSummary posterior(const Vec& y_vec) const override {
    const double y = y_vec[0];

    // Locate the density peak on a log grid so the integrand can be rescaled
    // to order one before quadrature.
    const double span = std::max(std::abs(y), x_mean_);
    double best_x = span;
    double best_lw = -std::numeric_limits<double>::infinity();
    const int kScan = 400;
    const double lo_exp = std::log(span * 1e-8);
    const double hi_exp = std::log(span * 1e3);
    for (int i = 0; i < kScan; ++i) {
      const double x = std::exp(lo_exp + (hi_exp - lo_exp) * i / (kScan - 1));
      const double lw = log_weight(x, y);
      if (lw > best_lw) {
        best_lw = lw;
        best_x = x;
      }
    }
    if (!std::isfinite(best_lw))
      throw InvalidInput("exp_noise: observation outside numeric support");
    const double offset = best_lw;

    std::array<double, 5> raw;
    double norm = 0.0;
    for (int k = 0; k <= 4; ++k) {
      const double scale_k = std::pow(best_x, k);
      const auto integrand = [&](double x) {
        const double lw = log_weight(x, y) - offset;
        if (lw < -1000.0) return 0.0;
        return std::exp(lw) * std::pow(x / best_x, k);
      };
      const QuadResult q = integrate_1d(integrand, 0.0, std::numeric_limits<double>::infinity(),
                                        1e-12, 1e-9, 5000);
      if (k == 0) {
        norm = q.value;
        if (!(norm > 0.0) || !std::isfinite(norm))
          throw InvalidInput("exp_noise: observation outside numeric support");
        raw[0] = 1.0;
      } else {
        raw[static_cast<std::size_t>(k)] = q.value / norm * scale_k;
      }
    }

    RawMomentTable table = RawMomentTable::independent({raw});
    return summary_from_raw_table(table);
  }

  double x_mean() const { return x_mean_; }
  double noise_factor() const { return c_; }

 private:
  double x_mean_;
  double c_;
};

}  // namespace exp_noise_detail

inline GenerativeModel make_exp_noise(double x_mean = 2.0, double noise_factor = 3.0) {
  return GenerativeModel(std::make_shared<exp_noise_detail::Model>(x_mean, noise_factor));
}

}  // namespace riskmse
