#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>

#include "riskmse/model.hpp"

namespace riskmse {

// Multiplicative lognormal channel: Y = X W with log X ~ N(0, s_x) and
// log W ~ N(0, s_w) independent. Conditioning is Gaussian in log space, so
// X | Y is lognormal with closed-form moments of every order.
namespace lognormal_mult_detail {

class Model final : public GenerativeModel::Impl {
 public:
  Model(double s_x, double s_w) : s_x_(s_x), s_w_(s_w) {
    if (!(s_x_ > 0.0) || !(s_w_ > 0.0))
      throw InvalidInput("lognormal_mult: log variances must be positive");
  }

  std::string name() const override { return "lognormal_mult"; }
  int state_dim() const override { return 1; }
  int obs_dim() const override { return 1; }

  Vec sample_observation(Sampler& rng) const override {
    const double log_x = std::sqrt(s_x_) * rng.normal();
    const double log_w = std::sqrt(s_w_) * rng.normal();
    return {std::exp(log_x + log_w)};
  }

  PosteriorSummary posterior(const Vec& y_vec) const override {
    const double y = y_vec[0];
    if (!(y > 0.0)) throw InvalidInput("lognormal_mult: observation must be positive");
    const double t = std::log(y);
    const double mu_p = s_x_ * t / (s_x_ + s_w_);
    const double v_p = s_x_ * s_w_ / (s_x_ + s_w_);
    std::array<double, 5> raw;
    for (int k = 0; k <= 4; ++k) raw[static_cast<std::size_t>(k)] = std::exp(k * mu_p + 0.5 * k * k * v_p);
    return summary_from_raw_table(RawMomentTable::independent({raw}));
  }

  double s_x() const { return s_x_; }
  double s_w() const { return s_w_; }

 private:
  double s_x_;
  double s_w_;
};

}  // namespace lognormal_mult_detail

inline GenerativeModel make_lognormal_mult(double s_x = 1.0, double s_w = 0.25) {
  return GenerativeModel(std::make_shared<lognormal_mult_detail::Model>(s_x, s_w));
}

}  // namespace riskmse
