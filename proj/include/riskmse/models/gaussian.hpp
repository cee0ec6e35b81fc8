#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "riskmse/model.hpp"
#include "riskmse/numerics/algebra.hpp"

namespace riskmse {

// Jointly Gaussian (X, Y). The posterior is Gaussian with a y-independent
// covariance, conditional third central moments vanish, and the optimal
// curve collapses to the conditional mean for every risk weight.
struct GaussianSpec {
  Vec mean_x;
  Vec mean_y;
  SymMatrix cov_xx;
  Mat cov_xy;   // state_dim x obs_dim
  SymMatrix cov_yy;
};

namespace gaussian_detail {

class Model final : public GenerativeModel::Impl {
 public:
  explicit Model(GaussianSpec spec) : spec_(std::move(spec)) {
    n_ = static_cast<int>(spec_.mean_x.size());
    m_ = static_cast<int>(spec_.mean_y.size());
    if (n_ == 0) throw InvalidInput("gaussian: empty state");
    if (spec_.cov_xx.dim() != n_ || spec_.cov_xy.rows() != n_ || spec_.cov_xy.cols() != m_ ||
        spec_.cov_yy.dim() != m_)
      throw InvalidInput("gaussian: covariance block dimensions do not match the means");
    if (!spec_.cov_xx.finite() || !spec_.cov_yy.finite() || !all_finite(spec_.mean_x) ||
        !all_finite(spec_.mean_y))
      throw InvalidInput("gaussian: non-finite parameters");

    if (m_ > 0) {
      yy_eig_ = eig_sym(spec_.cov_yy);
      const SymMatrix yy_inv = pinv(yy_eig_);
      // gain = cov_xy * cov_yy^+
      gain_ = Mat(n_, m_);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < m_; ++j) {
          double s = 0.0;
          for (int k = 0; k < m_; ++k) s += spec_.cov_xy(i, k) * yy_inv(k, j);
          gain_(i, j) = s;
        }
      // posterior covariance = cov_xx - gain * cov_xy^T
      Mat c(n_, n_);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
          double s = 0.0;
          for (int k = 0; k < m_; ++k) s += gain_(i, k) * spec_.cov_xy(j, k);
          c(i, j) = spec_.cov_xx(i, j) - s;
        }
      post_cov_ = SymMatrix::from_dense(c);
      // Square root of cov_yy for sampling.
      sqrt_yy_ = Mat(m_, m_);
      for (int k = 0; k < m_; ++k) {
        const double root = std::sqrt(std::max(0.0, yy_eig_.values[k]));
        for (int i = 0; i < m_; ++i) sqrt_yy_(i, k) = yy_eig_.vectors(i, k) * root;
      }
    } else {
      post_cov_ = spec_.cov_xx;
    }
  }

  std::string name() const override { return "gaussian"; }
  int state_dim() const override { return n_; }
  int obs_dim() const override { return m_; }

  Vec sample_observation(Sampler& rng) const override {
    Vec z(m_);
    for (int i = 0; i < m_; ++i) z[i] = rng.normal();
    Vec y = sqrt_yy_.apply(z);
    for (int i = 0; i < m_; ++i) y[i] += spec_.mean_y[i];
    return y;
  }

  PosteriorSummary posterior(const Vec& y) const override {
    Vec mean = spec_.mean_x;
    if (m_ > 0) {
      const Vec innov = sub(y, spec_.mean_y);
      const Vec corr = gain_.apply(innov);
      mean = add(spec_.mean_x, corr);
    }
    PosteriorSummary p;
    p.mean = mean;
    p.cov = post_cov_;
    p.oracle = RawMomentTable::gaussian(mean, post_cov_).oracle();
    p.r_stat = scaled(post_cov_.apply(mean), 2.0);
    return p;
  }

 private:
  GaussianSpec spec_;
  int n_ = 0;
  int m_ = 0;
  EigenDecomp yy_eig_;
  Mat gain_;
  Mat sqrt_yy_;
  SymMatrix post_cov_;
};

}  // namespace gaussian_detail

inline GenerativeModel make_gaussian(GaussianSpec spec) {
  return GenerativeModel(std::make_shared<gaussian_detail::Model>(std::move(spec)));
}

// Convenience construction: X ~ N(0, prior_var I_n), Y = obs_scale (X + w)
// with w ~ N(0, noise_var I_n). obs_scale only relabels the observation, so
// any two scales induce the same family of posteriors.
inline GenerativeModel make_gaussian(int dim, double prior_var, double noise_var,
                                     double obs_scale = 1.0) {
  if (dim < 1) throw InvalidInput("make_gaussian: dim must be positive");
  if (!(prior_var >= 0.0) || !(noise_var >= 0.0))
    throw InvalidInput("make_gaussian: variances must be nonnegative");
  if (!(obs_scale != 0.0)) throw InvalidInput("make_gaussian: obs_scale must be nonzero");
  GaussianSpec spec;
  spec.mean_x = Vec(dim, 0.0);
  spec.mean_y = Vec(dim, 0.0);
  spec.cov_xx = SymMatrix::identity(dim, prior_var);
  spec.cov_xy = Mat(dim, dim);
  for (int i = 0; i < dim; ++i) spec.cov_xy(i, i) = obs_scale * prior_var;
  spec.cov_yy = SymMatrix::identity(dim, obs_scale * obs_scale * (prior_var + noise_var));
  return make_gaussian(std::move(spec));
}

}  // namespace riskmse
