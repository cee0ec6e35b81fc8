#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "riskmse/errors.hpp"
#include "riskmse/moments.hpp"
#include "riskmse/numerics/algebra.hpp"
#include "riskmse/numerics/rng.hpp"

namespace riskmse {

// Everything the estimators and functionals need about one conditional law
// X | Y = y: first and second moments, the third-order statistic
// R(Y) = E{||X||^2 X | Y} - E{||X||^2 | Y} E{X | Y}, and a raw-moment oracle
// good up to total degree 4.
struct PosteriorSummary {
  Vec mean;
  SymMatrix cov;
  Vec r_stat;
  MomentOracle oracle;

  int dim() const { return static_cast<int>(mean.size()); }

  void validate() const {
    const int n = dim();
    if (n == 0) throw InvalidInput("PosteriorSummary: empty state");
    if (cov.dim() != n || static_cast<int>(r_stat.size()) != n)
      throw InvalidInput("PosteriorSummary: dimension mismatch");
    if (!all_finite(mean) || !all_finite(r_stat) || !cov.finite())
      throw InvalidInput("PosteriorSummary: non-finite entries");
    if (!oracle) throw InvalidInput("PosteriorSummary: missing moment oracle");
  }
};

// Builds a summary whose mean/cov/r_stat are all derived from one raw-moment
// table, so the pieces are mutually consistent by construction.
inline PosteriorSummary summary_from_raw_table(const RawMomentTable& table) {
  PosteriorSummary p;
  const int n = table.dim();
  p.oracle = table.oracle();
  p.mean = mean_from_raw(p.oracle, n);
  p.cov = covariance_from_raw(p.oracle, p.mean);
  p.r_stat = r_statistic(p.oracle, n);
  p.validate();
  return p;
}

// A joint law of (X, Y) exposed through the two operations the toolkit
// needs: drawing observations from the marginal of Y and producing the
// posterior summary of X given a concrete y. Implementations are immutable
// and safe to share across threads.
class GenerativeModel {
 public:
  class Impl {
   public:
    virtual ~Impl() = default;
    virtual std::string name() const = 0;
    virtual int state_dim() const = 0;
    virtual int obs_dim() const = 0;
    virtual Vec sample_observation(Sampler& rng) const = 0;
    virtual PosteriorSummary posterior(const Vec& y) const = 0;
  };

  explicit GenerativeModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {
    if (!impl_) throw InvalidInput("GenerativeModel: null implementation");
  }

  const std::string name() const { return impl_->name(); }
  int state_dim() const { return impl_->state_dim(); }
  int obs_dim() const { return impl_->obs_dim(); }

  // A model with no informative observation channel; the whole state is
  // hidden and the conditional law collapses to the prior.
  bool totally_hidden() const { return impl_->obs_dim() == 0; }

  Vec sample_observation(Sampler& rng) const { return impl_->sample_observation(rng); }

  PosteriorSummary posterior(const Vec& y) const {
    if (static_cast<int>(y.size()) != impl_->obs_dim())
      throw InvalidInput("posterior: observation dimension mismatch for model " + name());
    if (!all_finite(y)) throw InvalidInput("posterior: non-finite observation");
    PosteriorSummary p = impl_->posterior(y);
    p.validate();
    return p;
  }

 private:
  std::shared_ptr<const Impl> impl_;
};

// A batch of observations drawn from the marginal law of Y. For totally
// hidden models the batch holds the single trivial observation (an empty
// vector), and downstream averages reduce to plain evaluations.
struct ObservationBatch {
  std::vector<Vec> obs;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t size() const { return obs.size(); }
};

inline ObservationBatch sample_observations(const GenerativeModel& model, long count,
                                            std::uint64_t seed, std::uint64_t stream = 0) {
  if (count < 1) throw InvalidInput("sample_observations: count must be positive");
  ObservationBatch batch;
  batch.seed = seed;
  batch.stream = stream;
  if (model.totally_hidden()) {
    batch.obs.push_back(Vec{});
    return batch;
  }
  batch.obs.resize(static_cast<std::size_t>(count));
  const RngStream root(seed, stream);
  for (long k = 0; k < count; ++k) {
    Sampler s(root.substream(static_cast<std::uint64_t>(k)));
    batch.obs[static_cast<std::size_t>(k)] = model.sample_observation(s);
  }
  return batch;
}

}  // namespace riskmse
