#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskmse/model.hpp"

namespace riskmse {

// Totally hidden models: no observation channel, so the posterior equals the
// prior and the single trivial observation carries the whole law. Each
// coordinate is an independent scalar distribution with closed-form raw
// moments.
namespace hidden {

struct Gamma {
  double shape;
  double scale;
};
struct Lognormal {
  double log_mean;
  double log_var;
};
struct Uniform {
  double lo;
  double hi;
};

using Coordinate = std::variant<Gamma, Lognormal, Uniform>;

inline std::array<double, 5> raw_moments(const Coordinate& c) {
  std::array<double, 5> m{1.0, 0.0, 0.0, 0.0, 0.0};
  if (const auto* g = std::get_if<Gamma>(&c)) {
    if (!(g->shape > 0.0) || !(g->scale > 0.0))
      throw InvalidInput("gamma coordinate: shape and scale must be positive");
    double v = 1.0;
    for (int k = 1; k <= 4; ++k) {
      v *= g->scale * (g->shape + (k - 1));
      m[static_cast<std::size_t>(k)] = v;
    }
  } else if (const auto* l = std::get_if<Lognormal>(&c)) {
    if (!(l->log_var > 0.0)) throw InvalidInput("lognormal coordinate: log variance must be positive");
    for (int k = 1; k <= 4; ++k)
      m[static_cast<std::size_t>(k)] = std::exp(k * l->log_mean + 0.5 * k * k * l->log_var);
  } else {
    const auto& u = std::get<Uniform>(c);
    if (!(u.hi > u.lo)) throw InvalidInput("uniform coordinate: hi must be above lo");
    for (int k = 1; k <= 4; ++k) {
      const double num = std::pow(u.hi, k + 1) - std::pow(u.lo, k + 1);
      m[static_cast<std::size_t>(k)] = num / ((k + 1) * (u.hi - u.lo));
    }
  }
  return m;
}

class Model final : public GenerativeModel::Impl {
 public:
  Model(std::string name, std::vector<Coordinate> coords)
      : name_(std::move(name)), dim_(static_cast<int>(coords.size())) {
    if (coords.empty()) throw InvalidInput(name_ + ": needs at least one coordinate");
    std::vector<std::array<double, 5>> raw;
    raw.reserve(coords.size());
    for (const auto& c : coords) raw.push_back(raw_moments(c));
    summary_ = summary_from_raw_table(RawMomentTable::independent(raw));
  }

  std::string name() const override { return name_; }
  int state_dim() const override { return dim_; }
  int obs_dim() const override { return 0; }

  Vec sample_observation(Sampler&) const override { return {}; }

  PosteriorSummary posterior(const Vec&) const override { return summary_; }

 private:
  std::string name_;
  int dim_;
  PosteriorSummary summary_;
};

}  // namespace hidden

// Product of independent gamma coordinates, fully hidden.
inline GenerativeModel make_gamma_hidden(const Vec& shape, const Vec& scale) {
  if (shape.size() != scale.size() || shape.empty())
    throw InvalidInput("make_gamma_hidden: shape/scale size mismatch");
  std::vector<hidden::Coordinate> coords;
  for (std::size_t i = 0; i < shape.size(); ++i)
    coords.push_back(hidden::Gamma{shape[i], scale[i]});
  return GenerativeModel(std::make_shared<hidden::Model>("gamma_hidden", std::move(coords)));
}

inline GenerativeModel make_gamma_hidden(double shape, double scale) {
  return make_gamma_hidden(Vec{shape}, Vec{scale});
}

// Product of independent lognormal coordinates, fully hidden.
inline GenerativeModel make_lognormal_hidden(const Vec& log_mean, const Vec& log_var) {
  if (log_mean.size() != log_var.size() || log_mean.empty())
    throw InvalidInput("make_lognormal_hidden: log_mean/log_var size mismatch");
  std::vector<hidden::Coordinate> coords;
  for (std::size_t i = 0; i < log_mean.size(); ++i)
    coords.push_back(hidden::Lognormal{log_mean[i], log_var[i]});
  return GenerativeModel(std::make_shared<hidden::Model>("lognormal_hidden", std::move(coords)));
}

inline GenerativeModel make_lognormal_hidden(double log_mean, double log_var) {
  return make_lognormal_hidden(Vec{log_mean}, Vec{log_var});
}

// Product of independent uniform coordinates, fully hidden. Symmetric, so
// conditional third moments vanish and the optimal curve collapses to the
// mean.
inline GenerativeModel make_uniform_hidden(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.empty())
    throw InvalidInput("make_uniform_hidden: lo/hi size mismatch");
  std::vector<hidden::Coordinate> coords;
  for (std::size_t i = 0; i < lo.size(); ++i) coords.push_back(hidden::Uniform{lo[i], hi[i]});
  return GenerativeModel(std::make_shared<hidden::Model>("uniform_hidden", std::move(coords)));
}

inline GenerativeModel make_uniform_hidden(double lo, double hi) {
  return make_uniform_hidden(Vec{lo}, Vec{hi});
}

}  // namespace riskmse
