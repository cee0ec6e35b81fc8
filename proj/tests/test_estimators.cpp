#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "riskmse/estimators.hpp"
#include "riskmse/models/gaussian.hpp"
#include "riskmse/models/hidden.hpp"
#include "riskmse/models/lognormal_mult.hpp"

using namespace riskmse;
using Catch::Approx;

namespace {

// A pool of prepared posteriors spanning scalar skewed, vector hidden, and
// jointly gaussian laws, for identity checks.
std::vector<PreparedPosterior> posterior_pool(int count) {
  std::vector<PreparedPosterior> pool;
  const GenerativeModel ln = make_lognormal_mult(1.0, 0.25);
  const GenerativeModel gs = make_gaussian(3, 1.2, 0.6);
  Sampler rng(RngStream(404, 0));
  int i = 0;
  while (static_cast<int>(pool.size()) < count) {
    switch (i++ % 4) {
      case 0:
        pool.push_back(prepare(ln, ln.sample_observation(rng)));
        break;
      case 1:
        pool.push_back(prepare(gs, gs.sample_observation(rng)));
        break;
      case 2: {
        const double k = 0.5 + 4.0 * rng.u01();
        const double t = 0.2 + 2.0 * rng.u01();
        const GenerativeModel g = make_gamma_hidden(Vec{k, 2.0 * k}, Vec{t, t});
        pool.push_back(prepare(g, Vec{}));
        break;
      }
      default: {
        const GenerativeModel g =
            make_lognormal_hidden(Vec{rng.u01(), -rng.u01()}, Vec{0.3 + rng.u01(), 0.2 + rng.u01()});
        pool.push_back(prepare(g, Vec{}));
        break;
      }
    }
  }
  return pool;
}

double rel_gap(const Vec& a, const Vec& b) {
  return norm2(sub(a, b)) / (1.0 + std::max(norm2(a), norm2(b)));
}

}  // namespace

TEST_CASE("optimal family on the unit exponential matches the scalar algebra") {
  const GenerativeModel m = make_gamma_hidden(1.0, 1.0);
  const PreparedPosterior w = prepare(m, Vec{});
  REQUIRE(w.rank == 1);
  REQUIRE(w.tr_cov == Approx(1.0).epsilon(1e-12));
  REQUIRE(risk_aware_estimate(w, 0.0)[0] == Approx(1.0).epsilon(1e-12));
  // (mean + mu R) / (1 + 2 mu sigma) at mu = 1: (1 + 4) / 3.
  REQUIRE(risk_aware_estimate(w, 1.0)[0] == Approx(5.0 / 3.0).epsilon(1e-12));
  REQUIRE(risk_aware_estimate(w, kMuInf)[0] == Approx(2.0).epsilon(1e-12));
  REQUIRE(w.x_inf[0] == Approx(2.0).epsilon(1e-12));
  REQUIRE(delta_x(w)[0] == Approx(-1.0).epsilon(1e-12));
  // The curve interpolates between the endpoints monotonically here.
  double prev = 1.0;
  for (double mu : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    const double v = risk_aware_estimate(w, mu)[0];
    REQUIRE(v > prev);
    REQUIRE(v < 2.0);
    prev = v;
  }
}

TEST_CASE("mu validation rejects negatives and NaN") {
  REQUIRE_THROWS_AS(check_mu(-0.5), InvalidInput);
  REQUIRE_THROWS_AS(check_mu(std::numeric_limits<double>::quiet_NaN()), InvalidInput);
  const GenerativeModel m = make_gamma_hidden(1.0, 1.0);
  const PreparedPosterior w = prepare(m, Vec{});
  REQUIRE_THROWS_AS(risk_aware_estimate(w, -1.0), InvalidInput);
}

TEST_CASE("gaussian posteriors collapse the whole curve to the mean") {
  const GenerativeModel m = make_gaussian(2, 1.0, 0.5);
  Sampler rng(RngStream(9, 0));
  for (int rep = 0; rep < 20; ++rep) {
    const PreparedPosterior w = prepare(m, m.sample_observation(rng));
    for (double mu : {0.0, 0.7, 5.0, kMuInf}) {
      const Vec e = risk_aware_estimate(w, mu);
      REQUIRE(rel_gap(e, w.p.mean) < 1e-10);
    }
    REQUIRE(norm2(delta_x(w)) < 1e-10);
    REQUIRE(skew_symmetry_residual(w) < 1e-10);
  }
}

TEST_CASE("skew residual of the unit exponential is one") {
  const PreparedPosterior w = prepare(make_gamma_hidden(1.0, 1.0), Vec{});
  // Third central moment 2, normalized by 1 + sigma_max^1.5 = 2.
  REQUIRE(skew_symmetry_residual(w) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("curve shift identity matches direct evaluation on a posterior pool") {
  const auto pool = posterior_pool(1000);
  Sampler rng(RngStream(7, 0));
  for (const PreparedPosterior& w : pool) {
    const double mu = std::exp(6.0 * (rng.u01() - 0.5));
    const Vec direct = risk_aware_estimate(w, mu);
    REQUIRE(rel_gap(curve_shift_identity(w, mu), direct) < 1e-10);
    REQUIRE(rel_gap(curve_shift_identity(w, 0.0), risk_aware_estimate(w, 0.0)) < 1e-12);
    REQUIRE(rel_gap(curve_shift_identity(w, kMuInf), w.x_inf) < 1e-10);
  }
}

TEST_CASE("difference identity matches subtracted direct evaluations") {
  const auto pool = posterior_pool(1000);
  Sampler rng(RngStream(8, 0));
  for (const PreparedPosterior& w : pool) {
    const double mu = std::exp(5.0 * (rng.u01() - 0.5));
    const double mu2 = std::exp(5.0 * (rng.u01() - 0.5));
    const Vec direct = sub(risk_aware_estimate(w, mu), risk_aware_estimate(w, mu2));
    REQUIRE(rel_gap(difference_identity(w, mu, mu2), direct) < 1e-10);
    // Antisymmetry and the zero diagonal hold exactly.
    const Vec swapped = difference_identity(w, mu2, mu);
    REQUIRE(rel_gap(difference_identity(w, mu, mu2), scaled(swapped, -1.0)) < 1e-14);
    REQUIRE(norm2(difference_identity(w, mu, mu)) == 0.0);
  }
}

TEST_CASE("rank-deficient posteriors keep the mean on the null space") {
  // Two perfectly correlated coordinates: cov = [[1,1],[1,1]], rank one.
  PosteriorSummary p;
  p.mean = {1.0, 2.0};
  p.cov = SymMatrix(2);
  p.cov.set(0, 0, 1.0);
  p.cov.set(0, 1, 1.0);
  p.cov.set(1, 1, 1.0);
  // Third statistic with a component off the covariance range: that part is
  // unreachable by any estimator and must be discarded, not amplified.
  p.r_stat = {3.0, 1.0};
  p.oracle = [](const MultiIndex&) { return 1.0; };
  const PreparedPosterior w = prepare(p);
  REQUIRE(w.rank == 1);
  REQUIRE(w.null_skew_discarded > 0.0);
  // Null coordinate of u_delta is exactly zero by construction.
  REQUIRE(w.u_delta[1] == 0.0);
  const Vec null_dir = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};
  const double mean_null = dot(p.mean, null_dir);
  for (double mu : {0.0, 0.5, 4.0, kMuInf}) {
    const Vec e = risk_aware_estimate(w, mu);
    REQUIRE(dot(e, null_dir) == Approx(mean_null).margin(1e-12));
  }
  // Zero covariance: the whole family is the mean.
  PosteriorSummary q;
  q.mean = {3.0};
  q.cov = SymMatrix(1);
  q.r_stat = {0.0};
  q.oracle = [](const MultiIndex&) { return 0.0; };
  const PreparedPosterior wz = prepare(q);
  REQUIRE(wz.rank == 0);
  for (double mu : {0.0, 2.0, kMuInf})
    REQUIRE(risk_aware_estimate(wz, mu)[0] == 3.0);
}

TEST_CASE("estimates approach the risk-averse endpoint at rate 1/mu") {
  const auto pool = posterior_pool(40);
  for (const PreparedPosterior& w : pool) {
    if (w.rank == 0) continue;
    const double d3 = norm2(sub(risk_aware_estimate(w, 1e3), w.x_inf));
    const double d4 = norm2(sub(risk_aware_estimate(w, 1e4), w.x_inf));
    const double noise = 1e-12 * (1.0 + norm2(w.x_inf));
    const double bound3 = norm2(w.u_delta) / (2.0 * 1e3 * w.sigma_min_pos);
    REQUIRE(d3 <= bound3 * (1.0 + 1e-9) + noise);
    if (d3 > 1e-9) REQUIRE(d4 == Approx(d3 / 10.0).epsilon(0.01));
  }
}
