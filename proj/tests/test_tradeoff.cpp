#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "riskmse/models/exp_noise.hpp"
#include "riskmse/models/gaussian.hpp"
#include "riskmse/models/hidden.hpp"
#include "riskmse/models/lognormal_mult.hpp"
#include "riskmse/tradeoff.hpp"

using namespace riskmse;
using Catch::Approx;

namespace {

PosteriorCache exp1_cache() {
  const GenerativeModel m = make_gamma_hidden(1.0, 1.0);
  return PosteriorCache::build(m, sample_observations(m, 4, 1));
}

double closed_sev(double mu) { return 4.0 + 4.0 / ((1.0 + 2.0 * mu) * (1.0 + 2.0 * mu)); }

}  // namespace

TEST_CASE("risk weight grids are sorted and padded with both endpoints") {
  const std::vector<double> g = log_mu_grid(1e-2, 1e2, 5);
  REQUIRE(g.size() == 7);
  REQUIRE(g.front() == 0.0);
  REQUIRE(std::isinf(g.back()));
  REQUIRE(g[1] == Approx(1e-2));
  REQUIRE(g[3] == Approx(1.0));
  REQUIRE(g[5] == Approx(1e2));
  for (std::size_t i = 1; i < g.size(); ++i) REQUIRE(g[i] > g[i - 1]);

  const std::vector<double> d = default_mu_grid();
  REQUIRE(d.size() == 62);
  REQUIRE(d.front() == 0.0);
  REQUIRE(std::isinf(d.back()));

  REQUIRE_THROWS_AS(log_mu_grid(0.0, 1.0, 4), InvalidInput);
  REQUIRE_THROWS_AS(log_mu_grid(2.0, 1.0, 4), InvalidInput);
  REQUIRE_THROWS_AS(log_mu_grid(1.0, 2.0, 1), InvalidInput);
}

TEST_CASE("the exponential frontier has a machine-precision interior minimizer") {
  const PosteriorCache cache = exp1_cache();
  const FrontierCurve curve = frontier_scan(cache, default_mu_grid());

  REQUIRE(curve.points.size() == curve.grid.size());
  REQUIRE(curve.mu_star == Approx(0.5).margin(1e-9));
  REQUIRE(curve.h_value == Approx(6.25).margin(1e-12));
  REQUIRE(curve.h_std_error == 0.0);
  REQUIRE(curve.anchor == Approx(4.0).margin(1e-12));
  REQUIRE(curve.anchor_std_error == 0.0);
  REQUIRE(curve.star.mse.value == Approx(1.25).margin(1e-9));
  REQUIRE(curve.star.sev.value == Approx(5.0).margin(1e-9));
  REQUIRE(curve.star.product == curve.h_value);

  REQUIRE(curve.points.front().mse.value == Approx(1.0).margin(1e-12));
  REQUIRE(curve.points.front().sev.value == Approx(8.0).margin(1e-12));
  REQUIRE(curve.points.back().mse.value == Approx(2.0).margin(1e-12));
  REQUIRE(curve.points.back().sev.value == Approx(4.0).margin(1e-12));

  // h is the floor of the scanned products and sits above the anchor.
  for (const FrontierPoint& pt : curve.points) REQUIRE(pt.product >= curve.h_value - 1e-12);
  REQUIRE(curve.h_value >= curve.anchor);

  // A duplicate-riddled unsorted grid is cleaned up, not double-counted.
  const FrontierCurve messy = frontier_scan(cache, {3.0, 0.5, 0.5, kMuInf, 0.0, 3.0});
  REQUIRE(messy.grid.size() == 4);
  REQUIRE(messy.h_value == Approx(6.25).margin(1e-12));
}

TEST_CASE("summand tables drive paired monotonicity along the curve") {
  const GenerativeModel ln = make_lognormal_mult(1.0, 0.25);
  const PosteriorCache cache = PosteriorCache::build(ln, sample_observations(ln, 600, 2));
  const FrontierCurve curve = frontier_scan(cache, default_mu_grid(), true, true);

  REQUIRE(curve.mse_summands.size() == curve.grid.size());
  REQUIRE(curve.sev_summands.size() == curve.grid.size());
  for (const auto& col : curve.mse_summands) REQUIRE(col.size() == cache.size());

  for (std::size_t i = 0; i + 1 < curve.grid.size(); ++i) {
    const MeanSe dm = paired_difference(curve.mse_summands[i + 1], curve.mse_summands[i]);
    const MeanSe dv = paired_difference(curve.sev_summands[i + 1], curve.sev_summands[i]);
    REQUIRE(dm.mean >= -3.0 * dm.std_error - 1e-10);
    REQUIRE(dv.mean <= 3.0 * dv.std_error + 1e-10);
  }

  const FrontierCurve bare = frontier_scan(cache, default_mu_grid());
  REQUIRE(bare.mse_summands.empty());
  REQUIRE(bare.sev_summands.empty());
}

TEST_CASE("gaussian posteriors collapse the frontier to a single point") {
  const GenerativeModel gs = make_gaussian(2, 1.0, 0.5);
  const PosteriorCache cache = PosteriorCache::build(gs, sample_observations(gs, 300, 3));
  const FrontierCurve curve = frontier_scan(cache, default_mu_grid());
  REQUIRE(curve.h_value == Approx(curve.anchor).epsilon(1e-10));
  for (const FrontierPoint& pt : curve.points) {
    REQUIRE(pt.mse.value == Approx(curve.points.front().mse.value).epsilon(1e-10));
    REQUIRE(pt.sev.value == Approx(curve.points.front().sev.value).epsilon(1e-10));
  }
}

TEST_CASE("probe verdicts compare the product against the frontier floor") {
  const PosteriorCache cache = exp1_cache();
  const FrontierCurve curve = frontier_scan(cache, default_mu_grid());

  const UncertaintyCheck mean_chk = verify_uncertainty(cache, estimator_conditional_mean(), curve);
  REQUIRE(mean_chk.product == Approx(8.0).margin(1e-12));
  REQUIRE(mean_chk.margin == Approx(8.0 - 6.25).margin(1e-12));
  REQUIRE(mean_chk.passed);

  const UncertaintyCheck star_chk =
      verify_uncertainty(cache, estimator_risk_aware(curve.mu_star), curve);
  REQUIRE(star_chk.margin == Approx(0.0).margin(1e-12));
  REQUIRE(star_chk.passed);

  const UncertaintyCheck affine_chk = verify_uncertainty(cache, estimator_affine(1.0, 0.3), curve);
  REQUIRE(affine_chk.product == Approx(6.4964).margin(1e-12));
  REQUIRE(affine_chk.passed);

  // An inflated floor flips the verdict; the margin goes negative.
  FrontierCurve forged = curve;
  forged.h_value = 100.0;
  forged.h_std_error = 0.0;
  const UncertaintyCheck failed = verify_uncertainty(cache, estimator_conditional_mean(), forged);
  REQUIRE_FALSE(failed.passed);
  REQUIRE(failed.margin < 0.0);
}

TEST_CASE("constrained solve finds the smallest feasible risk weight") {
  const PosteriorCache cache = exp1_cache();

  // sev(mu) = 4 + 4/(1+2mu)^2 = 5 at mu = 1/2.
  const double mu5 = solve_constrained(cache, 5.0);
  REQUIRE(mu5 >= 0.5 - 1e-12);
  REQUIRE(mu5 == Approx(0.5).epsilon(2e-3));
  REQUIRE(closed_sev(mu5) <= 5.0 + 1e-12);

  // sev = 4.5 at mu = (sqrt(8) - 1)/2.
  const double target = (std::sqrt(8.0) - 1.0) / 2.0;
  const double mu45 = solve_constrained(cache, 4.5);
  REQUIRE(mu45 >= target - 1e-12);
  REQUIRE(mu45 == Approx(target).epsilon(2e-3));

  // Slack constraints are free; the unconstrained optimum wins.
  REQUIRE(solve_constrained(cache, 8.0) == 0.0);
  REQUIRE(solve_constrained(cache, 100.0) == 0.0);

  // Barely feasible targets force a huge but finite weight.
  const double eps_tight = 4.0 + 1e-10;
  const double mu_tight = solve_constrained(cache, eps_tight);
  REQUIRE(std::isfinite(mu_tight));
  REQUIRE(mu_tight > 1e4);
  REQUIRE(closed_sev(mu_tight) <= eps_tight);

  // Below the variance floor there is no solution; the floor rides along.
  try {
    solve_constrained(cache, 3.9);
    FAIL("expected InfeasibleConstraint");
  } catch (const InfeasibleConstraint& e) {
    REQUIRE(e.sev_floor == Approx(4.0).margin(1e-12));
  }

  REQUIRE_THROWS_AS(solve_constrained(cache, std::nan("")), InvalidInput);
  REQUIRE_THROWS_AS(solve_constrained(cache, 5.0, 0.0), InvalidInput);

  // Convenience overload matches the cache route.
  const GenerativeModel m = make_gamma_hidden(1.0, 1.0);
  REQUIRE(solve_constrained(m, 5.0, sample_observations(m, 4, 1)) == mu5);
}

TEST_CASE("lipschitz constants: closed form, validity, and the known sev gap") {
  const PosteriorCache cache = exp1_cache();
  const LipschitzConstants k = lipschitz_constants(cache);
  REQUIRE(k.k_mse.value == Approx(4.0).margin(1e-12));
  REQUIRE(k.k_sev.value == Approx(4.0).margin(1e-12));
  REQUIRE(k.k_mse.std_error == 0.0);

  // Gaussian posteriors have no spread between the endpoints.
  const GenerativeModel gs = make_gaussian(2, 1.0, 0.5);
  const LipschitzConstants kg =
      lipschitz_constants(PosteriorCache::build(gs, sample_observations(gs, 200, 3)));
  REQUIRE(kg.k_mse.value == Approx(0.0).margin(1e-18));
  REQUIRE(kg.k_sev.value == Approx(0.0).margin(1e-18));

  // On a sampled skewed model: k_mse bounds every mse increment, 4 * k_sev
  // bounds every sev increment, and k_sev alone provably cannot cover the
  // steep approach at mu = 0, where the slope reaches 16 E{sigma^2 ||delta||^2}.
  const GenerativeModel en = make_exp_noise(2.0, 3.0);
  const PosteriorCache ec = PosteriorCache::build(en, sample_observations(en, 400, 5));
  const LipschitzConstants ke = lipschitz_constants(ec);
  const FrontierCurve curve = frontier_scan(ec, default_mu_grid(), false, true);
  const std::size_t n_finite = curve.grid.size() - 1;
  for (std::size_t i = 0; i < n_finite; ++i) {
    for (std::size_t j = i + 1; j < n_finite; ++j) {
      const double dmu = curve.grid[j] - curve.grid[i];
      const MeanSe dm = paired_difference(curve.mse_summands[j], curve.mse_summands[i]);
      const MeanSe dv = paired_difference(curve.sev_summands[j], curve.sev_summands[i]);
      const double mse_cap = ke.k_mse.value * dmu + 3.0 * (dm.std_error + ke.k_mse.std_error * dmu);
      const double sev_cap =
          4.0 * ke.k_sev.value * dmu + 3.0 * (dv.std_error + 4.0 * ke.k_sev.std_error * dmu);
      REQUIRE(std::abs(dm.mean) <= mse_cap + 1e-10);
      REQUIRE(std::abs(dv.mean) <= sev_cap + 1e-10);
    }
  }

  // The uncorrected constant fails on exact arithmetic: Exp(1) grid pair
  // (0, ~1/2) has |dsev| ~ 3 against a cap of ~2 with zero sampling noise.
  const FrontierCurve exact = frontier_scan(cache, default_mu_grid(), false, true);
  bool violated = false;
  for (std::size_t j = 1; j + 1 < exact.grid.size() && !violated; ++j) {
    const double dmu = exact.grid[j] - exact.grid[0];
    const MeanSe dv = paired_difference(exact.sev_summands[j], exact.sev_summands[0]);
    if (std::abs(dv.mean) > k.k_sev.value * dmu + 3.0 * dv.std_error + 1e-10) violated = true;
  }
  REQUIRE(violated);
}

TEST_CASE("endpoint distance bound dominates the closed-form gap") {
  const PosteriorCache cache = exp1_cache();
  // E{||x_mu - x_inf||^2} = 1/(1+2mu)^2 for the exponential family.
  for (double mu : {1.0, 10.0, 1e3}) {
    const double gap = 1.0 / ((1.0 + 2.0 * mu) * (1.0 + 2.0 * mu));
    const double bound = endpoint_distance_bound(cache, mu);
    REQUIRE(bound == Approx(1.0 / (4.0 * mu * mu)).margin(1e-15));
    REQUIRE(gap <= bound);
  }
  REQUIRE_THROWS_AS(endpoint_distance_bound(cache, 0.0), InvalidInput);
  REQUIRE_THROWS_AS(endpoint_distance_bound(cache, -1.0), InvalidInput);
}
