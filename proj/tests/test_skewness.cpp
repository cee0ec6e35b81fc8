#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "riskmse/models/lognormal_mult.hpp"
#include "riskmse/skewness.hpp"

using namespace riskmse;
using Catch::Approx;

namespace {

SkewnessValue hidden_d(const GenerativeModel& m) {
  return skewness_d(m, sample_observations(m, 1, 1));
}

}  // namespace

TEST_CASE("gamma skewness is 2/sqrt(shape) and scale-free") {
  for (double kappa : {0.25, 1.0, 4.0, 9.0}) {
    const double expected = 2.0 / std::sqrt(kappa);
    for (double theta : {0.1, 1.0, 10.0}) {
      const SkewnessValue s = hidden_d(make_gamma_hidden(kappa, theta));
      REQUIRE(s.d == Approx(expected).margin(1e-8));
      REQUIRE(s.std_error == 0.0);
    }
  }
}

TEST_CASE("scalar reduction to the Pearson moment coefficient") {
  // Gamma: Pearson skewness 2/sqrt(kappa), exactly the reduction target.
  for (double kappa : {1.0, 2.0, 5.0}) {
    const GenerativeModel m = make_gamma_hidden(kappa, 1.3);
    const PearsonCheck chk = pearson_reduction_check(m, sample_observations(m, 1, 1));
    REQUIRE(chk.pearson == Approx(2.0 / std::sqrt(kappa)).margin(1e-10));
    REQUIRE(chk.gap <= std::max(1e-8, 3.0 * chk.d.std_error));
  }

  // Lognormal: Pearson skewness (e^v + 2) sqrt(e^v - 1).
  for (double v : {0.1, 0.25, 0.5}) {
    const GenerativeModel m = make_lognormal_hidden(0.3, v);
    const PearsonCheck chk = pearson_reduction_check(m, sample_observations(m, 1, 1));
    const double ev = std::exp(v);
    REQUIRE(chk.pearson == Approx((ev + 2.0) * std::sqrt(ev - 1.0)).margin(1e-9));
    REQUIRE(chk.gap <= std::max(1e-8, 3.0 * chk.d.std_error));
  }

  // A symmetric law has no skewness on either side of the identity.
  const GenerativeModel u = make_uniform_hidden(-1.0, 3.0);
  const PearsonCheck uc = pearson_reduction_check(u, sample_observations(u, 1, 1));
  REQUIRE(uc.d.d == Approx(0.0).margin(1e-8));
  REQUIRE(uc.pearson == Approx(0.0).margin(1e-10));
  REQUIRE(uc.gap == Approx(0.0).margin(1e-8));
}

TEST_CASE("the reduction check polices its domain") {
  // Vector-valued hidden state: no scalar Pearson coefficient exists.
  const GenerativeModel vg = make_gamma_hidden(Vec{1.0, 4.0}, Vec{1.0, 1.0});
  REQUIRE_THROWS_AS(pearson_reduction_check(vg, sample_observations(vg, 1, 1)), InvalidInput);

  // Observed models condition on Y; the marginal reduction does not apply.
  const GenerativeModel ln = make_lognormal_mult(1.0, 0.25);
  REQUIRE_THROWS_AS(pearson_reduction_check(ln, sample_observations(ln, 10, 1)), InvalidInput);
}

TEST_CASE("relative skewness is a pseudometric on cached values") {
  RngStream stream(2024, 0);
  Sampler rng(stream);
  for (int trial = 0; trial < 200; ++trial) {
    const SkewnessValue a{5.0 * rng.u01(), 0.0};
    const SkewnessValue b{5.0 * rng.u01(), 0.0};
    const SkewnessValue c{5.0 * rng.u01(), 0.0};
    const double ab = relative_skewness(a, b).value;
    const double ba = relative_skewness(b, a).value;
    const double bc = relative_skewness(b, c).value;
    const double ac = relative_skewness(a, c).value;
    REQUIRE(ab == ba);
    REQUIRE(relative_skewness(a, a).value == 0.0);
    REQUIRE(ac <= ab + bc + 1e-12);
    REQUIRE(ab >= 0.0);
  }
}

TEST_CASE("relative skewness closed-form examples") {
  const SkewnessValue exp1 = hidden_d(make_gamma_hidden(1.0, 1.0));
  const SkewnessValue gam4 = hidden_d(make_gamma_hidden(4.0, 1.0));
  REQUIRE(relative_skewness(exp1, gam4).value == Approx(std::sqrt(3.0)).margin(1e-9));

  const GenerativeModel gs = make_gaussian(1, 1.0, 1.0);
  const SkewnessValue g = skewness_d(gs, sample_observations(gs, 200, 1));
  REQUIRE(relative_skewness(exp1, g).value == Approx(2.0).margin(1e-9));

  // Model-level overload matches the value route.
  const RelativeSkewness direct =
      relative_skewness(make_gamma_hidden(1.0, 1.0), make_gamma_hidden(4.0, 1.0),
                        sample_observations(make_gamma_hidden(1.0, 1.0), 1, 1),
                        sample_observations(make_gamma_hidden(4.0, 1.0), 1, 1));
  REQUIRE(direct.value == Approx(std::sqrt(3.0)).margin(1e-9));
}

TEST_CASE("inverse design hits every requested skewness") {
  for (int k = 1; k <= 20; ++k) {
    const double alpha = 0.5 * k;
    const SkewnessValue s = hidden_d(gamma_inverse_design(alpha));
    REQUIRE(s.d == Approx(alpha).margin(1e-6));
  }
  // Spot values: alpha = 2 is the exponential, alpha = 0.2 needs shape 100.
  REQUIRE(gamma_inverse_design(2.0).posterior(Vec{}).cov(0, 0) ==
          Approx(1.0).margin(1e-12));
  const SkewnessValue tiny = hidden_d(gamma_inverse_design(0.2));
  REQUIRE(tiny.d == Approx(0.2).margin(1e-6));

  // Zero skewness falls back to the symmetric reference model.
  const GenerativeModel ref = gamma_inverse_design(0.0);
  const SkewnessValue zero = skewness_d(ref, sample_observations(ref, 200, 1));
  REQUIRE(zero.d == Approx(0.0).margin(1e-6));

  REQUIRE_THROWS_AS(gamma_inverse_design(-0.1), InvalidInput);
  REQUIRE_THROWS_AS(gamma_inverse_design(std::nan("")), InvalidInput);
}
