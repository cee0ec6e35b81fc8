#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "riskmse/models/exp_noise.hpp"
#include "riskmse/models/gaussian.hpp"
#include "riskmse/models/hidden.hpp"
#include "riskmse/models/lognormal_mult.hpp"
#include "riskmse/models/sample_file.hpp"

using namespace riskmse;
using Catch::Approx;

TEST_CASE("hidden gamma posterior matches closed-form moments") {
  const GenerativeModel m = make_gamma_hidden(1.0, 1.0);
  REQUIRE(m.totally_hidden());
  REQUIRE(m.state_dim() == 1);
  const PosteriorSummary p = m.posterior(Vec{});
  REQUIRE(p.mean[0] == Approx(1.0).epsilon(1e-12));
  REQUIRE(p.cov(0, 0) == Approx(1.0).epsilon(1e-12));
  REQUIRE(p.oracle(MultiIndex{2}) == Approx(2.0).epsilon(1e-12));
  REQUIRE(p.oracle(MultiIndex{3}) == Approx(6.0).epsilon(1e-12));
  REQUIRE(p.oracle(MultiIndex{4}) == Approx(24.0).epsilon(1e-12));
  // R = E{X^2 X} - E{X^2} E{X} = 6 - 2 = 4 for the unit exponential.
  REQUIRE(p.r_stat[0] == Approx(4.0).epsilon(1e-12));
}

TEST_CASE("hidden gamma generalizes over shape and scale") {
  const double k = 3.0, t = 2.0;
  const GenerativeModel m = make_gamma_hidden(k, t);
  const PosteriorSummary p = m.posterior(Vec{});
  REQUIRE(p.mean[0] == Approx(k * t).epsilon(1e-12));
  REQUIRE(p.cov(0, 0) == Approx(k * t * t).epsilon(1e-12));
  // E{X^3} - E{X^2} E{X} with raw moments k(k+1)(k+2)t^3 and k(k+1)t^2.
  const double want = k * (k + 1) * (k + 2) * t * t * t - k * (k + 1) * t * t * k * t;
  REQUIRE(p.r_stat[0] == Approx(want).epsilon(1e-12));
}

TEST_CASE("hidden vector models multiply independent coordinates") {
  const GenerativeModel m = make_gamma_hidden(Vec{1.0, 4.0}, Vec{1.0, 1.0});
  const PosteriorSummary p = m.posterior(Vec{});
  REQUIRE(p.dim() == 2);
  REQUIRE(p.cov(0, 1) == 0.0);
  REQUIRE(p.oracle(MultiIndex{1, 1}) == Approx(4.0).epsilon(1e-12));
  REQUIRE(p.oracle(MultiIndex{2, 2}) == Approx(2.0 * 20.0).epsilon(1e-12));
  // Cross terms cancel in R, leaving the per-coordinate statistic:
  // R_0 = E{A^3} - E{A^2}E{A} = 4, R_1 = E{B^3} - E{B^2}E{B} = 40.
  REQUIRE(p.r_stat[0] == Approx(4.0).epsilon(1e-11));
  REQUIRE(p.r_stat[1] == Approx(40.0).epsilon(1e-11));
}

TEST_CASE("hidden uniform posterior is symmetric") {
  const GenerativeModel m = make_uniform_hidden(-1.0, 1.0);
  const PosteriorSummary p = m.posterior(Vec{});
  REQUIRE(p.mean[0] == Approx(0.0).margin(1e-15));
  REQUIRE(p.cov(0, 0) == Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(p.r_stat[0] == Approx(0.0).margin(1e-12));
}

TEST_CASE("hidden lognormal posterior matches closed-form raw moments") {
  const double lm = 0.3, lv = 0.5;
  const GenerativeModel m = make_lognormal_hidden(lm, lv);
  const PosteriorSummary p = m.posterior(Vec{});
  for (int k = 1; k <= 4; ++k) {
    MultiIndex q{k};
    REQUIRE(p.oracle(q) == Approx(std::exp(k * lm + 0.5 * k * k * lv)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian posterior matches the scalar closed form") {
  const GenerativeModel m = make_gaussian(1, 1.0, 1.0);
  REQUIRE_FALSE(m.totally_hidden());
  for (double y : {-2.0, 0.0, 0.7, 3.5}) {
    const PosteriorSummary p = m.posterior(Vec{y});
    REQUIRE(p.mean[0] == Approx(0.5 * y).margin(1e-12));
    REQUIRE(p.cov(0, 0) == Approx(0.5).epsilon(1e-10));
    // For a gaussian law the third statistic collapses to 2 Sigma mean.
    REQUIRE(p.r_stat[0] == Approx(2.0 * 0.5 * 0.5 * y).margin(1e-10));
    // Isserlis: E{Z^4} = 3 sigma^4 around the mean.
    const double m1 = p.mean[0], s2 = p.cov(0, 0);
    const double m4 = p.oracle(MultiIndex{4});
    const double want = 3 * s2 * s2 + 6 * s2 * m1 * m1 + m1 * m1 * m1 * m1;
    REQUIRE(m4 == Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("gaussian observation relabeling leaves the posterior law invariant") {
  const GenerativeModel base = make_gaussian(2, 1.5, 0.8);
  const GenerativeModel scaled = make_gaussian(2, 1.5, 0.8, 3.0);
  const ObservationBatch b1 = sample_observations(base, 50, 99);
  const ObservationBatch b2 = sample_observations(scaled, 50, 99);
  for (std::size_t i = 0; i < b1.obs.size(); ++i) {
    REQUIRE(b2.obs[i][0] == Approx(3.0 * b1.obs[i][0]).epsilon(1e-12));
    const PosteriorSummary p1 = base.posterior(b1.obs[i]);
    const PosteriorSummary p2 = scaled.posterior(b2.obs[i]);
    for (int k = 0; k < 2; ++k) {
      REQUIRE(p2.mean[k] == Approx(p1.mean[k]).margin(1e-9));
      for (int j = 0; j < 2; ++j) REQUIRE(p2.cov(k, j) == Approx(p1.cov(k, j)).margin(1e-9));
    }
  }
}

TEST_CASE("exp_noise posterior is a proper law consistent with the prior") {
  const GenerativeModel m = make_exp_noise(2.0, 3.0);
  const ObservationBatch batch = sample_observations(m, 400, 5);
  double mean_acc = 0.0, second_acc = 0.0;
  for (const Vec& y : batch.obs) {
    const PosteriorSummary p = m.posterior(y);
    REQUIRE(p.mean[0] > 0.0);
    const double m1 = p.oracle(MultiIndex{1});
    const double m2 = p.oracle(MultiIndex{2});
    const double m3 = p.oracle(MultiIndex{3});
    const double m4 = p.oracle(MultiIndex{4});
    REQUIRE(m1 == Approx(p.mean[0]).epsilon(1e-9));
    REQUIRE(m2 >= m1 * m1);
    // Lyapunov: E{X^k}^(1/k) nondecreasing in k for a positive variable.
    REQUIRE(std::pow(m2, 1.0 / 2) <= std::pow(m3, 1.0 / 3) * (1 + 1e-9));
    REQUIRE(std::pow(m3, 1.0 / 3) <= std::pow(m4, 1.0 / 4) * (1 + 1e-9));
    mean_acc += p.mean[0];
    second_acc += m2;
  }
  // Law of total expectation: E{E{X|Y}} = E{X} = 2, E{E{X^2|Y}} = 8.
  mean_acc /= static_cast<double>(batch.obs.size());
  second_acc /= static_cast<double>(batch.obs.size());
  REQUIRE(mean_acc == Approx(2.0).margin(0.35));
  REQUIRE(second_acc == Approx(8.0).margin(3.0));
}

TEST_CASE("lognormal_mult posterior matches importance-sampled moments") {
  const double s_x = 1.0, s_w = 0.25;
  const GenerativeModel m = make_lognormal_mult(s_x, s_w);
  Sampler rng(RngStream(31, 0));
  for (double y : {0.4, 1.0, 2.7}) {
    const PosteriorSummary p = m.posterior(Vec{y});
    // Importance sampling from the prior: weight is the noise density at
    // w = ln y - ln x, so posterior moments are weighted prior moments.
    const int n = 400000;
    double wsum = 0.0, wx = 0.0, wx2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lx = std::sqrt(s_x) * rng.normal();
      const double lw = std::log(y) - lx;
      const double w = std::exp(-0.5 * lw * lw / s_w);
      wsum += w;
      wx += w * std::exp(lx);
      wx2 += w * std::exp(2.0 * lx);
    }
    REQUIRE(p.mean[0] == Approx(wx / wsum).epsilon(0.02));
    REQUIRE(p.oracle(MultiIndex{2}) == Approx(wx2 / wsum).epsilon(0.04));
    // Closed form: posterior of ln X is normal with the precision-weighted
    // location and the product variance.
    const double t = std::log(y);
    const double mu_p = s_x * t / (s_x + s_w);
    const double v_p = s_x * s_w / (s_x + s_w);
    REQUIRE(p.mean[0] == Approx(std::exp(mu_p + 0.5 * v_p)).epsilon(1e-12));
  }
  REQUIRE_THROWS_AS(m.posterior(Vec{-1.0}), InvalidInput);
}

TEST_CASE("sample_file bins sorted observations into empirical posteriors") {
  std::vector<Vec> x;
  Vec y;
  // Deterministic staircase: x = y over eight points, four bins of two.
  for (int i = 1; i <= 8; ++i) {
    x.push_back(Vec{static_cast<double>(i)});
    y.push_back(static_cast<double>(i));
  }
  const GenerativeModel m = make_sample_file_from_data(x, y, 4);
  REQUIRE(m.state_dim() == 1);
  REQUIRE(m.obs_dim() == 1);
  // Bin of y = 1.2 holds samples {1, 2}.
  const PosteriorSummary p = m.posterior(Vec{1.2});
  REQUIRE(p.mean[0] == Approx(1.5).epsilon(1e-12));
  REQUIRE(p.oracle(MultiIndex{2}) == Approx(2.5).epsilon(1e-12));
  // Far beyond the data the end bins absorb the query.
  REQUIRE(m.posterior(Vec{100.0}).mean[0] == Approx(7.5).epsilon(1e-12));
  REQUIRE(m.posterior(Vec{-100.0}).mean[0] == Approx(1.5).epsilon(1e-12));
}

TEST_CASE("sample_file parses and validates CSV input") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "riskmse_model_test";
  fs::create_directories(dir);
  SECTION("well-formed file round-trips") {
    const fs::path f = dir / "ok.csv";
    std::ofstream out(f);
    out << "x_1,y_1\n";
    for (int i = 0; i < 64; ++i) out << i << "," << i << "\n";
    out.close();
    const GenerativeModel m = make_sample_file(f.string(), 4);
    REQUIRE(m.posterior(Vec{0.0}).dim() == 1);
  }
  SECTION("vector observations are rejected") {
    const fs::path f = dir / "wide.csv";
    std::ofstream out(f);
    out << "x_1,y_1,y_2\n1,2,3\n4,5,6\n";
    out.close();
    REQUIRE_THROWS_AS(make_sample_file(f.string(), 1), InvalidInput);
  }
  SECTION("unparseable numbers carry the line number") {
    const fs::path f = dir / "bad.csv";
    std::ofstream out(f);
    out << "x_1,y_1\n1,2\nthree,4\n";
    out.close();
    try {
      make_sample_file(f.string(), 1);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      REQUIRE(std::string(e.what()).find("3") != std::string::npos);
    }
  }
  SECTION("too few rows for the requested bins") {
    std::vector<Vec> x = {{1.0}, {2.0}};
    Vec y = {1.0, 2.0};
    REQUIRE_THROWS_AS(make_sample_file_from_data(x, y, 4), InvalidInput);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(make_sample_file((dir / "nope.csv").string(), 4), IoError);
  }
}

TEST_CASE("observation batches are deterministic in the seed") {
  const GenerativeModel m = make_lognormal_mult(1.0, 0.25);
  const ObservationBatch a = sample_observations(m, 20, 7);
  const ObservationBatch b = sample_observations(m, 20, 7);
  const ObservationBatch c = sample_observations(m, 20, 8);
  REQUIRE(a.obs == b.obs);
  REQUIRE(a.obs != c.obs);
  // Prefix property: a longer batch starts with the shorter one.
  const ObservationBatch d = sample_observations(m, 40, 7);
  for (std::size_t i = 0; i < a.obs.size(); ++i) REQUIRE(a.obs[i] == d.obs[i]);
}

TEST_CASE("hidden models expose one trivial observation") {
  const GenerativeModel m = make_gamma_hidden(1.0, 1.0);
  const ObservationBatch b = sample_observations(m, 5000, 3);
  REQUIRE(b.obs.size() == 1);
  REQUIRE(b.obs[0].empty());
}

TEST_CASE("posterior rejects malformed observations") {
  const GenerativeModel m = make_gaussian(1, 1.0, 1.0);
  REQUIRE_THROWS_AS(m.posterior(Vec{}), InvalidInput);
  REQUIRE_THROWS_AS(m.posterior(Vec{1.0, 2.0}), InvalidInput);
  REQUIRE_THROWS_AS(m.posterior(Vec{std::numeric_limits<double>::quiet_NaN()}), InvalidInput);
}
