#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "test_helpers.hpp"
#include "yieldcast/metrics.hpp"

using namespace yieldcast;
using yieldcast::testing::contains;

TEST_CASE("identity predictions score perfectly") {
  const std::vector<double> y = {1.0, 2.0, 3.0};
  CHECK(rmse(y, y) == 0.0);
  CHECK(mae(y, y) == 0.0);
  CHECK(pearson_r(y, y) == doctest::Approx(1.0));
}

TEST_CASE("hand-computed rmse and mae") {
  const std::vector<double> y = {0.0, 0.0};
  const std::vector<double> yhat = {3.0, 4.0};
  CHECK(rmse(y, yhat) == doctest::Approx(3.5355).epsilon(1e-4));
  CHECK(mae(y, yhat) == doctest::Approx(3.5));
}

TEST_CASE("perfect anticorrelation gives r = -1") {
  const std::vector<double> y = {-2.0, -1.0, 1.0, 2.0};  // zero mean
  std::vector<double> neg = y;
  for (double& v : neg) v = -v;
  CHECK(pearson_r(y, neg) == doctest::Approx(-1.0));
}

TEST_CASE("metrics match naive-loop references on random vectors") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 200);
    std::vector<double> y(n), yhat(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = uniform_real(rng, -40.0, 110.0);
      yhat[i] = y[i] + normal(rng, 0.0, 8.0);
    }

    double ss = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
      abs_sum += std::abs(y[i] - yhat[i]);
    }
    const double ref_rmse = std::sqrt(ss / static_cast<double>(n));
    const double ref_mae = abs_sum / static_cast<double>(n);

    double my = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      my += y[i];
      mp += yhat[i];
    }
    my /= static_cast<double>(n);
    mp /= static_cast<double>(n);
    double cov = 0.0, vy = 0.0, vp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cov += (y[i] - my) * (yhat[i] - mp);
      vy += (y[i] - my) * (y[i] - my);
      vp += (yhat[i] - mp) * (yhat[i] - mp);
    }

    CHECK(rmse(y, yhat) == doctest::Approx(ref_rmse).epsilon(1e-9));
    CHECK(mae(y, yhat) == doctest::Approx(ref_mae).epsilon(1e-9));
    if (vy > 0.0 && vp > 0.0) {
      CHECK(pearson_r(y, yhat) ==
            doctest::Approx(cov / std::sqrt(vy * vp)).epsilon(1e-9));
    }

    // rmse^2 * n recovers the squared-error sum.
    const double r = rmse(y, yhat);
    CHECK(r * r * static_cast<double>(n) ==
          doctest::Approx(ss).epsilon(1e-9));
  }
}

TEST_CASE("pearson r is invariant under positive affine transforms") {
  Rng rng(45);
  std::vector<double> y(50), yhat(50);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = normal(rng, 50.0, 10.0);
    yhat[i] = y[i] + normal(rng, 0.0, 5.0);
  }
  const double base = pearson_r(y, yhat);
  std::vector<double> scaled = y;
  for (double& v : scaled) v = 3.5 * v + 12.0;
  CHECK(pearson_r(scaled, yhat) == doctest::Approx(base).epsilon(1e-12));
  std::vector<double> scaled_pred = yhat;
  for (double& v : scaled_pred) v = 0.25 * v - 4.0;
  CHECK(pearson_r(y, scaled_pred) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("metrics are permutation invariant") {
  Rng rng(46);
  std::vector<double> y(30), yhat(30);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = uniform_real(rng, 0.0, 100.0);
    yhat[i] = uniform_real(rng, 0.0, 100.0);
  }
  std::vector<std::size_t> perm = random_permutation(y.size(), rng);
  std::vector<double> y2(30), yhat2(30);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    y2[i] = y[perm[i]];
    yhat2[i] = yhat[perm[i]];
  }
  CHECK(rmse(y, yhat) == doctest::Approx(rmse(y2, yhat2)).epsilon(1e-12));
  CHECK(mae(y, yhat) == doctest::Approx(mae(y2, yhat2)).epsilon(1e-12));
  CHECK(pearson_r(y, yhat) ==
        doctest::Approx(pearson_r(y2, yhat2)).epsilon(1e-12));
}

TEST_CASE("zero variance is an error for r, not a NaN") {
  const std::vector<double> flat = {2.0, 2.0, 2.0};
  const std::vector<double> y = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(pearson_r(flat, y), Error);
  CHECK_THROWS_AS(pearson_r(y, flat), Error);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), Error);
  CHECK_THROWS_AS(rmse(y, std::vector<double>{1.0}), Error);
}

TEST_CASE("prediction error percentage follows the definition") {
  CHECK(prediction_error_percentage(50.0, 45.0) == doctest::Approx(10.0));
  CHECK(prediction_error_percentage(50.0, 50.0) == 0.0);
  CHECK(prediction_error_percentage(0.4, 0.8) == doctest::Approx(100.0));
  CHECK_THROWS_AS(prediction_error_percentage(0.0, 1.0), Error);
}

TEST_CASE("region aggregation uses the two-stage mean") {
  // One state, one location: the state mean equals the location mean.
  std::vector<RegionObservation> single = {
      {"IA", "loc1", 50.0, 45.0},
      {"IA", "loc1", 50.0, 55.0},
  };
  const RegionErrorReport one = aggregate_by_region(single);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].mean_error_pct == doctest::Approx(10.0));
  CHECK(one.rows[0].n_locations == 1);
  CHECK(one.rows[0].n_obs == 2);
  CHECK(one.rows[0].mean_observed_yield == doctest::Approx(50.0));

  // Two locations with means 10% and 30%: state mean is 20% regardless of
  // how many observations each location carries.
  std::vector<RegionObservation> two = {
      {"NE", "a", 100.0, 90.0},   // 10%
      {"NE", "a", 100.0, 110.0},  // 10%
      {"NE", "a", 100.0, 90.0},   // 10%
      {"NE", "b", 100.0, 70.0},   // 30%
  };
  const RegionErrorReport report = aggregate_by_region(two);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].mean_error_pct == doctest::Approx(20.0));
  CHECK(report.rows[0].n_locations == 2);
  CHECK(report.rows[0].n_obs == 4);
}

TEST_CASE("zero-actual rows are excluded and empty states noted") {
  std::vector<RegionObservation> obs = {
      {"KS", "x", 0.0, 5.0},
      {"IA", "y", 50.0, 40.0},
      {"IA", "y", 0.0, 10.0},
  };
  const RegionErrorReport report = aggregate_by_region(obs);
  CHECK(report.excluded_zero_actual == 2);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].state == "IA");
  CHECK(report.rows[0].n_obs == 1);
  REQUIRE(report.notes.size() == 1);
  CHECK(contains(report.notes[0], "KS"));
}

TEST_CASE("csv fixtures match the declared formats") {
  // A model hitting the reference ensemble test metrics would emit this
  // row; format fixture only, not a training target.
  const MetricsRow fixture{"gem", "test", 6.67, 5.05, 0.908, 9303};
  CHECK(metrics_csv(std::vector<MetricsRow>{fixture}) ==
        "model,split,rmse,mae,r,n\ngem,test,6.67,5.05,0.908,9303\n");

  RegionErrorReport report;
  report.rows.push_back({"IA", 12.5, 3, 120, 51.75});
  CHECK(region_report_csv(report) ==
        "state,mean_error_pct,n_locations,n_obs,mean_observed_yield\n"
        "IA,12.5,3,120,51.75\n");
}
