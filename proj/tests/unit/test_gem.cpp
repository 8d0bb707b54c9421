#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "test_helpers.hpp"
#include "yieldcast/gem.hpp"

using namespace yieldcast;

namespace {

PredictionMatrix make_matrix(std::vector<double> targets,
                             std::vector<std::vector<double>> model_columns) {
  PredictionMatrix p;
  p.n = targets.size();
  p.k = model_columns.size();
  p.targets = std::move(targets);
  p.predictions.resize(p.n * p.k);
  for (std::size_t j = 0; j < p.k; ++j) {
    REQUIRE(model_columns[j].size() == p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
      p.at(i, j) = model_columns[j][i];
    }
    p.labels.push_back("m" + std::to_string(j));
  }
  return p;
}

// Targets near standard scale with per-model noise; the scale keeps the
// 1e-3 grid oracle within 1e-5 of the continuous optimum.
PredictionMatrix random_instance(Rng& rng, std::size_t k) {
  const std::size_t n = 20 + uniform_index(rng, 181);
  PredictionMatrix p;
  p.n = n;
  p.k = k;
  p.targets.resize(n);
  p.predictions.resize(n * k);
  for (double& y : p.targets) y = normal(rng, 0.0, 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double sigma = uniform_real(rng, 0.1, 0.8);
    const double bias = uniform_real(rng, -0.3, 0.3);
    for (std::size_t i = 0; i < n; ++i) {
      p.at(i, j) = p.targets[i] + bias + normal(rng, 0.0, sigma);
    }
    p.labels.push_back("m" + std::to_string(j));
  }
  return p;
}

void check_simplex(const std::vector<double>& w) {
  double sum = 0.0;
  for (const double v : w) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

}  // namespace

TEST_CASE("two-model closed form: equidistant predictions split evenly") {
  const PredictionMatrix p = make_matrix({2.0}, {{1.0}, {3.0}});
  const EnsembleWeights w = optimize_weights(p);
  check_simplex(w.weights);
  CHECK(w.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w.weights[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(w.objective == doctest::Approx(0.0));
}

TEST_CASE("an exact model takes all the weight") {
  Rng rng(31);
  std::vector<double> y(60);
  for (double& v : y) v = normal(rng, 0.0, 1.0);
  std::vector<double> offset = y;
  for (double& v : offset) v += 10.0;
  const PredictionMatrix p = make_matrix(y, {y, offset});

  const EnsembleWeights w = optimize_weights(p);
  check_simplex(w.weights);
  CHECK(w.weights[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(w.objective == doctest::Approx(0.0).epsilon(1e-6));

  const EnsembleWeights grid = grid_oracle(p, 1e-3);
  CHECK(std::abs(grid.weights[0] - w.weights[0]) <= 1e-3);
}

TEST_CASE("identical models: objective equals the single-model mse") {
  Rng rng(32);
  std::vector<double> y(40), yhat(40);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = normal(rng, 0.0, 1.0);
    yhat[i] = y[i] + normal(rng, 0.0, 0.5);
  }
  const PredictionMatrix p = make_matrix(y, {yhat, yhat, yhat});
  double single = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    single += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  single /= static_cast<double>(y.size());

  const EnsembleWeights w = optimize_weights(p);
  check_simplex(w.weights);
  CHECK(w.objective == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("ensemble_predict is the row-wise convex combination") {
  const PredictionMatrix p = make_matrix({0.0}, {{2.0}, {4.0}});
  CHECK(ensemble_predict(std::vector<double>{1.0, 0.0}, p) ==
        std::vector<double>{2.0});
  CHECK(ensemble_predict(std::vector<double>{0.5, 0.5}, p) ==
        std::vector<double>{3.0});

  const PredictionMatrix constant =
      make_matrix({1.0, 2.0}, {{7.0, 7.0}, {7.0, 7.0}});
  const auto combined =
      ensemble_predict(std::vector<double>{0.25, 0.75}, constant);
  CHECK(combined == std::vector<double>{7.0, 7.0});

  CHECK_THROWS_AS(ensemble_predict(std::vector<double>{1.0}, p), Error);
}

TEST_CASE("grid oracle handles the degenerate and symmetric cases") {
  const PredictionMatrix single = make_matrix({1.0}, {{2.0}});
  const EnsembleWeights w1 = grid_oracle(single, 1e-3);
  CHECK(w1.weights == std::vector<double>{1.0});

  // Three models with symmetric equal-magnitude errors summing to zero.
  const double e = 0.7;
  const PredictionMatrix sym = make_matrix(
      {0.0, 0.0, 0.0},
      {{e, -e, 0.0}, {-e, 0.0, e}, {0.0, e, -e}});
  const EnsembleWeights grid = grid_oracle(sym, 1e-3);
  for (const double v : grid.weights) {
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  }
  const EnsembleWeights solved = optimize_weights(sym);
  for (const double v : solved.weights) {
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
  }

  const PredictionMatrix four =
      make_matrix({0.0}, {{1.0}, {1.0}, {1.0}, {1.0}});
  CHECK_THROWS_AS(grid_oracle(four, 1e-3), Error);
}

TEST_CASE("solver matches the grid oracle on random instances") {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + uniform_index(rng, 2);
    const PredictionMatrix p = random_instance(rng, k);

    const EnsembleWeights solved = optimize_weights(p);
    const EnsembleWeights grid = grid_oracle(p, 1e-3);
    check_simplex(solved.weights);
    CHECK(solved.objective <= grid.objective + 1e-10);
    CHECK(std::abs(solved.objective - grid.objective) <= 1e-5);

    // Never worse than the best single model.
    std::vector<double> vertex(p.k, 0.0);
    for (std::size_t j = 0; j < p.k; ++j) {
      std::fill(vertex.begin(), vertex.end(), 0.0);
      vertex[j] = 1.0;
      CHECK(solved.objective <= ensemble_mse(p, vertex) + 1e-8);
    }
  }
}

TEST_CASE("optimize_weights commutes with column permutations") {
  Rng rng(34);
  const PredictionMatrix p = random_instance(rng, 3);
  PredictionMatrix permuted = p;
  const std::array<std::size_t, 3> perm = {2, 0, 1};  // new j <- old perm[j]
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      permuted.at(i, j) = p.at(i, perm[j]);
    }
  }
  const EnsembleWeights base = optimize_weights(p);
  const EnsembleWeights shuffled = optimize_weights(permuted);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(shuffled.weights[j] ==
          doctest::Approx(base.weights[perm[j]]).epsilon(1e-6));
  }
}

TEST_CASE("simplex projection returns valid simplex points") {
  Rng rng(35);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 5);
    std::vector<double> v(k);
    for (double& x : v) x = uniform_real(rng, -3.0, 3.0);
    const std::vector<double> w = project_to_simplex(v);
    check_simplex(w);
  }
  // A point already on the simplex is fixed.
  const std::vector<double> onpoint = {0.2, 0.5, 0.3};
  const std::vector<double> projected = project_to_simplex(onpoint);
  for (std::size_t j = 0; j < onpoint.size(); ++j) {
    CHECK(projected[j] == doctest::Approx(onpoint[j]).epsilon(1e-12));
  }
}

TEST_CASE("non-finite inputs are rejected") {
  PredictionMatrix p = make_matrix({1.0}, {{2.0}});
  p.predictions[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(optimize_weights(p), Error);
}

TEST_CASE("weights report json round-trips") {
  Rng rng(36);
  const PredictionMatrix p = random_instance(rng, 2);
  const EnsembleWeights w = optimize_weights(p);
  const std::string text = weights_report_json(p, w);
  std::vector<std::string> labels;
  const EnsembleWeights back = weights_from_report_json(text, &labels);
  CHECK(back.weights == w.weights);
  CHECK(back.objective == w.objective);
  CHECK(labels == p.labels);
}
