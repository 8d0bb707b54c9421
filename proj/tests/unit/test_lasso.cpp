#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "test_helpers.hpp"
#include "yieldcast/lasso.hpp"

using namespace yieldcast;

namespace {

// Dense normal-equations solve (Gaussian elimination with partial pivoting)
// over the centered problem; independent oracle for alpha = 0 fits.
std::vector<double> normal_equations(const std::vector<double>& x,
                                     std::size_t n, std::size_t d,
                                     const std::vector<double>& y,
                                     double* intercept) {
  std::vector<double> mean_x(d, 0.0);
  double mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean_x[j] += x[i * d + j];
    mean_y += y[i];
  }
  for (double& v : mean_x) v /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  std::vector<double> a(d * d, 0.0), b(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double xj = x[i * d + j] - mean_x[j];
      b[j] += xj * (y[i] - mean_y);
      for (std::size_t l = 0; l < d; ++l) {
        a[j * d + l] += xj * (x[i * d + l] - mean_x[l]);
      }
    }
  }
  // Solve a w = b.
  std::vector<double> w(d, 0.0);
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < d; ++r) {
      if (std::abs(a[r * d + col]) > std::abs(a[pivot * d + col])) pivot = r;
    }
    for (std::size_t c = 0; c < d; ++c) std::swap(a[col * d + c], a[pivot * d + c]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = a[r * d + col] / a[col * d + col];
      for (std::size_t c = col; c < d; ++c) a[r * d + c] -= f * a[col * d + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t col = d; col-- > 0;) {
    double acc = b[col];
    for (std::size_t c = col + 1; c < d; ++c) acc -= a[col * d + c] * w[c];
    w[col] = acc / a[col * d + col];
  }
  double b0 = mean_y;
  for (std::size_t j = 0; j < d; ++j) b0 -= w[j] * mean_x[j];
  *intercept = b0;
  return w;
}

// Fine grid search over 2-d coefficient space; brute-force oracle.
std::pair<std::vector<double>, double> brute_force_2col(
    const std::vector<double>& x, std::size_t n, const std::vector<double>& y,
    double alpha, double lo, double hi, double step) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_w = {0.0, 0.0};
  const auto steps = static_cast<long>(std::llround((hi - lo) / step));
  for (long i0 = 0; i0 <= steps; ++i0) {
    const double w0 = lo + static_cast<double>(i0) * step;
    for (long i1 = 0; i1 <= steps; ++i1) {
      const double w1 = lo + static_cast<double>(i1) * step;
      // Optimal intercept given w is the mean residual.
      double b = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        b += y[i] - w0 * x[i * 2] - w1 * x[i * 2 + 1];
      }
      b /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - w0 * x[i * 2] - w1 * x[i * 2 + 1] - b;
        ss += r * r;
      }
      const double objective = 0.5 * ss / static_cast<double>(n) +
                               alpha * (std::abs(w0) + std::abs(w1));
      if (objective < best) {
        best = objective;
        best_w = {w0, w1};
      }
    }
  }
  return {best_w, best};
}

std::size_t nnz(const std::vector<double>& w, double tol = 1e-9) {
  std::size_t count = 0;
  for (const double v : w) {
    if (std::abs(v) > tol) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("alpha 0 recovers the exact line") {
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<double> y = {1.0, -1.0};
  const LassoModel model = lasso_fit(x, 2, 1, y, 0.0);
  CHECK(model.converged);
  CHECK(model.coefficients[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(model.intercept == doctest::Approx(0.0));
}

TEST_CASE("alpha 0.5 soft-thresholds the same problem to w = 0.5") {
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<double> y = {1.0, -1.0};
  const LassoModel model = lasso_fit(x, 2, 1, y, 0.5);
  CHECK(model.coefficients[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(model.intercept == doctest::Approx(0.0));
}

TEST_CASE("large alpha shrinks everything to the mean") {
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<double> y = {3.0, 1.0};
  // max |x' (y - mean)| / n = 1, so alpha = 1 is full shrinkage.
  const LassoModel model = lasso_fit(x, 2, 1, y, 1.0);
  CHECK(model.coefficients[0] == 0.0);
  CHECK(model.intercept == doctest::Approx(2.0));
}

TEST_CASE("alpha 0 full-rank fits match normal equations") {
  Rng rng(8);
  const std::size_t n = 40, d = 5;
  std::vector<double> x(n * d), y(n);
  for (double& v : x) v = normal(rng, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 3.0;
    for (std::size_t j = 0; j < d; ++j) {
      y[i] += (0.5 + static_cast<double>(j)) * x[i * d + j];
    }
    y[i] += normal(rng, 0.0, 0.1);
  }
  const LassoModel model = lasso_fit(x, n, d, y, 0.0, 1e-12, 100000);
  double oracle_intercept = 0.0;
  const std::vector<double> oracle =
      normal_equations(x, n, d, y, &oracle_intercept);
  for (std::size_t j = 0; j < d; ++j) {
    CHECK(model.coefficients[j] ==
          doctest::Approx(oracle[j]).epsilon(1e-6));
  }
  CHECK(model.intercept == doctest::Approx(oracle_intercept).epsilon(1e-6));

  // Predictions agree with the normal-equations fit everywhere.
  const std::vector<double> yhat = lasso_predict(model, x, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double oracle_pred = oracle_intercept;
    for (std::size_t j = 0; j < d; ++j) {
      oracle_pred += oracle[j] * x[i * d + j];
    }
    CHECK(yhat[i] == doctest::Approx(oracle_pred).epsilon(1e-6));
  }
}

TEST_CASE("noiseless alpha 0 fits reproduce targets to 1e-6") {
  Rng rng(9);
  const std::size_t n = 30, d = 4;
  std::vector<double> x(n * d), y(n);
  for (double& v : x) v = normal(rng, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = -2.0;
    for (std::size_t j = 0; j < d; ++j) {
      y[i] += (1.0 + 0.3 * static_cast<double>(j)) * x[i * d + j];
    }
  }
  const LassoModel model = lasso_fit(x, n, d, y, 0.0, 1e-13, 200000);
  const std::vector<double> yhat = lasso_predict(model, x, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(yhat[i] - y[i]) < 1e-6);
  }
}

TEST_CASE("objective is non-increasing across sweeps") {
  Rng rng(10);
  const std::size_t n = 50, d = 8;
  std::vector<double> x(n * d), y(n);
  for (double& v : x) v = normal(rng, 0.0, 1.0);
  for (double& v : y) v = normal(rng, 5.0, 2.0);
  const LassoModel model = lasso_fit(x, n, d, y, 0.1);
  REQUIRE(model.objective_path.size() >= 2);
  for (std::size_t i = 1; i < model.objective_path.size(); ++i) {
    CHECK(model.objective_path[i] <=
          model.objective_path[i - 1] + 1e-12);
  }
}

TEST_CASE("prediction basics") {
  LassoModel model;
  model.coefficients = {0.0, 0.0};
  model.intercept = 4.5;
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  CHECK(lasso_predict(model, x, 2, 2) == std::vector<double>{4.5, 4.5});

  model.coefficients = {2.0, -1.0};
  const auto two = lasso_predict(model, x, 2, 2);
  const auto first = lasso_predict(model, std::vector<double>{1.0, 2.0}, 1, 2);
  CHECK(two[0] == first[0]);
  CHECK(two[0] == doctest::Approx(4.5 + 2.0 - 2.0));

  CHECK_THROWS_AS(lasso_predict(model, x, 2, 1), Error);
}

TEST_CASE("sparsity grows with alpha, verified against brute force") {
  Rng rng(12);
  const std::size_t n = 30;
  std::vector<double> x(n * 2), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i * 2] = normal(rng, 0.0, 1.0);
    x[i * 2 + 1] = normal(rng, 0.0, 1.0);
    y[i] = 1.2 * x[i * 2] + 0.25 * x[i * 2 + 1] + normal(rng, 0.0, 0.05);
  }
  const std::vector<double> alphas = {0.01, 0.25, 2.0};
  std::vector<std::size_t> cd_nnz, bf_nnz;
  for (const double alpha : alphas) {
    const LassoModel model = lasso_fit(x, n, 2, y, alpha, 1e-11, 100000);
    const auto [bf_w, bf_obj] = brute_force_2col(x, n, y, alpha, -2.0, 2.0,
                                                 1e-3);
    cd_nnz.push_back(nnz(model.coefficients));
    bf_nnz.push_back(nnz(bf_w, 5e-4));
    // Coordinate descent is at least as good as the grid optimum.
    CHECK(lasso_objective(model, x, n, 2, y) <= bf_obj + 1e-6);
  }
  for (std::size_t i = 1; i < alphas.size(); ++i) {
    CHECK(cd_nnz[i] <= bf_nnz[i - 1]);
    CHECK(cd_nnz[i] <= cd_nnz[i - 1]);
  }
}

TEST_CASE("invalid inputs are rejected") {
  const std::vector<double> x = {1.0, 2.0};
  const std::vector<double> y = {1.0, 2.0};
  CHECK_THROWS_AS(lasso_fit(x, 2, 1, y, -0.1), Error);
  CHECK_THROWS_AS(lasso_fit(x, 1, 2, std::vector<double>{1.0}, 0.1), Error);
  std::vector<double> bad = x;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lasso_fit(bad, 2, 1, y, 0.1), Error);
}

TEST_CASE("model json round-trips the sparse coefficients") {
  LassoModel model;
  model.alpha = 0.0001;
  model.intercept = 50.25;
  model.coefficients = {0.0, 1.5, 0.0, -0.75};
  model.sweeps = 12;
  model.converged = true;
  const std::string text = lasso_to_json(model);
  const LassoModel back = lasso_from_json(text, 4);
  CHECK(back.alpha == model.alpha);
  CHECK(back.intercept == model.intercept);
  CHECK(back.coefficients == model.coefficients);
  CHECK(back.converged);
}
