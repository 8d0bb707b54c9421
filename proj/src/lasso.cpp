#include "yieldcast/lasso.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace yieldcast {

std::size_t LassoModel::nonzero_count(double tol) const {
  std::size_t n = 0;
  for (const double c : coefficients) {
    if (std::abs(c) > tol) ++n;
  }
  return n;
}

namespace {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

LassoModel lasso_fit(std::span<const double> x, std::size_t n, std::size_t d,
                     std::span<const double> y, double alpha, double tol,
                     int max_iter) {
  if (n < 2) throw Error("lasso_fit: need at least 2 rows");
  if (x.size() != n * d || y.size() != n) {
    throw Error("lasso_fit: design matrix dimensions are inconsistent");
  }
  if (alpha < 0.0) throw Error("lasso_fit: alpha must be nonnegative");
  for (const double v : x) {
    if (!std::isfinite(v)) throw Error("lasso_fit: non-finite feature value");
  }
  for (const double v : y) {
    if (!std::isfinite(v)) throw Error("lasso_fit: non-finite target");
  }

  LassoModel model;
  model.alpha = alpha;
  model.coefficients.assign(d, 0.0);

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> col_sq(d, 0.0);  // (1/n) sum_i x_ij^2
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) col_sq[j] += row[j] * row[j];
  }
  for (double& v : col_sq) v *= inv_n;

  // Residual r = y - Xw - b, maintained across coordinate updates.
  double mean_y = 0.0;
  for (const double v : y) mean_y += v;
  mean_y *= inv_n;
  model.intercept = mean_y;
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.intercept;

  auto objective = [&] {
    double ss = 0.0;
    for (const double r : residual) ss += r * r;
    double l1 = 0.0;
    for (const double w : model.coefficients) l1 += std::abs(w);
    return 0.5 * inv_n * ss + alpha * l1;
  };

  for (int sweep = 0; sweep < max_iter; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (col_sq[j] == 0.0) continue;  // constant-zero column stays at zero
      const double w_old = model.coefficients[j];
      // rho = (1/n) x_j . (r + x_j w_old)
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        rho += x[i * d + j] * residual[i];
      }
      rho = rho * inv_n + col_sq[j] * w_old;
      const double w_new = soft_threshold(rho, alpha) / col_sq[j];
      const double delta = w_new - w_old;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          residual[i] -= delta * x[i * d + j];
        }
        model.coefficients[j] = w_new;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    // Unpenalized intercept: mean residual absorbs into b.
    double shift = 0.0;
    for (const double r : residual) shift += r;
    shift *= inv_n;
    if (shift != 0.0) {
      model.intercept += shift;
      for (double& r : residual) r -= shift;
    }
    max_change = std::max(max_change, std::abs(shift));

    model.objective_path.push_back(objective());
    model.sweeps = sweep + 1;
    if (max_change < tol) {
      model.converged = true;
      break;
    }
  }
  return model;
}

LassoModel lasso_fit(const FeatureMatrix& m,
                     std::span<const std::size_t> rows, double alpha,
                     double tol, int max_iter) {
  const FeatureMatrix sub = subset_rows(m, rows);
  return lasso_fit(sub.values, sub.rows, sub.cols, sub.targets, alpha, tol,
                   max_iter);
}

std::vector<double> lasso_predict(const LassoModel& model,
                                  std::span<const double> x, std::size_t n,
                                  std::size_t d) {
  if (model.coefficients.size() != d) {
    throw Error("lasso_predict: model has " +
                std::to_string(model.coefficients.size()) +
                " coefficients, matrix has " + std::to_string(d) +
                " columns");
  }
  if (x.size() != n * d) {
    throw Error("lasso_predict: matrix dimensions are inconsistent");
  }
  std::vector<double> out(n, model.intercept);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * model.coefficients[j];
    out[i] += acc;
  }
  return out;
}

std::vector<double> lasso_predict(const LassoModel& model,
                                  const FeatureMatrix& m) {
  return lasso_predict(model, m.values, m.rows, m.cols);
}

double lasso_objective(const LassoModel& model, std::span<const double> x,
                       std::size_t n, std::size_t d,
                       std::span<const double> y) {
  const std::vector<double> yhat = lasso_predict(model, x, n, d);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - yhat[i];
    ss += r * r;
  }
  double l1 = 0.0;
  for (const double w : model.coefficients) l1 += std::abs(w);
  return 0.5 * ss / static_cast<double>(n) + model.alpha * l1;
}

std::string lasso_to_json(const LassoModel& model) {
  nlohmann::json j;
  j["alpha"] = model.alpha;
  j["intercept"] = model.intercept;
  j["sweeps"] = model.sweeps;
  j["converged"] = model.converged;
  nlohmann::json coef = nlohmann::json::array();
  for (std::size_t i = 0; i < model.coefficients.size(); ++i) {
    if (model.coefficients[i] != 0.0) {
      coef.push_back({{"index", i}, {"value", model.coefficients[i]}});
    }
  }
  j["coefficients"] = coef;
  j["dimension"] = model.coefficients.size();
  return j.dump(2) + "\n";
}

LassoModel lasso_from_json(const std::string& text, std::size_t d) {
  const nlohmann::json j = nlohmann::json::parse(text);
  LassoModel model;
  model.alpha = j.at("alpha").get<double>();
  model.intercept = j.at("intercept").get<double>();
  model.sweeps = j.at("sweeps").get<int>();
  model.converged = j.at("converged").get<bool>();
  const auto dim = j.value("dimension", d);
  if (d != 0 && dim != d) {
    throw Error("lasso model dimension mismatch");
  }
  model.coefficients.assign(dim, 0.0);
  for (const auto& entry : j.at("coefficients")) {
    model.coefficients.at(entry.at("index").get<std::size_t>()) =
        entry.at("value").get<double>();
  }
  return model;
}

}  // namespace yieldcast
