#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yieldcast/util.hpp"

namespace yieldcast {

/// Base-model predictions for one evaluation set: row i, model j.
struct PredictionMatrix {
  std::size_t n = 0;  // observations
  std::size_t k = 0;  // base models
  std::vector<double> predictions;  // row-major n x k
  std::vector<double> targets;      // n
  std::vector<std::string> labels;  // k

  double at(std::size_t i, std::size_t j) const {
    return predictions[i * k + j];
  }
  double& at(std::size_t i, std::size_t j) { return predictions[i * k + j]; }
};

struct EnsembleWeights {
  std::vector<double> weights;  // nonnegative, sums to one
  double objective = 0.0;       // mean squared error at these weights
  std::int64_t iterations = 0;
  bool converged = false;
};

// Euclidean projection onto the probability simplex (sorting construction).
std::vector<double> project_to_simplex(std::vector<double> v);

// (1/n) sum_i (y_i - sum_j w_j yhat_ij)^2
double ensemble_mse(const PredictionMatrix& p, std::span<const double> w);

// Minimizes the ensemble MSE over the simplex by projected gradient descent
// with the fixed step n / (2 ||P||_F^2). Runs from the uniform point and from
// the best single-model vertex, keeping the better endpoint, so the result
// never loses to any single model. Deterministic.
EnsembleWeights optimize_weights(const PredictionMatrix& p);

// Row-wise convex combination of model predictions.
std::vector<double> ensemble_predict(std::span<const double> weights,
                                     const PredictionMatrix& p);

// Exhaustive simplex grid search, tractable for k <= 3. Verification oracle
// for optimize_weights.
EnsembleWeights grid_oracle(const PredictionMatrix& p, double step);

std::string weights_report_json(const PredictionMatrix& p,
                                const EnsembleWeights& w);
EnsembleWeights weights_from_report_json(const std::string& text,
                                         std::vector<std::string>* labels);

}  // namespace yieldcast
