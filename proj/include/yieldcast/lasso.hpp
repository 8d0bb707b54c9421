#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yieldcast/preprocess.hpp"

namespace yieldcast {

struct LassoModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double alpha = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective_path;  // objective after each sweep

  std::size_t nonzero_count(double tol = 1e-12) const;
};

// Cyclic coordinate descent with soft-thresholding on
//   (1/(2n)) ||y - Xw - b||^2 + alpha ||w||_1
// with an unpenalized intercept updated every sweep. Converges when the
// largest coefficient change in a sweep drops below tol.
LassoModel lasso_fit(std::span<const double> x, std::size_t n, std::size_t d,
                     std::span<const double> y, double alpha,
                     double tol = 1e-9, int max_iter = 10000);
LassoModel lasso_fit(const FeatureMatrix& m,
                     std::span<const std::size_t> rows, double alpha,
                     double tol = 1e-9, int max_iter = 10000);

std::vector<double> lasso_predict(const LassoModel& model,
                                  std::span<const double> x, std::size_t n,
                                  std::size_t d);
std::vector<double> lasso_predict(const LassoModel& model,
                                  const FeatureMatrix& m);

double lasso_objective(const LassoModel& model, std::span<const double> x,
                       std::size_t n, std::size_t d,
                       std::span<const double> y);

// JSON model file: alpha, intercept, sparse (index, value) coefficients.
std::string lasso_to_json(const LassoModel& model);
LassoModel lasso_from_json(const std::string& text, std::size_t d);

}  // namespace yieldcast
