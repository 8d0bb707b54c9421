#pragma once

#include <span>

#include "yieldcast/nn/tensor.hpp"

namespace yieldcast::nn {

struct LossValue {
  double value = 0.0;
  Tensor grad;  // dLoss/dpredictions, same shape as predictions
};

// Mean over the batch of squared residuals. Predictions may be shaped
// (batch) or (batch, 1).
LossValue mse_loss(const Tensor& predictions, std::span<const double> targets);

}  // namespace yieldcast::nn
