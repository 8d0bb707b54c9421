#include "yieldcast/nn/loss.hpp"

namespace yieldcast::nn {

LossValue mse_loss(const Tensor& predictions, std::span<const double> targets) {
  if (targets.empty()) throw Error("mse_loss: empty batch");
  if (predictions.size() != targets.size()) {
    throw Error("mse_loss: " + std::to_string(predictions.size()) +
                " predictions vs " + std::to_string(targets.size()) +
                " targets");
  }
  const double n = static_cast<double>(targets.size());
  LossValue out;
  out.grad = Tensor::zeros_like(predictions);
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = predictions[i] - targets[i];
    sum += r * r;
    out.grad[i] = 2.0 * r / n;
  }
  out.value = sum / n;
  return out;
}

}  // namespace yieldcast::nn
