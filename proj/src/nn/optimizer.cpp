#include "yieldcast/nn/optimizer.hpp"

#include <cmath>

namespace yieldcast::nn {

double LrSchedule::at(std::int64_t step) const {
  if (step < 0) throw Error("lr schedule: step must be >= 0");
  if (decay_interval <= 0) return base_lr;
  const auto exponent = static_cast<double>(step / decay_interval);
  return base_lr * std::pow(decay_rate, exponent);
}

AdamOptimizer::AdamOptimizer(std::vector<ParamRef> params, LrSchedule schedule,
                             double beta1, double beta2, double epsilon)
    : params_(std::move(params)),
      schedule_(schedule),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {
  moments_.reserve(params_.size());
  for (const ParamRef& p : params_) {
    moments_.push_back({Tensor::zeros_like(*p.value),
                        Tensor::zeros_like(*p.value)});
  }
}

void AdamOptimizer::step() {
  const double lr = schedule_.at(step_count_);
  const auto t = static_cast<double>(step_count_ + 1);
  const double bc1 = 1.0 - std::pow(beta1_, t);
  const double bc2 = 1.0 - std::pow(beta2_, t);

  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& theta = *params_[pi].value;
    const Tensor& g = *params_[pi].grad;
    Tensor& m = moments_[pi].m;
    Tensor& v = moments_[pi].v;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) {
        throw Error("non-finite gradient in parameter '" + params_[pi].name +
                    "' at step " + std::to_string(step_count_));
      }
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
  ++step_count_;
}

}  // namespace yieldcast::nn
