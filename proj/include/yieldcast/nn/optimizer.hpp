#pragma once

#include <cstdint>
#include <vector>

#include "yieldcast/nn/graph.hpp"

namespace yieldcast::nn {

// Staircase exponential decay: base * rate^floor(step / interval).
struct LrSchedule {
  double base_lr = 4e-4;
  double decay_rate = 0.96;
  std::int64_t decay_interval = 2500;

  double at(std::int64_t step) const;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamRef> params, LrSchedule schedule,
                double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  // One update from the gradients currently stored in the parameter refs.
  // Throws on non-finite gradients, naming the parameter.
  void step();

  std::int64_t steps() const { return step_count_; }
  double current_lr() const { return schedule_.at(step_count_); }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  std::vector<ParamRef> params_;
  std::vector<Moments> moments_;
  LrSchedule schedule_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::int64_t step_count_ = 0;
};

}  // namespace yieldcast::nn
