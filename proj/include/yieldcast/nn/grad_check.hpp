#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "yieldcast/nn/graph.hpp"

namespace yieldcast::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;        // probes that produced a valid comparison
  std::size_t kink_skips = 0;    // probes discarded for crossing a ReLU kink
  std::string worst_param;
};

// Central-difference check of the analytic gradient of the MSE loss with
// respect to a sampled subset of each parameter tensor. Runs in inference
// mode, so dropout is disabled; the forward pass must be deterministic.
// Relative error uses a unit floor: |a - n| / max(1, |a| + |n|).
//
// A probe whose +eps and -eps evaluations land on different sides of a ReLU
// kink does not measure the derivative of anything; such probes are detected
// by comparing activation sign patterns and skipped (counted in kink_skips).
GradCheckResult grad_check(Graph& graph, const Tensor& input,
                           std::span<const double> targets, double eps,
                           std::size_t probes_per_tensor = 24,
                           std::uint64_t seed = 20240901);

}  // namespace yieldcast::nn
