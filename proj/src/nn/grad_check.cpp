#include "yieldcast/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "yieldcast/nn/loss.hpp"

namespace yieldcast::nn {

namespace {

// Sign pattern of every ReLU input after the most recent forward pass.
std::vector<char> relu_signature(Graph& graph) {
  std::vector<char> signature;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const Node& node = graph.node(i);
    if (dynamic_cast<const ReluNode*>(&node) == nullptr) continue;
    const Tensor& x = graph.node(node.inputs()[0]).value;
    for (std::size_t j = 0; j < x.size(); ++j) {
      signature.push_back(x[j] > 0.0 ? 1 : 0);
    }
  }
  return signature;
}

}  // namespace

GradCheckResult grad_check(Graph& graph, const Tensor& input,
                           std::span<const double> targets, double eps,
                           std::size_t probes_per_tensor, std::uint64_t seed) {
  const LossValue loss = mse_loss(graph.forward(input, Mode::kInfer), targets);
  graph.backward(loss.grad);

  // Snapshot analytic gradients before probing perturbs anything.
  std::vector<std::vector<double>> analytic;
  auto params = graph.parameters();
  analytic.reserve(params.size());
  for (const ParamRef& p : params) analytic.push_back(p.grad->values());

  Rng rng(seed);
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& theta = *params[pi].value;
    std::set<std::size_t> picked;
    const std::size_t wanted = std::min(probes_per_tensor, theta.size());
    while (picked.size() < wanted) {
      picked.insert(uniform_index(rng, theta.size()));
    }
    for (const std::size_t i : picked) {
      const double original = theta[i];
      theta[i] = original + eps;
      const double f_plus =
          mse_loss(graph.forward(input, Mode::kInfer), targets).value;
      const std::vector<char> sig_plus = relu_signature(graph);
      theta[i] = original - eps;
      const double f_minus =
          mse_loss(graph.forward(input, Mode::kInfer), targets).value;
      const std::vector<char> sig_minus = relu_signature(graph);
      theta[i] = original;

      if (sig_plus != sig_minus) {
        ++result.kink_skips;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) /
                         std::max(1.0, std::abs(a) + std::abs(numeric));
      ++result.probes;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param =
            params[pi].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace yieldcast::nn
