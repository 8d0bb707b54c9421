#pragma once

#include <memory>
#include <string>
#include <vector>

#include "yieldcast/nn/tensor.hpp"
#include "yieldcast/util.hpp"

namespace yieldcast::nn {

enum class Mode { kTrain, kInfer };

// He-style limits feed ReLU units; fan-in limits everything else.
enum class Init { kHeUniform, kFanInUniform };

struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

// One operation in a static DAG. `value` holds the last forward result and
// `grad` accumulates dLoss/dvalue during the reverse sweep. Backward assumes
// the caches written by the most recent forward call.
class Node {
 public:
  Node(std::string name, std::vector<int> inputs)
      : name_(std::move(name)), inputs_(std::move(inputs)) {}
  virtual ~Node() = default;

  virtual std::unique_ptr<Node> clone() const = 0;
  virtual void forward(const std::vector<const Tensor*>& in, Mode mode,
                       Rng* rng) = 0;
  // Adds input gradients into in_grads and parameter gradients in place.
  virtual void backward(const std::vector<const Tensor*>& in,
                        const std::vector<Tensor*>& in_grads) = 0;
  virtual void collect_params(std::vector<ParamRef>&) {}

  const std::string& name() const { return name_; }
  const std::vector<int>& inputs() const { return inputs_; }

  Tensor value;
  Tensor grad;

 protected:
  std::string name_;
  std::vector<int> inputs_;
};

class InputNode final : public Node {
 public:
  explicit InputNode(std::string name) : Node(std::move(name), {}) {}
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<InputNode>(*this);
  }
  void forward(const std::vector<const Tensor*>&, Mode, Rng*) override {}
  void backward(const std::vector<const Tensor*>&,
                const std::vector<Tensor*>&) override {}
};

// Columns [start, start+width) of a (batch, d) input; emits (batch, width),
// or (batch, 1, width) when as_sequence is set (one-channel conv input).
class SliceNode final : public Node {
 public:
  SliceNode(std::string name, int input, std::size_t start, std::size_t width,
            bool as_sequence)
      : Node(std::move(name), {input}),
        start_(start),
        width_(width),
        as_sequence_(as_sequence) {}
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<SliceNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;

 private:
  std::size_t start_;
  std::size_t width_;
  bool as_sequence_;
};

// y = x W^T + b with W (out, in), x (batch, in).
class DenseNode final : public Node {
 public:
  DenseNode(std::string name, int input, std::size_t in_dim,
            std::size_t out_dim, Init init, Rng& rng);
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<DenseNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;
  void collect_params(std::vector<ParamRef>& out) override;

  Tensor weight;  // (out, in)
  Tensor bias;    // (out)

 private:
  Tensor weight_grad_;
  Tensor bias_grad_;
};

// Valid-padding 1-D convolution: x (batch, in_ch, len) -> (batch, filters,
// (len - kernel) / stride + 1).
class Conv1dNode final : public Node {
 public:
  Conv1dNode(std::string name, int input, std::size_t in_channels,
             std::size_t filters, std::size_t kernel, std::size_t stride,
             Rng& rng);
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<Conv1dNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;
  void collect_params(std::vector<ParamRef>& out) override;

  static std::size_t output_length(std::size_t len, std::size_t kernel,
                                   std::size_t stride);

  Tensor filters;  // (out_ch, in_ch, kernel)
  Tensor bias;     // (out_ch)

 private:
  std::size_t stride_;
  Tensor filters_grad_;
  Tensor bias_grad_;
};

class ReluNode final : public Node {
 public:
  ReluNode(std::string name, int input) : Node(std::move(name), {input}) {}
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<ReluNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;
};

// Inverted dropout: training zeroes with probability `ratio` and scales
// survivors by 1/(1-ratio); inference is the identity.
class DropoutNode final : public Node {
 public:
  DropoutNode(std::string name, int input, double ratio)
      : Node(std::move(name), {input}), ratio_(ratio) {
    if (ratio < 0.0 || ratio >= 1.0) {
      throw Error("dropout ratio must be in [0, 1): " + format_double(ratio));
    }
  }
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<DropoutNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode mode,
               Rng* rng) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;

  double ratio() const { return ratio_; }

 private:
  double ratio_;
  Tensor mask_;  // scaled keep mask from the last training forward
  bool identity_ = true;
};

// (batch, c, l) -> (batch, c*l)
class FlattenNode final : public Node {
 public:
  FlattenNode(std::string name, int input) : Node(std::move(name), {input}) {}
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<FlattenNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;
};

// Concatenates rank-2 inputs along columns or rank-3 inputs along channels.
class ConcatNode final : public Node {
 public:
  ConcatNode(std::string name, std::vector<int> inputs)
      : Node(std::move(name), std::move(inputs)) {}
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<ConcatNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;
};

// Consumes (batch, channels, time) and emits the final hidden state
// (batch, hidden). Gate blocks are packed [input; forget; cell; output].
class LstmNode final : public Node {
 public:
  LstmNode(std::string name, int input, std::size_t in_channels,
           std::size_t hidden, Rng& rng);
  std::unique_ptr<Node> clone() const override {
    return std::make_unique<LstmNode>(*this);
  }
  void forward(const std::vector<const Tensor*>& in, Mode, Rng*) override;
  void backward(const std::vector<const Tensor*>& in,
                const std::vector<Tensor*>& in_grads) override;
  void collect_params(std::vector<ParamRef>& out) override;

  Tensor wx;    // (4H, C)
  Tensor wh;    // (4H, H)
  Tensor bias;  // (4H), forget block initialized to 1

 private:
  std::size_t hidden_;
  Tensor wx_grad_, wh_grad_, bias_grad_;
  // Per-step caches from the last forward.
  std::vector<Tensor> gates_;   // (batch, 4H) post-activation [i f g o]
  std::vector<Tensor> cells_;   // (batch, H) c_t
  std::vector<Tensor> hiddens_; // (batch, H) h_t
};

// Static DAG executed in construction order. Node inputs must refer to
// already-added nodes, so the vector order is a topological order.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph& other) { *this = other; }
  Graph& operator=(const Graph& other);
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  int add(std::unique_ptr<Node> node);
  int add_input(std::string name);
  void set_output(int id);

  const Tensor& forward(const Tensor& input, Mode mode, Rng* rng = nullptr);
  // Zeroes gradients, seeds the output node and sweeps in reverse.
  void backward(const Tensor& output_grad);

  std::vector<ParamRef> parameters();
  std::size_t parameter_count();
  std::vector<double> flat_parameters();
  void set_flat_parameters(std::span<const double> values);

  const Node& node(int id) const { return *nodes_[id]; }
  Node& node(int id) { return *nodes_[id]; }
  std::size_t node_count() const { return nodes_.size(); }
  int output_id() const { return output_; }

 private:
  std::vector<const Tensor*> input_values(const Node& n) const;

  std::vector<std::unique_ptr<Node>> nodes_;
  int input_ = -1;
  int output_ = -1;
};

}  // namespace yieldcast::nn
