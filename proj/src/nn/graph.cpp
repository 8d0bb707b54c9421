#include "yieldcast/nn/graph.hpp"

#include <cmath>

namespace yieldcast::nn {

namespace {

void ensure_shape(Tensor& t, std::vector<std::size_t> shape) {
  if (t.shape() != shape) t = Tensor(std::move(shape));
}

void check_rank(const Tensor& t, std::size_t rank, const std::string& layer) {
  if (t.rank() != rank) {
    throw Error(layer + ": expected rank-" + std::to_string(rank) +
                " input, got shape " + t.shape_string());
  }
}

double uniform_init(Rng& rng, double limit) {
  return uniform_real(rng, -limit, limit);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------
// SliceNode

void SliceNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  const Tensor& x = *in[0];
  check_rank(x, 2, name_);
  if (start_ + width_ > x.dim(1)) {
    throw Error(name_ + ": slice [" + std::to_string(start_) + ", " +
                std::to_string(start_ + width_) + ") outside input " +
                x.shape_string());
  }
  const std::size_t batch = x.dim(0);
  if (as_sequence_) {
    ensure_shape(value, {batch, 1, width_});
  } else {
    ensure_shape(value, {batch, width_});
  }
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = x.data() + b * x.dim(1) + start_;
    double* dst = value.data() + b * width_;
    for (std::size_t j = 0; j < width_; ++j) dst[j] = src[j];
  }
}

void SliceNode::backward(const std::vector<const Tensor*>& in,
                         const std::vector<Tensor*>& in_grads) {
  const Tensor& x = *in[0];
  Tensor& dx = *in_grads[0];
  const std::size_t batch = x.dim(0);
  for (std::size_t b = 0; b < batch; ++b) {
    double* dst = dx.data() + b * x.dim(1) + start_;
    const double* src = grad.data() + b * width_;
    for (std::size_t j = 0; j < width_; ++j) dst[j] += src[j];
  }
}

// ---------------------------------------------------------------------------
// DenseNode

DenseNode::DenseNode(std::string name, int input, std::size_t in_dim,
                     std::size_t out_dim, Init init, Rng& rng)
    : Node(std::move(name), {input}),
      weight(Tensor({out_dim, in_dim})),
      bias(Tensor({out_dim})),
      weight_grad_(Tensor({out_dim, in_dim})),
      bias_grad_(Tensor({out_dim})) {
  if (in_dim == 0 || out_dim == 0) {
    throw Error(name_ + ": dense dimensions must be positive");
  }
  const double limit = init == Init::kHeUniform
                           ? std::sqrt(6.0 / static_cast<double>(in_dim))
                           : std::sqrt(3.0 / static_cast<double>(in_dim));
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] = uniform_init(rng, limit);
  }
}

void DenseNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  const Tensor& x = *in[0];
  check_rank(x, 2, name_);
  const std::size_t out_dim = weight.dim(0);
  const std::size_t in_dim = weight.dim(1);
  if (x.dim(1) != in_dim) {
    throw Error(name_ + ": expected " + std::to_string(in_dim) +
                " input features, got shape " + x.shape_string());
  }
  const std::size_t batch = x.dim(0);
  ensure_shape(value, {batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.data() + b * in_dim;
    double* yb = value.data() + b * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wo = weight.data() + o * in_dim;
      double acc = bias[o];
      for (std::size_t i = 0; i < in_dim; ++i) acc += wo[i] * xb[i];
      yb[o] = acc;
    }
  }
}

void DenseNode::backward(const std::vector<const Tensor*>& in,
                         const std::vector<Tensor*>& in_grads) {
  const Tensor& x = *in[0];
  Tensor& dx = *in_grads[0];
  const std::size_t batch = x.dim(0);
  const std::size_t out_dim = weight.dim(0);
  const std::size_t in_dim = weight.dim(1);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gb = grad.data() + b * out_dim;
    const double* xb = x.data() + b * in_dim;
    double* dxb = dx.data() + b * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double g = gb[o];
      if (g == 0.0) continue;
      double* dwo = weight_grad_.data() + o * in_dim;
      const double* wo = weight.data() + o * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) {
        dwo[i] += g * xb[i];
        dxb[i] += g * wo[i];
      }
      bias_grad_[o] += g;
    }
  }
}

void DenseNode::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight", &weight, &weight_grad_});
  out.push_back({name_ + ".bias", &bias, &bias_grad_});
}

// ---------------------------------------------------------------------------
// Conv1dNode

std::size_t Conv1dNode::output_length(std::size_t len, std::size_t kernel,
                                      std::size_t stride) {
  if (kernel > len) {
    throw Error("conv1d kernel " + std::to_string(kernel) +
                " exceeds input length " + std::to_string(len));
  }
  if (stride == 0) throw Error("conv1d stride must be positive");
  return (len - kernel) / stride + 1;
}

Conv1dNode::Conv1dNode(std::string name, int input, std::size_t in_channels,
                       std::size_t filters_count, std::size_t kernel,
                       std::size_t stride, Rng& rng)
    : Node(std::move(name), {input}),
      filters(Tensor({filters_count, in_channels, kernel})),
      bias(Tensor({filters_count})),
      stride_(stride),
      filters_grad_(Tensor({filters_count, in_channels, kernel})),
      bias_grad_(Tensor({filters_count})) {
  if (filters_count == 0 || in_channels == 0 || kernel == 0) {
    throw Error(name_ + ": conv dimensions must be positive");
  }
  if (stride == 0) throw Error(name_ + ": stride must be positive");
  const double fan_in = static_cast<double>(in_channels * kernel);
  const double limit = std::sqrt(6.0 / fan_in);
  for (std::size_t i = 0; i < filters.size(); ++i) {
    filters[i] = uniform_init(rng, limit);
  }
}

void Conv1dNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  const Tensor& x = *in[0];
  check_rank(x, 3, name_);
  const std::size_t channels = filters.dim(1);
  const std::size_t kernel = filters.dim(2);
  if (x.dim(1) != channels) {
    throw Error(name_ + ": expected " + std::to_string(channels) +
                " channels, got shape " + x.shape_string());
  }
  const std::size_t batch = x.dim(0);
  const std::size_t len = x.dim(2);
  std::size_t out_len;
  try {
    out_len = output_length(len, kernel, stride_);
  } catch (const Error& e) {
    throw Error(name_ + ": " + e.what());
  }
  const std::size_t n_filters = filters.dim(0);
  ensure_shape(value, {batch, n_filters, out_len});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < n_filters; ++f) {
      double* out_row = value.data() + (b * n_filters + f) * out_len;
      for (std::size_t o = 0; o < out_len; ++o) out_row[o] = bias[f];
      for (std::size_t c = 0; c < channels; ++c) {
        const double* w = filters.data() + (f * channels + c) * kernel;
        const double* xc = x.data() + (b * channels + c) * len;
        for (std::size_t o = 0; o < out_len; ++o) {
          const double* window = xc + o * stride_;
          double acc = 0.0;
          for (std::size_t k = 0; k < kernel; ++k) acc += w[k] * window[k];
          out_row[o] += acc;
        }
      }
    }
  }
}

void Conv1dNode::backward(const std::vector<const Tensor*>& in,
                          const std::vector<Tensor*>& in_grads) {
  const Tensor& x = *in[0];
  Tensor& dx = *in_grads[0];
  const std::size_t batch = x.dim(0);
  const std::size_t channels = filters.dim(1);
  const std::size_t kernel = filters.dim(2);
  const std::size_t len = x.dim(2);
  const std::size_t n_filters = filters.dim(0);
  const std::size_t out_len = value.dim(2);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t f = 0; f < n_filters; ++f) {
      const double* g_row = grad.data() + (b * n_filters + f) * out_len;
      for (std::size_t o = 0; o < out_len; ++o) bias_grad_[f] += g_row[o];
      for (std::size_t c = 0; c < channels; ++c) {
        double* dw = filters_grad_.data() + (f * channels + c) * kernel;
        const double* w = filters.data() + (f * channels + c) * kernel;
        const double* xc = x.data() + (b * channels + c) * len;
        double* dxc = dx.data() + (b * channels + c) * len;
        for (std::size_t o = 0; o < out_len; ++o) {
          const double g = g_row[o];
          if (g == 0.0) continue;
          const std::size_t base = o * stride_;
          for (std::size_t k = 0; k < kernel; ++k) {
            dw[k] += g * xc[base + k];
            dxc[base + k] += g * w[k];
          }
        }
      }
    }
  }
}

void Conv1dNode::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".filters", &filters, &filters_grad_});
  out.push_back({name_ + ".bias", &bias, &bias_grad_});
}

// ---------------------------------------------------------------------------
// ReluNode

void ReluNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  const Tensor& x = *in[0];
  ensure_shape(value, x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    value[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

void ReluNode::backward(const std::vector<const Tensor*>& in,
                        const std::vector<Tensor*>& in_grads) {
  const Tensor& x = *in[0];
  Tensor& dx = *in_grads[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) dx[i] += grad[i];
  }
}

// ---------------------------------------------------------------------------
// DropoutNode

void DropoutNode::forward(const std::vector<const Tensor*>& in, Mode mode,
                          Rng* rng) {
  const Tensor& x = *in[0];
  ensure_shape(value, x.shape());
  if (mode == Mode::kInfer || ratio_ == 0.0) {
    identity_ = true;
    for (std::size_t i = 0; i < x.size(); ++i) value[i] = x[i];
    return;
  }
  if (rng == nullptr) {
    throw Error(name_ + ": training-mode dropout needs an RNG");
  }
  identity_ = false;
  ensure_shape(mask_, x.shape());
  const double keep_scale = 1.0 / (1.0 - ratio_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = uniform_real(*rng, 0.0, 1.0);
    mask_[i] = u < ratio_ ? 0.0 : keep_scale;
    value[i] = x[i] * mask_[i];
  }
}

void DropoutNode::backward(const std::vector<const Tensor*>&,
                           const std::vector<Tensor*>& in_grads) {
  Tensor& dx = *in_grads[0];
  if (identity_) {
    for (std::size_t i = 0; i < grad.size(); ++i) dx[i] += grad[i];
    return;
  }
  for (std::size_t i = 0; i < grad.size(); ++i) dx[i] += grad[i] * mask_[i];
}

// ---------------------------------------------------------------------------
// FlattenNode

void FlattenNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  const Tensor& x = *in[0];
  check_rank(x, 3, name_);
  ensure_shape(value, {x.dim(0), x.dim(1) * x.dim(2)});
  for (std::size_t i = 0; i < x.size(); ++i) value[i] = x[i];
}

void FlattenNode::backward(const std::vector<const Tensor*>&,
                           const std::vector<Tensor*>& in_grads) {
  Tensor& dx = *in_grads[0];
  for (std::size_t i = 0; i < grad.size(); ++i) dx[i] += grad[i];
}

// ---------------------------------------------------------------------------
// ConcatNode

void ConcatNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  if (in.empty()) throw Error(name_ + ": concat needs at least one input");
  const std::size_t rank = in[0]->rank();
  if (rank != 2 && rank != 3) {
    throw Error(name_ + ": concat supports rank 2 or 3, got shape " +
                in[0]->shape_string());
  }
  const std::size_t batch = in[0]->dim(0);
  std::size_t total = 0;
  for (const Tensor* t : in) {
    if (t->rank() != rank || t->dim(0) != batch ||
        (rank == 3 && t->dim(2) != in[0]->dim(2))) {
      throw Error(name_ + ": concat input shapes differ: " +
                  in[0]->shape_string() + " vs " + t->shape_string());
    }
    total += t->dim(1);
  }
  if (rank == 2) {
    ensure_shape(value, {batch, total});
    for (std::size_t b = 0; b < batch; ++b) {
      double* dst = value.data() + b * total;
      for (const Tensor* t : in) {
        const std::size_t w = t->dim(1);
        const double* src = t->data() + b * w;
        for (std::size_t j = 0; j < w; ++j) *dst++ = src[j];
      }
    }
  } else {
    const std::size_t len = in[0]->dim(2);
    ensure_shape(value, {batch, total, len});
    for (std::size_t b = 0; b < batch; ++b) {
      double* dst = value.data() + b * total * len;
      for (const Tensor* t : in) {
        const std::size_t chunk = t->dim(1) * len;
        const double* src = t->data() + b * chunk;
        for (std::size_t j = 0; j < chunk; ++j) *dst++ = src[j];
      }
    }
  }
}

void ConcatNode::backward(const std::vector<const Tensor*>& in,
                          const std::vector<Tensor*>& in_grads) {
  const std::size_t rank = in[0]->rank();
  const std::size_t batch = in[0]->dim(0);
  if (rank == 2) {
    const std::size_t total = value.dim(1);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = grad.data() + b * total;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t w = in[k]->dim(1);
        double* dst = in_grads[k]->data() + b * w;
        for (std::size_t j = 0; j < w; ++j) dst[j] += *src++;
      }
    }
  } else {
    const std::size_t len = in[0]->dim(2);
    const std::size_t total = value.dim(1);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = grad.data() + b * total * len;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t chunk = in[k]->dim(1) * len;
        double* dst = in_grads[k]->data() + b * chunk;
        for (std::size_t j = 0; j < chunk; ++j) dst[j] += *src++;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// LstmNode

LstmNode::LstmNode(std::string name, int input, std::size_t in_channels,
                   std::size_t hidden, Rng& rng)
    : Node(std::move(name), {input}),
      wx(Tensor({4 * hidden, in_channels})),
      wh(Tensor({4 * hidden, hidden})),
      bias(Tensor({4 * hidden})),
      hidden_(hidden),
      wx_grad_(Tensor({4 * hidden, in_channels})),
      wh_grad_(Tensor({4 * hidden, hidden})),
      bias_grad_(Tensor({4 * hidden})) {
  if (hidden == 0 || in_channels == 0) {
    throw Error(name_ + ": lstm dimensions must be positive");
  }
  const double x_limit = std::sqrt(3.0 / static_cast<double>(in_channels));
  const double h_limit = std::sqrt(3.0 / static_cast<double>(hidden));
  for (std::size_t i = 0; i < wx.size(); ++i) wx[i] = uniform_init(rng, x_limit);
  for (std::size_t i = 0; i < wh.size(); ++i) wh[i] = uniform_init(rng, h_limit);
  // Forget-gate bias starts open so early gradients flow through time.
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;
}

void LstmNode::forward(const std::vector<const Tensor*>& in, Mode, Rng*) {
  const Tensor& x = *in[0];
  check_rank(x, 3, name_);
  const std::size_t channels = wx.dim(1);
  if (x.dim(1) != channels) {
    throw Error(name_ + ": expected " + std::to_string(channels) +
                " channels, got shape " + x.shape_string());
  }
  const std::size_t batch = x.dim(0);
  const std::size_t steps = x.dim(2);
  if (steps == 0) throw Error(name_ + ": empty sequence");
  const std::size_t h = hidden_;

  gates_.assign(steps, Tensor({batch, 4 * h}));
  cells_.assign(steps, Tensor({batch, h}));
  hiddens_.assign(steps, Tensor({batch, h}));

  std::vector<double> xt(batch * channels);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        xt[b * channels + c] = x.at3(b, c, t);
      }
    }
    const Tensor* h_prev = t > 0 ? &hiddens_[t - 1] : nullptr;
    Tensor& z = gates_[t];
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = xt.data() + b * channels;
      double* zb = z.data() + b * 4 * h;
      for (std::size_t j = 0; j < 4 * h; ++j) {
        const double* wxj = wx.data() + j * channels;
        double acc = bias[j];
        for (std::size_t c = 0; c < channels; ++c) acc += wxj[c] * xb[c];
        if (h_prev != nullptr) {
          const double* whj = wh.data() + j * h;
          const double* hb = h_prev->data() + b * h;
          for (std::size_t k = 0; k < h; ++k) acc += whj[k] * hb[k];
        }
        zb[j] = acc;
      }
      // Activate in place: [i f g o] blocks.
      for (std::size_t k = 0; k < h; ++k) {
        const double i_gate = sigmoid(zb[k]);
        const double f_gate = sigmoid(zb[h + k]);
        const double g_gate = std::tanh(zb[2 * h + k]);
        const double o_gate = sigmoid(zb[3 * h + k]);
        zb[k] = i_gate;
        zb[h + k] = f_gate;
        zb[2 * h + k] = g_gate;
        zb[3 * h + k] = o_gate;
        const double c_prev = t > 0 ? cells_[t - 1].at2(b, k) : 0.0;
        const double c_t = f_gate * c_prev + i_gate * g_gate;
        cells_[t].at2(b, k) = c_t;
        hiddens_[t].at2(b, k) = o_gate * std::tanh(c_t);
      }
    }
  }
  value = hiddens_[steps - 1];
}

void LstmNode::backward(const std::vector<const Tensor*>& in,
                        const std::vector<Tensor*>& in_grads) {
  const Tensor& x = *in[0];
  Tensor& dx = *in_grads[0];
  const std::size_t batch = x.dim(0);
  const std::size_t channels = wx.dim(1);
  const std::size_t steps = x.dim(2);
  const std::size_t h = hidden_;

  Tensor dh = grad;                 // (batch, h)
  Tensor dc(Tensor({batch, h}));    // running cell gradient
  Tensor dz(Tensor({batch, 4 * h}));
  std::vector<double> xt(batch * channels);

  for (std::size_t t = steps; t-- > 0;) {
    const Tensor& gates = gates_[t];
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        xt[b * channels + c] = x.at3(b, c, t);
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gb = gates.data() + b * 4 * h;
      double* dzb = dz.data() + b * 4 * h;
      for (std::size_t k = 0; k < h; ++k) {
        const double i_gate = gb[k];
        const double f_gate = gb[h + k];
        const double g_gate = gb[2 * h + k];
        const double o_gate = gb[3 * h + k];
        const double c_t = cells_[t].at2(b, k);
        const double tanh_c = std::tanh(c_t);
        const double dh_bk = dh.at2(b, k);

        const double d_o = dh_bk * tanh_c;
        double dc_bk = dc.at2(b, k) + dh_bk * o_gate * (1.0 - tanh_c * tanh_c);

        const double c_prev = t > 0 ? cells_[t - 1].at2(b, k) : 0.0;
        const double d_i = dc_bk * g_gate;
        const double d_f = dc_bk * c_prev;
        const double d_g = dc_bk * i_gate;

        dzb[k] = d_i * i_gate * (1.0 - i_gate);
        dzb[h + k] = d_f * f_gate * (1.0 - f_gate);
        dzb[2 * h + k] = d_g * (1.0 - g_gate * g_gate);
        dzb[3 * h + k] = d_o * o_gate * (1.0 - o_gate);

        dc.at2(b, k) = dc_bk * f_gate;  // becomes dc_{t-1}
      }
    }

    const Tensor* h_prev = t > 0 ? &hiddens_[t - 1] : nullptr;
    // Parameter gradients and upstream gradients for x_t and h_{t-1}.
    Tensor dh_prev({batch, h});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* dzb = dz.data() + b * 4 * h;
      const double* xb = xt.data() + b * channels;
      for (std::size_t j = 0; j < 4 * h; ++j) {
        const double g = dzb[j];
        if (g == 0.0) continue;
        double* dwxj = wx_grad_.data() + j * channels;
        for (std::size_t c = 0; c < channels; ++c) dwxj[c] += g * xb[c];
        if (h_prev != nullptr) {
          double* dwhj = wh_grad_.data() + j * h;
          const double* hb = h_prev->data() + b * h;
          for (std::size_t k = 0; k < h; ++k) dwhj[k] += g * hb[k];
        }
        bias_grad_[j] += g;
      }
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 4 * h; ++j) {
          acc += dzb[j] * wx.data()[j * channels + c];
        }
        dx.at3(b, c, t) += acc;
      }
      if (t > 0) {
        double* dhp = dh_prev.data() + b * h;
        for (std::size_t k = 0; k < h; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < 4 * h; ++j) {
            acc += dzb[j] * wh.data()[j * h + k];
          }
          dhp[k] = acc;
        }
      }
    }
    dh = std::move(dh_prev);
  }
}

void LstmNode::collect_params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".wx", &wx, &wx_grad_});
  out.push_back({name_ + ".wh", &wh, &wh_grad_});
  out.push_back({name_ + ".bias", &bias, &bias_grad_});
}

// ---------------------------------------------------------------------------
// Graph

Graph& Graph::operator=(const Graph& other) {
  if (this == &other) return *this;
  nodes_.clear();
  nodes_.reserve(other.nodes_.size());
  for (const auto& n : other.nodes_) nodes_.push_back(n->clone());
  input_ = other.input_;
  output_ = other.output_;
  return *this;
}

int Graph::add(std::unique_ptr<Node> node) {
  for (const int dep : node->inputs()) {
    if (dep < 0 || dep >= static_cast<int>(nodes_.size())) {
      throw Error("graph node '" + node->name() +
                  "' references unknown input " + std::to_string(dep));
    }
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::add_input(std::string name) {
  if (input_ >= 0) throw Error("graph already has an input node");
  input_ = add(std::make_unique<InputNode>(std::move(name)));
  return input_;
}

void Graph::set_output(int id) {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw Error("graph output id out of range");
  }
  output_ = id;
}

std::vector<const Tensor*> Graph::input_values(const Node& n) const {
  std::vector<const Tensor*> in;
  in.reserve(n.inputs().size());
  for (const int dep : n.inputs()) in.push_back(&nodes_[dep]->value);
  return in;
}

const Tensor& Graph::forward(const Tensor& input, Mode mode, Rng* rng) {
  if (input_ < 0 || output_ < 0) {
    throw Error("graph is missing its input or output node");
  }
  nodes_[input_]->value = input;
  for (auto& node : nodes_) {
    if (node->inputs().empty()) continue;
    node->forward(input_values(*node), mode, rng);
  }
  return nodes_[output_]->value;
}

void Graph::backward(const Tensor& output_grad) {
  if (!output_grad.same_shape(nodes_[output_]->value)) {
    throw Error("backward: output grad shape " + output_grad.shape_string() +
                " does not match output " +
                nodes_[output_]->value.shape_string());
  }
  for (auto& node : nodes_) {
    if (node->grad.same_shape(node->value)) {
      node->grad.zero();
    } else {
      node->grad = Tensor::zeros_like(node->value);
    }
  }
  for (const ParamRef& p : parameters()) p.grad->zero();

  nodes_[output_]->grad = output_grad;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = *nodes_[i];
    if (node.inputs().empty()) continue;
    std::vector<Tensor*> in_grads;
    in_grads.reserve(node.inputs().size());
    for (const int dep : node.inputs()) in_grads.push_back(&nodes_[dep]->grad);
    node.backward(input_values(node), in_grads);
  }
}

std::vector<ParamRef> Graph::parameters() {
  std::vector<ParamRef> out;
  for (auto& node : nodes_) node->collect_params(out);
  return out;
}

std::size_t Graph::parameter_count() {
  std::size_t n = 0;
  for (const ParamRef& p : parameters()) n += p.value->size();
  return n;
}

std::vector<double> Graph::flat_parameters() {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const ParamRef& p : parameters()) {
    out.insert(out.end(), p.value->values().begin(), p.value->values().end());
  }
  return out;
}

void Graph::set_flat_parameters(std::span<const double> values) {
  std::size_t pos = 0;
  for (const ParamRef& p : parameters()) {
    if (pos + p.value->size() > values.size()) {
      throw Error("set_flat_parameters: payload too short");
    }
    std::copy(values.begin() + pos, values.begin() + pos + p.value->size(),
              p.value->values().begin());
    pos += p.value->size();
  }
  if (pos != values.size()) {
    throw Error("set_flat_parameters: payload has " +
                std::to_string(values.size()) + " values, graph expects " +
                std::to_string(pos));
  }
}

}  // namespace yieldcast::nn
