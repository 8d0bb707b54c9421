#include "yieldcast/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "yieldcast/nn/loss.hpp"

namespace yieldcast {

std::string architecture_name(Architecture arch) {
  return arch == Architecture::kCnnDnn ? "cnn-dnn" : "cnn-lstm-dnn";
}

Architecture architecture_from_name(const std::string& name) {
  if (name == "cnn-dnn") return Architecture::kCnnDnn;
  if (name == "cnn-lstm-dnn") return Architecture::kCnnLstmDnn;
  throw Error("unknown architecture: " + name);
}

namespace {

struct ManifestLayout {
  std::size_t others_width = 0;
  std::vector<const ColumnGroup*> weather_groups;  // fixed variable order
};

ManifestLayout check_manifest(const ColumnManifest& manifest) {
  ManifestLayout layout;
  layout.others_width = manifest.weather_start();
  if (layout.others_width == 0) {
    throw Error("feature manifest has no one-hot columns before the weather "
                "block");
  }
  for (const auto& var : weather_variables()) {
    const ColumnGroup* g = manifest.find(var);
    if (g == nullptr) {
      throw Error("feature manifest is missing weather group " + var);
    }
    layout.weather_groups.push_back(g);
  }
  return layout;
}

void check_config(const ArchitectureConfig& config) {
  if (config.conv_stack.empty()) {
    throw Error("architecture config needs at least one conv layer");
  }
  for (const auto& spec : config.conv_stack) {
    if (spec.filters <= 0 || spec.kernel <= 0 || spec.stride <= 0) {
      throw Error("conv spec entries must be positive");
    }
  }
  if (config.combined_dense_width <= 0 || config.others_dense_width <= 0) {
    throw Error("dense widths must be positive");
  }
  for (const int w : config.head_widths) {
    if (w <= 0) throw Error("head widths must be positive");
  }
}

// Conv->ReLU stack for one weather variable; returns the last node id and
// the resulting (channels, length).
int add_conv_stream(nn::Graph& g, const ArchitectureConfig& config,
                    const std::string& var, int slice_id, std::size_t length,
                    std::size_t* out_channels, std::size_t* out_length,
                    Rng& rng) {
  std::size_t channels = 1;
  int node = slice_id;
  int layer_index = 0;
  for (const auto& spec : config.conv_stack) {
    ++layer_index;
    const std::string base =
        "conv" + std::to_string(layer_index) + "_" + var;
    // Validates kernel <= length before the node exists.
    length = nn::Conv1dNode::output_length(length, spec.kernel, spec.stride);
    node = g.add(std::make_unique<nn::Conv1dNode>(
        base, node, channels, static_cast<std::size_t>(spec.filters),
        static_cast<std::size_t>(spec.kernel),
        static_cast<std::size_t>(spec.stride), rng));
    node = g.add(std::make_unique<nn::ReluNode>(base + "_relu", node));
    channels = static_cast<std::size_t>(spec.filters);
  }
  *out_channels = channels;
  *out_length = length;
  return node;
}

// One-hot branch: single dense layer with no activation, then dropout.
int add_others_branch(nn::Graph& g, const ArchitectureConfig& config,
                      std::size_t others_width, int input_id, Rng& rng) {
  const int slice = g.add(std::make_unique<nn::SliceNode>(
      "input_others", input_id, 0, others_width, false));
  const int dense = g.add(std::make_unique<nn::DenseNode>(
      "others_dense", slice, others_width,
      static_cast<std::size_t>(config.others_dense_width),
      nn::Init::kFanInUniform, rng));
  return g.add(std::make_unique<nn::DropoutNode>("others_dropout", dense,
                                                 config.dropout_others));
}

// Three ReLU head layers, final dropout, single-unit output.
int add_head(nn::Graph& g, const ArchitectureConfig& config, int combined_id,
             std::size_t combined_width, Rng& rng) {
  int node = combined_id;
  std::size_t width = combined_width;
  for (std::size_t i = 0; i < config.head_widths.size(); ++i) {
    const std::string base = "head" + std::to_string(i + 1);
    node = g.add(std::make_unique<nn::DenseNode>(
        base, node, width, static_cast<std::size_t>(config.head_widths[i]),
        nn::Init::kHeUniform, rng));
    node = g.add(std::make_unique<nn::ReluNode>(base + "_relu", node));
    width = static_cast<std::size_t>(config.head_widths[i]);
  }
  node = g.add(std::make_unique<nn::DropoutNode>("final_dropout", node,
                                                 config.dropout_final));
  return g.add(std::make_unique<nn::DenseNode>(
      "output", node, width, 1, nn::Init::kFanInUniform, rng));
}

}  // namespace

nn::Graph build_cnn_dnn(const ArchitectureConfig& config,
                        const ColumnManifest& manifest) {
  check_config(config);
  const ManifestLayout layout = check_manifest(manifest);
  Rng rng(config.seed);

  nn::Graph g;
  const int input = g.add_input("features");

  std::vector<int> flattened;
  std::size_t flat_width = 0;
  for (std::size_t v = 0; v < layout.weather_groups.size(); ++v) {
    const ColumnGroup& group = *layout.weather_groups[v];
    const int slice = g.add(std::make_unique<nn::SliceNode>(
        "weather_" + group.name, input, group.start, group.width, true));
    std::size_t channels = 0, length = 0;
    const int stream = add_conv_stream(g, config, group.name, slice,
                                       group.width, &channels, &length, rng);
    flattened.push_back(g.add(
        std::make_unique<nn::FlattenNode>("flatten_" + group.name, stream)));
    flat_width += channels * length;
  }
  const int cnn_concat =
      g.add(std::make_unique<nn::ConcatNode>("cnn_concat", flattened));
  int cnn = g.add(std::make_unique<nn::DenseNode>(
      "cnn_dense", cnn_concat, flat_width,
      static_cast<std::size_t>(config.combined_dense_width),
      nn::Init::kHeUniform, rng));
  cnn = g.add(std::make_unique<nn::ReluNode>("cnn_dense_relu", cnn));
  cnn = g.add(std::make_unique<nn::DropoutNode>("cnn_dropout", cnn,
                                                config.dropout_cnn));

  const int others = add_others_branch(g, config, layout.others_width, input,
                                       rng);
  const int combined = g.add(std::make_unique<nn::ConcatNode>(
      "combine", std::vector<int>{cnn, others}));
  const std::size_t combined_width =
      static_cast<std::size_t>(config.combined_dense_width) +
      static_cast<std::size_t>(config.others_dense_width);
  g.set_output(add_head(g, config, combined, combined_width, rng));
  return g;
}

nn::Graph build_cnn_lstm_dnn(const ArchitectureConfig& config,
                             const ColumnManifest& manifest) {
  check_config(config);
  if (config.lstm_units <= 0) {
    throw Error("cnn-lstm-dnn needs a positive lstm_units");
  }
  const ManifestLayout layout = check_manifest(manifest);
  Rng rng(config.seed);

  nn::Graph g;
  const int input = g.add_input("features");

  std::vector<int> streams;
  std::size_t stream_channels = 0, stream_length = 0;
  for (std::size_t v = 0; v < layout.weather_groups.size(); ++v) {
    const ColumnGroup& group = *layout.weather_groups[v];
    const int slice = g.add(std::make_unique<nn::SliceNode>(
        "weather_" + group.name, input, group.start, group.width, true));
    streams.push_back(add_conv_stream(g, config, group.name, slice,
                                      group.width, &stream_channels,
                                      &stream_length, rng));
  }
  // Streams keep their time axis; stacking them as channels yields one
  // sequence of length stream_length with 7 * filters channels.
  int seq = g.add(std::make_unique<nn::ConcatNode>("stream_stack", streams));
  seq = g.add(std::make_unique<nn::DropoutNode>("cnn_dropout", seq,
                                                config.dropout_cnn));
  const std::size_t lstm_in =
      stream_channels * layout.weather_groups.size();
  int lstm = g.add(std::make_unique<nn::LstmNode>(
      "lstm", seq, lstm_in, static_cast<std::size_t>(config.lstm_units), rng));
  lstm = g.add(std::make_unique<nn::DropoutNode>("lstm_dropout", lstm,
                                                 config.dropout_lstm));

  const int others = add_others_branch(g, config, layout.others_width, input,
                                       rng);
  const int combined = g.add(std::make_unique<nn::ConcatNode>(
      "combine", std::vector<int>{lstm, others}));
  const std::size_t combined_width =
      static_cast<std::size_t>(config.lstm_units) +
      static_cast<std::size_t>(config.others_dense_width);
  g.set_output(add_head(g, config, combined, combined_width, rng));
  return g;
}

nn::Graph build_network(Architecture arch, const ArchitectureConfig& config,
                        const ColumnManifest& manifest) {
  return arch == Architecture::kCnnDnn ? build_cnn_dnn(config, manifest)
                                       : build_cnn_lstm_dnn(config, manifest);
}

namespace {

nn::Tensor gather_rows(const FeatureMatrix& m,
                       std::span<const std::size_t> rows) {
  nn::Tensor batch({rows.size(), m.cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(batch.data() + i * m.cols, m.values.data() + rows[i] * m.cols,
                m.cols * sizeof(double));
  }
  return batch;
}

double rmse_of(std::span<const double> y, std::span<const double> yhat) {
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

std::vector<double> predict_rows(nn::Graph& graph, const FeatureMatrix& m,
                                 std::span<const std::size_t> rows,
                                 std::size_t chunk_rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t begin = 0; begin < rows.size(); begin += chunk_rows) {
    const std::size_t end = std::min(begin + chunk_rows, rows.size());
    const nn::Tensor batch =
        gather_rows(m, rows.subspan(begin, end - begin));
    const nn::Tensor& y = graph.forward(batch, nn::Mode::kInfer);
    if (y.size() != end - begin) {
      throw Error("prediction output size mismatch");
    }
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  return out;
}

}  // namespace

std::vector<double> predict_batch(nn::Graph& graph, const FeatureMatrix& m,
                                  std::size_t chunk_rows) {
  std::vector<std::size_t> all(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) all[i] = i;
  return predict_rows(graph, m, all, chunk_rows);
}

std::vector<double> TrainedModel::predict(const FeatureMatrix& m) const {
  if (!(m.manifest == manifest)) {
    throw Error("feature matrix manifest does not match the model (" +
                architecture_name(arch) + ")");
  }
  nn::Graph scratch = graph;  // keep predict const and reentrant
  return predict_batch(scratch, m);
}

TrainedModel train(Architecture arch, const ArchitectureConfig& config,
                   const FeatureMatrix& features, const SplitIndices& split,
                   const Normalizer& normalizer,
                   const TrainConfig& train_config) {
  if (split.train.empty() || split.validation.empty()) {
    throw Error("train: empty train or validation split");
  }
  if (train_config.batch_size <= 0 || train_config.iterations <= 0) {
    throw Error("train: iterations and batch size must be positive");
  }

  TrainedModel model;
  model.arch = arch;
  model.config = config;
  model.manifest = features.manifest;
  model.normalizer = normalizer;
  model.feature_hash = features.content_hash();
  model.graph = build_network(arch, config, features.manifest);

  nn::AdamOptimizer optimizer(model.graph.parameters(), train_config.lr,
                              train_config.beta1, train_config.beta2,
                              train_config.epsilon);
  Rng batch_rng(train_config.seed);
  Rng dropout_rng(train_config.seed ^ 0x9e3779b97f4a7c15ULL);

  const std::vector<double> val_targets =
      gather(features.targets, split.validation);
  std::vector<double> best_params;
  std::vector<std::size_t> batch_rows(
      static_cast<std::size_t>(train_config.batch_size));
  std::vector<double> batch_targets(batch_rows.size());

  const std::int64_t log_every =
      train_config.log_interval > 0 ? train_config.log_interval : 1;

  for (std::int64_t step = 0; step < train_config.iterations; ++step) {
    for (std::size_t i = 0; i < batch_rows.size(); ++i) {
      batch_rows[i] = split.train[uniform_index(batch_rng, split.train.size())];
      batch_targets[i] = features.targets[batch_rows[i]];
    }
    const nn::Tensor batch = gather_rows(features, batch_rows);
    const nn::Tensor& y =
        model.graph.forward(batch, nn::Mode::kTrain, &dropout_rng);
    const nn::LossValue loss = nn::mse_loss(y, batch_targets);
    if (!std::isfinite(loss.value)) {
      throw Error("non-finite training loss at step " + std::to_string(step) +
                  " (" + architecture_name(arch) + ")");
    }
    model.graph.backward(loss.grad);
    optimizer.step();

    const bool last = step + 1 == train_config.iterations;
    if (step == 0 || (step + 1) % log_every == 0 || last) {
      const std::vector<double> val_pred =
          predict_rows(model.graph, features, split.validation, 256);
      const double val_rmse = rmse_of(val_targets, val_pred);
      model.history.push_back({step + 1, loss.value, val_rmse});
      if (val_rmse < model.best_val_rmse) {
        model.best_val_rmse = val_rmse;
        best_params = model.graph.flat_parameters();
      }
    }
  }
  model.graph.set_flat_parameters(best_params);
  return model;
}

std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::string out = "step,train_loss,val_rmse\n";
  for (const auto& h : history) {
    out += std::to_string(h.step);
    out += ',';
    out += format_double(h.train_loss);
    out += ',';
    out += format_double(h.val_rmse);
    out += '\n';
  }
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'Y', 'C', 'K', '1'};

nlohmann::json config_to_json(const ArchitectureConfig& c) {
  nlohmann::json j;
  j["conv_stack"] = nlohmann::json::array();
  for (const auto& spec : c.conv_stack) {
    j["conv_stack"].push_back({{"filters", spec.filters},
                               {"kernel", spec.kernel},
                               {"stride", spec.stride}});
  }
  j["combined_dense_width"] = c.combined_dense_width;
  j["others_dense_width"] = c.others_dense_width;
  j["head_widths"] = c.head_widths;
  j["lstm_units"] = c.lstm_units;
  j["dropout"] = {{"cnn", c.dropout_cnn},
                  {"lstm", c.dropout_lstm},
                  {"others", c.dropout_others},
                  {"final", c.dropout_final}};
  j["seed"] = c.seed;
  return j;
}

ArchitectureConfig config_from_json(const nlohmann::json& j) {
  ArchitectureConfig c;
  c.conv_stack.clear();
  for (const auto& spec : j.at("conv_stack")) {
    c.conv_stack.push_back({spec.at("filters").get<int>(),
                            spec.at("kernel").get<int>(),
                            spec.at("stride").get<int>()});
  }
  c.combined_dense_width = j.at("combined_dense_width").get<int>();
  c.others_dense_width = j.at("others_dense_width").get<int>();
  c.head_widths = j.at("head_widths").get<std::array<int, 3>>();
  c.lstm_units = j.at("lstm_units").get<int>();
  c.dropout_cnn = j.at("dropout").at("cnn").get<double>();
  c.dropout_lstm = j.at("dropout").at("lstm").get<double>();
  c.dropout_others = j.at("dropout").at("others").get<double>();
  c.dropout_final = j.at("dropout").at("final").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_model(const std::string& path, const TrainedModel& model) {
  nlohmann::json header;
  header["version"] = 1;
  header["kind"] = "yieldcast-checkpoint";
  header["arch"] = architecture_name(model.arch);
  header["config"] = config_to_json(model.config);
  header["manifest"] = manifest_to_json(model.manifest);
  header["normalizer"] = normalizer_to_json(model.normalizer);
  header["feature_hash"] = model.feature_hash;
  header["best_val_rmse"] = model.best_val_rmse;

  nn::Graph graph = model.graph;  // parameters() wants mutable access
  header["params"] = nlohmann::json::array();
  std::size_t total = 0;
  for (const nn::ParamRef& p : graph.parameters()) {
    header["params"].push_back({{"name", p.name}, {"shape", p.value->shape()}});
    total += p.value->size();
  }

  const std::vector<double> payload = graph.flat_parameters();
  const std::string header_text = header.dump();
  std::string blob;
  blob.reserve(12 + header_text.size() + payload.size() * sizeof(double));
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t header_len = header_text.size();
  blob.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  blob += header_text;
  blob.append(reinterpret_cast<const char*>(payload.data()),
              payload.size() * sizeof(double));
  (void)total;
  atomic_write_file(path, blob);
}

TrainedModel load_model(const std::string& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 12 || std::memcmp(blob.data(), kCheckpointMagic, 4) != 0) {
    throw Error("not a model checkpoint: " + path);
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, blob.data() + 4, sizeof(header_len));
  if (blob.size() < 12 + header_len) {
    throw Error("truncated model checkpoint: " + path);
  }
  const nlohmann::json header =
      nlohmann::json::parse(blob.substr(12, header_len));
  if (header.at("version").get<int>() != 1) {
    throw Error("unsupported checkpoint version in " + path);
  }

  TrainedModel model;
  model.arch = architecture_from_name(header.at("arch").get<std::string>());
  model.config = config_from_json(header.at("config"));
  model.manifest = manifest_from_json(header.at("manifest"));
  model.normalizer = normalizer_from_json(header.at("normalizer"));
  model.feature_hash = header.at("feature_hash").get<std::uint64_t>();
  model.best_val_rmse = header.at("best_val_rmse").get<double>();
  model.graph = build_network(model.arch, model.config, model.manifest);

  // The rebuilt topology must match the stored parameter table exactly.
  const auto params = model.graph.parameters();
  const auto& stored = header.at("params");
  if (stored.size() != params.size()) {
    throw Error("checkpoint parameter table size mismatch in " + path);
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (stored[i].at("name").get<std::string>() != params[i].name ||
        stored[i].at("shape").get<std::vector<std::size_t>>() !=
            params[i].value->shape()) {
      throw Error("checkpoint parameter " + params[i].name +
                  " does not match the rebuilt topology in " + path);
    }
    total += params[i].value->size();
  }
  if (blob.size() != 12 + header_len + total * sizeof(double)) {
    throw Error("checkpoint payload size mismatch in " + path);
  }
  std::vector<double> payload(total);
  std::memcpy(payload.data(), blob.data() + 12 + header_len,
              total * sizeof(double));
  model.graph.set_flat_parameters(payload);
  return model;
}

}  // namespace yieldcast
