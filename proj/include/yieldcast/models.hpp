#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "yieldcast/nn/graph.hpp"
#include "yieldcast/nn/optimizer.hpp"
#include "yieldcast/preprocess.hpp"

namespace yieldcast {

enum class Architecture { kCnnDnn, kCnnLstmDnn };

std::string architecture_name(Architecture arch);
Architecture architecture_from_name(const std::string& name);

struct ConvSpec {
  int filters = 0;
  int kernel = 0;
  int stride = 1;

  bool operator==(const ConvSpec&) const = default;
};

struct ArchitectureConfig {
  // Per-variable conv stack; the seven streams share the topology but train
  // independent parameters.
  std::vector<ConvSpec> conv_stack{{16, 9, 1}, {16, 3, 2}};
  int combined_dense_width = 128;  // dense after the concatenated conv features
  int others_dense_width = 64;     // one-hot branch, no activation
  std::array<int, 3> head_widths{96, 64, 32};
  int lstm_units = 128;
  double dropout_cnn = 0.5;
  double dropout_lstm = 0.5;
  double dropout_others = 0.7;
  double dropout_final = 0.2;
  std::uint64_t seed = 1;

  bool operator==(const ArchitectureConfig&) const = default;
};

nn::Graph build_cnn_dnn(const ArchitectureConfig& config,
                        const ColumnManifest& manifest);
nn::Graph build_cnn_lstm_dnn(const ArchitectureConfig& config,
                             const ColumnManifest& manifest);
nn::Graph build_network(Architecture arch, const ArchitectureConfig& config,
                        const ColumnManifest& manifest);

struct TrainConfig {
  std::int64_t iterations = 10000;
  int batch_size = 48;
  std::int64_t log_interval = 250;
  std::uint64_t seed = 7;
  nn::LrSchedule lr{};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct HistoryEntry {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
};

struct TrainedModel {
  Architecture arch = Architecture::kCnnDnn;
  ArchitectureConfig config;
  nn::Graph graph;  // best-on-validation parameters
  ColumnManifest manifest;
  Normalizer normalizer;
  std::uint64_t feature_hash = 0;
  std::vector<HistoryEntry> history;
  double best_val_rmse = std::numeric_limits<double>::infinity();

  // Deterministic inference, one prediction per row. Throws when the
  // matrix manifest differs from the training manifest.
  std::vector<double> predict(const FeatureMatrix& m) const;
};

// Minibatch Adam with the staircase schedule; logs train loss and validation
// RMSE every log_interval steps and returns the snapshot with the best
// validation RMSE.
TrainedModel train(Architecture arch, const ArchitectureConfig& config,
                   const FeatureMatrix& features, const SplitIndices& split,
                   const Normalizer& normalizer, const TrainConfig& train_config);

// Versioned binary checkpoint: JSON topology header + raw parameter payload;
// round-trips bit-exactly.
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

std::string history_csv(const std::vector<HistoryEntry>& history);

// Forward a raw batch through a graph in inference mode.
std::vector<double> predict_batch(nn::Graph& graph, const FeatureMatrix& m,
                                  std::size_t chunk_rows = 256);

}  // namespace yieldcast
