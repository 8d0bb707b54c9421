#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "yieldcast/dataset.hpp"
#include "yieldcast/models.hpp"
#include "yieldcast/preprocess.hpp"

namespace yieldcast::cli {

struct DataConfig {
  std::string records_csv;
  std::vector<std::string> weather_csv;
  std::optional<SyntheticConfig> synthetic;
  std::optional<std::uint64_t> synthetic_seed;
};

struct PreprocessConfig {
  bool include_mg = true;
  TailPolicy tail = TailPolicy::kSixDayTail;
  std::optional<std::uint64_t> split_seed;
};

struct EnsembleConfig {
  std::vector<std::string> models = {"cnn-dnn", "cnn-lstm-dnn"};
};

struct EvaluateConfig {
  bool include_lasso = true;
  double lasso_alpha = 0.0001;
  std::string region_model = "gem";
};

struct ImportanceConfig {
  int repetitions = 5;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> groups;  // empty = every manifest group
  std::vector<std::string> per_period_variables = {"AP", "MDNI"};
  int per_period_repetitions = 1;
};

struct SelectionConfig {
  std::string arch = "cnn-dnn";
  std::size_t k = 10;
  std::vector<std::string> locations;  // empty = all with data
  std::vector<int> years;              // empty = all with data
};

struct RunConfig {
  std::uint64_t seed = 17;
  std::string out_dir = "runs/out";
  DataConfig data;
  PreprocessConfig preprocess;
  ArchitectureConfig cnn_dnn;
  ArchitectureConfig cnn_lstm_dnn;
  TrainConfig training;
  EnsembleConfig ensemble;
  EvaluateConfig evaluate;
  ImportanceConfig importance;
  SelectionConfig selection;

  std::uint64_t split_seed() const {
    return preprocess.split_seed.value_or(seed + 1);
  }
  std::uint64_t synthetic_seed() const {
    return data.synthetic_seed.value_or(seed + 2);
  }
  std::uint64_t importance_seed() const {
    return importance.seed.value_or(seed + 3);
  }
  const ArchitectureConfig& architecture(Architecture arch) const {
    return arch == Architecture::kCnnDnn ? cnn_dnn : cnn_lstm_dnn;
  }
};

RunConfig load_run_config(const std::string& path);

}  // namespace yieldcast::cli
