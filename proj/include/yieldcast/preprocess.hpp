#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "yieldcast/dataset.hpp"

namespace yieldcast {

inline constexpr int kPeriodsPerVariable = 53;
inline constexpr int kWeatherFeatureCount =
    kWeatherVariableCount * kPeriodsPerVariable;  // 371

// How the 214-day season maps onto 53 periods. Either way every period is
// a mean of consecutive days; they differ in what happens to days 209-214.
enum class TailPolicy {
  kSixDayTail,  // 52 four-day windows + one six-day window (days 209-214)
  kTruncate,    // 53 four-day windows, days 213-214 dropped
};

// 214 daily values -> 53 period means.
std::vector<double> downsample_weather(std::span<const double> days,
                                       TailPolicy policy = TailPolicy::kSixDayTail);

// Row-major n x |vocabulary| binary matrix; every value must appear in the
// vocabulary. `column_name` is used in the out-of-vocabulary error.
std::vector<double> one_hot_encode(const std::vector<std::string>& column,
                                   const std::vector<std::string>& vocabulary,
                                   const std::string& column_name = "column");

struct ColumnGroup {
  std::string name;
  std::size_t start = 0;
  std::size_t width = 0;

  bool operator==(const ColumnGroup&) const = default;
};

struct ColumnManifest {
  std::vector<ColumnGroup> groups;  // ordered; partitions [0, columns())
  std::map<std::string, std::vector<std::string>> vocabularies;

  std::size_t columns() const;
  const ColumnGroup* find(const std::string& name) const;
  const ColumnGroup& require(const std::string& name) const;
  bool has_group(const std::string& name) const { return find(name) != nullptr; }

  // First weather column; one-hot groups precede weather groups.
  std::size_t weather_start() const;
  // Period 1..53 for a weather column, 0 for non-weather columns.
  int period_of_column(std::size_t column) const;

  bool operator==(const ColumnManifest&) const = default;
};

struct RowKey {
  std::string location_id;
  int year = 0;
  std::string genotype_id;
  std::string maturity_group;
  std::string state;

  bool operator==(const RowKey&) const = default;
};

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<double> targets;
  std::vector<RowKey> row_keys;
  ColumnManifest manifest;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  std::uint64_t content_hash() const;
};

struct FeatureOptions {
  bool include_mg = true;
  TailPolicy tail = TailPolicy::kSixDayTail;
};

// Columns ordered [one-hot groups | weather groups]; one-hot group order is
// location, maturity_group (optional), year, genotype; weather groups follow
// the fixed variable order with 53 period columns each. Weather values are
// raw period means; normalization is a separate step.
FeatureMatrix build_feature_matrix(const JoinedDataset& data,
                                   const FeatureOptions& options = {});

// Column count implied by vocabulary sizes (371 weather columns included).
std::size_t expected_feature_columns(std::size_t locations,
                                     std::size_t maturity_groups,
                                     std::size_t years, std::size_t genotypes,
                                     bool include_mg);

struct Normalizer {
  std::vector<std::size_t> columns;  // matrix columns covered, in order
  std::vector<double> mean;
  std::vector<double> stddev;                  // population form
  std::vector<std::size_t> constant_columns;   // sigma == 0, mapped to zero
  std::size_t fitted_rows = 0;

  bool operator==(const Normalizer&) const = default;
};

// Fits per-column mean and population sigma over the weather columns of the
// given rows (training rows only, to keep test data out of the statistics).
Normalizer zscore_fit(const FeatureMatrix& m,
                      std::span<const std::size_t> fit_rows);

// (x - mean) / sigma in place over all rows; sigma == 0 columns become zero.
void zscore_apply(const Normalizer& normalizer, FeatureMatrix& m);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  bool operator==(const SplitIndices&) const = default;
};

// Shuffled 80/10/10 split: train = floor(0.8 n), validation = ceil(0.1 n),
// test = remainder (93,028 -> 74,422 / 9,303 / 9,303). Requires n >= 10.
SplitIndices split(std::size_t n, std::array<double, 3> ratios,
                   std::uint64_t seed);

FeatureMatrix subset_rows(const FeatureMatrix& m,
                          std::span<const std::size_t> rows);

std::vector<double> gather(std::span<const double> values,
                           std::span<const std::size_t> indices);

// Everything a training run needs, cached so runs skip re-encoding.
struct PreprocessCache {
  FeatureMatrix matrix;  // normalized
  SplitIndices split;
  Normalizer normalizer;
  FeatureOptions options;
  std::uint64_t content_hash = 0;
};

// Binary cache: magic + JSON header + raw matrix and target payloads.
void save_cache(const std::string& path, const PreprocessCache& cache);
PreprocessCache load_cache(const std::string& path);

// JSON forms shared by the feature cache and model checkpoints.
nlohmann::json manifest_to_json(const ColumnManifest& manifest);
ColumnManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json normalizer_to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

}  // namespace yieldcast
