#include "yieldcast/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

namespace yieldcast {

std::vector<double> downsample_weather(std::span<const double> days,
                                       TailPolicy policy) {
  if (days.size() != kSeasonDays) {
    throw Error("downsample_weather: expected " + std::to_string(kSeasonDays) +
                " days, got " + std::to_string(days.size()));
  }
  std::vector<double> periods(kPeriodsPerVariable, 0.0);
  for (int p = 0; p < kPeriodsPerVariable; ++p) {
    const int first = p * 4;
    int last = first + 4;  // exclusive
    if (p == kPeriodsPerVariable - 1 && policy == TailPolicy::kSixDayTail) {
      last = kSeasonDays;
    }
    double sum = 0.0;
    for (int d = first; d < last; ++d) sum += days[d];
    periods[p] = sum / (last - first);
  }
  return periods;
}

std::vector<double> one_hot_encode(const std::vector<std::string>& column,
                                   const std::vector<std::string>& vocabulary,
                                   const std::string& column_name) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    index.emplace(vocabulary[i], i);
  }
  std::vector<double> out(column.size() * vocabulary.size(), 0.0);
  for (std::size_t r = 0; r < column.size(); ++r) {
    const auto it = index.find(column[r]);
    if (it == index.end()) {
      throw Error("one_hot_encode: value '" + column[r] +
                  "' not in vocabulary of column '" + column_name + "'");
    }
    out[r * vocabulary.size() + it->second] = 1.0;
  }
  return out;
}

std::size_t ColumnManifest::columns() const {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.width;
  return total;
}

const ColumnGroup* ColumnManifest::find(const std::string& name) const {
  for (const auto& g : groups) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

const ColumnGroup& ColumnManifest::require(const std::string& name) const {
  const ColumnGroup* g = find(name);
  if (g == nullptr) throw Error("unknown column group: " + name);
  return *g;
}

std::size_t ColumnManifest::weather_start() const {
  std::size_t start = columns();
  for (const auto& g : groups) {
    if (weather_variable_index(g.name) >= 0) start = std::min(start, g.start);
  }
  return start;
}

int ColumnManifest::period_of_column(std::size_t column) const {
  for (const auto& g : groups) {
    if (column < g.start || column >= g.start + g.width) continue;
    if (weather_variable_index(g.name) < 0) return 0;
    return static_cast<int>(column - g.start) + 1;
  }
  return 0;
}

std::uint64_t FeatureMatrix::content_hash() const {
  std::uint64_t h = fnv1a64(&rows, sizeof(rows));
  h = fnv1a64(&cols, sizeof(cols), h);
  h = fnv1a64(values.data(), values.size() * sizeof(double), h);
  h = fnv1a64(targets.data(), targets.size() * sizeof(double), h);
  return h;
}

std::size_t expected_feature_columns(std::size_t locations,
                                     std::size_t maturity_groups,
                                     std::size_t years, std::size_t genotypes,
                                     bool include_mg) {
  std::size_t cols = locations + years + genotypes + kWeatherFeatureCount;
  if (include_mg) cols += maturity_groups;
  return cols;
}

FeatureMatrix build_feature_matrix(const JoinedDataset& data,
                                   const FeatureOptions& options) {
  const DatasetSchema& schema = data.schema;
  FeatureMatrix m;
  m.rows = data.records.size();

  std::vector<std::string> year_vocab;
  year_vocab.reserve(schema.years.size());
  for (const int y : schema.years) year_vocab.push_back(std::to_string(y));

  std::vector<std::pair<std::string, const std::vector<std::string>*>>
      categorical;
  categorical.emplace_back("location", &schema.locations);
  if (options.include_mg) {
    categorical.emplace_back("maturity_group", &schema.maturity_groups);
  }
  categorical.emplace_back("year", &year_vocab);
  categorical.emplace_back("genotype", &schema.genotypes);

  std::size_t col = 0;
  for (const auto& [name, vocab] : categorical) {
    m.manifest.groups.push_back({name, col, vocab->size()});
    m.manifest.vocabularies[name] = *vocab;
    col += vocab->size();
  }
  for (const auto& var : weather_variables()) {
    m.manifest.groups.push_back(
        {var, col, static_cast<std::size_t>(kPeriodsPerVariable)});
    col += kPeriodsPerVariable;
  }
  m.cols = col;

  if (m.cols != expected_feature_columns(
                    schema.locations.size(), schema.maturity_groups.size(),
                    schema.years.size(), schema.genotypes.size(),
                    options.include_mg)) {
    throw Error("feature matrix column bookkeeping is inconsistent");
  }

  m.values.assign(m.rows * m.cols, 0.0);
  m.targets.resize(m.rows);
  m.row_keys.resize(m.rows);

  // Downsample each weather series once; records sharing a key reuse it.
  std::map<WeatherKey, std::vector<double>> period_cache;
  for (const auto& [key, series] : data.weather) {
    std::vector<double> features;
    features.reserve(kWeatherFeatureCount);
    for (int v = 0; v < kWeatherVariableCount; ++v) {
      const std::span<const double> days{
          series.values.data() + static_cast<std::size_t>(v) * kSeasonDays,
          static_cast<std::size_t>(kSeasonDays)};
      const auto periods = downsample_weather(days, options.tail);
      features.insert(features.end(), periods.begin(), periods.end());
    }
    period_cache.emplace(key, std::move(features));
  }

  std::map<std::string, std::size_t> group_index;
  for (const auto& g : m.manifest.groups) {
    group_index[g.name] = g.start;
  }

  auto vocab_position = [](const std::vector<std::string>& vocab,
                           const std::string& value,
                           const std::string& column_name) {
    const auto it = std::lower_bound(vocab.begin(), vocab.end(), value);
    if (it == vocab.end() || *it != value) {
      throw Error("one_hot_encode: value '" + value +
                  "' not in vocabulary of column '" + column_name + "'");
    }
    return static_cast<std::size_t>(it - vocab.begin());
  };

  for (std::size_t r = 0; r < m.rows; ++r) {
    const PerformanceRecord& rec = data.records[r];
    double* row = m.values.data() + r * m.cols;

    row[group_index["location"] +
        vocab_position(schema.locations, rec.location_id, "location")] = 1.0;
    if (options.include_mg) {
      row[group_index["maturity_group"] +
          vocab_position(schema.maturity_groups, rec.maturity_group,
                         "maturity_group")] = 1.0;
    }
    {
      const auto it = std::lower_bound(schema.years.begin(),
                                       schema.years.end(), rec.year);
      if (it == schema.years.end() || *it != rec.year) {
        throw Error("one_hot_encode: value '" + std::to_string(rec.year) +
                    "' not in vocabulary of column 'year'");
      }
      row[group_index["year"] +
          static_cast<std::size_t>(it - schema.years.begin())] = 1.0;
    }
    row[group_index["genotype"] +
        vocab_position(schema.genotypes, rec.genotype_id, "genotype")] = 1.0;

    const auto cache_it = period_cache.find({rec.location_id, rec.year});
    if (cache_it == period_cache.end()) {
      throw Error("record " + std::to_string(r) +
                  " has no weather series; join the dataset first");
    }
    std::memcpy(row + m.manifest.weather_start(), cache_it->second.data(),
                kWeatherFeatureCount * sizeof(double));

    m.targets[r] = rec.yield;
    m.row_keys[r] = {rec.location_id, rec.year, rec.genotype_id,
                     rec.maturity_group, rec.state};
  }
  return m;
}

Normalizer zscore_fit(const FeatureMatrix& m,
                      std::span<const std::size_t> fit_rows) {
  if (fit_rows.size() < 2) {
    throw Error("zscore_fit: need at least 2 rows, got " +
                std::to_string(fit_rows.size()));
  }
  Normalizer out;
  out.fitted_rows = fit_rows.size();
  for (const auto& g : m.manifest.groups) {
    if (weather_variable_index(g.name) < 0) continue;
    for (std::size_t c = g.start; c < g.start + g.width; ++c) {
      out.columns.push_back(c);
    }
  }
  out.mean.resize(out.columns.size());
  out.stddev.resize(out.columns.size());

  const double n = static_cast<double>(fit_rows.size());
  for (std::size_t i = 0; i < out.columns.size(); ++i) {
    const std::size_t c = out.columns[i];
    double sum = 0.0;
    for (const std::size_t r : fit_rows) sum += m.at(r, c);
    const double mean = sum / n;
    double ss = 0.0;
    for (const std::size_t r : fit_rows) {
      const double d = m.at(r, c) - mean;
      ss += d * d;
    }
    out.mean[i] = mean;
    out.stddev[i] = std::sqrt(ss / n);
    if (out.stddev[i] == 0.0) out.constant_columns.push_back(c);
  }
  return out;
}

void zscore_apply(const Normalizer& normalizer, FeatureMatrix& m) {
  for (std::size_t i = 0; i < normalizer.columns.size(); ++i) {
    const std::size_t c = normalizer.columns[i];
    if (c >= m.cols) {
      throw Error("zscore_apply: normalizer column " + std::to_string(c) +
                  " outside matrix with " + std::to_string(m.cols) +
                  " columns");
    }
    const double mean = normalizer.mean[i];
    const double sd = normalizer.stddev[i];
    for (std::size_t r = 0; r < m.rows; ++r) {
      m.at(r, c) = sd == 0.0 ? 0.0 : (m.at(r, c) - mean) / sd;
    }
  }
}

SplitIndices split(std::size_t n, std::array<double, 3> ratios,
                   std::uint64_t seed) {
  if (n < 10) {
    throw Error("split: need at least 10 rows, got " + std::to_string(n));
  }
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error("split: ratios sum to " + format_double(total) + ", not 1");
  }
  Rng rng(seed);
  std::vector<std::size_t> order = random_permutation(n, rng);

  const auto n_train = static_cast<std::size_t>(
      std::floor(ratios[0] * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(
      std::ceil(ratios[1] * static_cast<double>(n)));
  n_val = std::min(n_val, n - n_train);

  SplitIndices out;
  out.seed = seed;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.validation.assign(order.begin() + n_train,
                        order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

FeatureMatrix subset_rows(const FeatureMatrix& m,
                          std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.rows = rows.size();
  out.cols = m.cols;
  out.manifest = m.manifest;
  out.values.resize(out.rows * out.cols);
  out.targets.resize(out.rows);
  out.row_keys.resize(out.rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= m.rows) throw Error("subset_rows: index out of range");
    std::memcpy(out.values.data() + i * out.cols, m.values.data() + r * m.cols,
                m.cols * sizeof(double));
    out.targets[i] = m.targets[r];
    out.row_keys[i] = m.row_keys[r];
  }
  return out;
}

std::vector<double> gather(std::span<const double> values,
                           std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) out.push_back(values[i]);
  return out;
}

namespace {

constexpr char kCacheMagic[4] = {'Y', 'C', 'F', '1'};

void append_raw(std::string& out, const void* data, std::size_t len) {
  out.append(static_cast<const char*>(data), len);
}

}  // namespace

nlohmann::json manifest_to_json(const ColumnManifest& manifest) {
  nlohmann::json j;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : manifest.groups) {
    j["groups"].push_back({{"name", g.name}, {"start", g.start},
                           {"width", g.width}});
  }
  j["vocabularies"] = manifest.vocabularies;
  return j;
}

ColumnManifest manifest_from_json(const nlohmann::json& j) {
  ColumnManifest manifest;
  for (const auto& g : j.at("groups")) {
    manifest.groups.push_back({g.at("name").get<std::string>(),
                               g.at("start").get<std::size_t>(),
                               g.at("width").get<std::size_t>()});
  }
  manifest.vocabularies =
      j.at("vocabularies")
          .get<std::map<std::string, std::vector<std::string>>>();
  return manifest;
}

nlohmann::json normalizer_to_json(const Normalizer& n) {
  return {{"columns", n.columns},
          {"mean", n.mean},
          {"stddev", n.stddev},
          {"constant_columns", n.constant_columns},
          {"fitted_rows", n.fitted_rows}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n;
  n.columns = j.at("columns").get<std::vector<std::size_t>>();
  n.mean = j.at("mean").get<std::vector<double>>();
  n.stddev = j.at("stddev").get<std::vector<double>>();
  n.constant_columns =
      j.at("constant_columns").get<std::vector<std::size_t>>();
  n.fitted_rows = j.at("fitted_rows").get<std::size_t>();
  return n;
}

void save_cache(const std::string& path, const PreprocessCache& cache) {
  const FeatureMatrix& m = cache.matrix;
  nlohmann::json header;
  header["version"] = 1;
  header["rows"] = m.rows;
  header["cols"] = m.cols;
  header["manifest"] = manifest_to_json(m.manifest);
  {
    nlohmann::json keys;
    std::vector<std::string> loc, gen, mg, state;
    std::vector<int> year;
    loc.reserve(m.rows);
    for (const auto& k : m.row_keys) {
      loc.push_back(k.location_id);
      year.push_back(k.year);
      gen.push_back(k.genotype_id);
      mg.push_back(k.maturity_group);
      state.push_back(k.state);
    }
    keys["location"] = loc;
    keys["year"] = year;
    keys["genotype"] = gen;
    keys["maturity_group"] = mg;
    keys["state"] = state;
    header["row_keys"] = keys;
  }
  header["split"] = {{"seed", cache.split.seed},
                     {"train", cache.split.train},
                     {"validation", cache.split.validation},
                     {"test", cache.split.test}};
  header["normalizer"] = normalizer_to_json(cache.normalizer);
  header["options"] = {
      {"include_mg", cache.options.include_mg},
      {"tail",
       cache.options.tail == TailPolicy::kSixDayTail ? "six_day_tail"
                                                     : "truncate"}};
  header["content_hash"] = cache.content_hash;

  const std::string header_text = header.dump();
  std::string blob;
  blob.reserve(16 + header_text.size() +
               (m.values.size() + m.targets.size()) * sizeof(double));
  append_raw(blob, kCacheMagic, sizeof(kCacheMagic));
  const std::uint64_t header_len = header_text.size();
  append_raw(blob, &header_len, sizeof(header_len));
  blob += header_text;
  append_raw(blob, m.values.data(), m.values.size() * sizeof(double));
  append_raw(blob, m.targets.data(), m.targets.size() * sizeof(double));
  atomic_write_file(path, blob);
}

PreprocessCache load_cache(const std::string& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 12 || std::memcmp(blob.data(), kCacheMagic, 4) != 0) {
    throw Error("not a feature cache file: " + path);
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, blob.data() + 4, sizeof(header_len));
  if (blob.size() < 12 + header_len) {
    throw Error("truncated feature cache: " + path);
  }
  const nlohmann::json header =
      nlohmann::json::parse(blob.substr(12, header_len));

  PreprocessCache cache;
  FeatureMatrix& m = cache.matrix;
  m.rows = header.at("rows").get<std::size_t>();
  m.cols = header.at("cols").get<std::size_t>();
  m.manifest = manifest_from_json(header.at("manifest"));
  {
    const auto& keys = header.at("row_keys");
    const auto loc = keys.at("location").get<std::vector<std::string>>();
    const auto year = keys.at("year").get<std::vector<int>>();
    const auto gen = keys.at("genotype").get<std::vector<std::string>>();
    const auto mg = keys.at("maturity_group").get<std::vector<std::string>>();
    const auto state = keys.at("state").get<std::vector<std::string>>();
    m.row_keys.resize(loc.size());
    for (std::size_t i = 0; i < loc.size(); ++i) {
      m.row_keys[i] = {loc[i], year[i], gen[i], mg[i], state[i]};
    }
  }
  cache.split.seed = header.at("split").at("seed").get<std::uint64_t>();
  cache.split.train =
      header.at("split").at("train").get<std::vector<std::size_t>>();
  cache.split.validation =
      header.at("split").at("validation").get<std::vector<std::size_t>>();
  cache.split.test =
      header.at("split").at("test").get<std::vector<std::size_t>>();
  cache.normalizer = normalizer_from_json(header.at("normalizer"));
  cache.options.include_mg = header.at("options").at("include_mg").get<bool>();
  cache.options.tail =
      header.at("options").at("tail").get<std::string>() == "truncate"
          ? TailPolicy::kTruncate
          : TailPolicy::kSixDayTail;
  cache.content_hash = header.at("content_hash").get<std::uint64_t>();

  const std::size_t expect =
      12 + header_len + (m.rows * m.cols + m.rows) * sizeof(double);
  if (blob.size() != expect) {
    throw Error("feature cache payload size mismatch: " + path);
  }
  m.values.resize(m.rows * m.cols);
  m.targets.resize(m.rows);
  const char* p = blob.data() + 12 + header_len;
  std::memcpy(m.values.data(), p, m.values.size() * sizeof(double));
  p += m.values.size() * sizeof(double);
  std::memcpy(m.targets.data(), p, m.targets.size() * sizeof(double));

  if (m.content_hash() != cache.content_hash) {
    throw Error("feature cache is corrupt (content hash mismatch): " + path);
  }
  return cache;
}

}  // namespace yieldcast
