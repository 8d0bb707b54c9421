#include "yieldcast/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "yieldcast/metrics.hpp"

namespace yieldcast {

GemPredictor::GemPredictor(std::vector<TrainedModel> models,
                           std::vector<double> weights)
    : models_(std::move(models)), weights_(std::move(weights)) {
  if (models_.empty() || models_.size() != weights_.size()) {
    throw Error("gem predictor needs one weight per model");
  }
}

std::vector<double> GemPredictor::predict(const FeatureMatrix& m) const {
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t j = 0; j < models_.size(); ++j) {
    const std::vector<double> yhat = models_[j].predict(m);
    for (std::size_t i = 0; i < m.rows; ++i) out[i] += weights_[j] * yhat[i];
  }
  return out;
}

FeatureMatrix permute_group_rows(const FeatureMatrix& m,
                                 const std::string& group,
                                 std::span<const std::size_t> permutation) {
  const ColumnGroup& g = m.manifest.require(group);
  if (permutation.size() != m.rows) {
    throw Error("permutation length does not match row count");
  }
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* src = m.values.data() + permutation[r] * m.cols + g.start;
    double* dst = out.values.data() + r * m.cols + g.start;
    std::memcpy(dst, src, g.width * sizeof(double));
  }
  return out;
}

namespace {

// Columns [start, start+width) from row perm[i]; cheaper single-column form
// of permute_group_rows used by the per-period sweep.
FeatureMatrix permute_columns(const FeatureMatrix& m, std::size_t start,
                              std::size_t width,
                              std::span<const std::size_t> permutation) {
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* src = m.values.data() + permutation[r] * m.cols + start;
    double* dst = out.values.data() + r * m.cols + start;
    std::memcpy(dst, src, width * sizeof(double));
  }
  return out;
}

Rng task_rng(std::uint64_t seed, const std::string& group, int repetition) {
  std::uint64_t h = fnv1a64(group);
  h = fnv1a64(&repetition, sizeof(repetition), h);
  h = fnv1a64(&seed, sizeof(seed), h);
  return Rng(h);
}

}  // namespace

ImportanceReport permutation_importance(const Predictor& predictor,
                                        const FeatureMatrix& test,
                                        std::span<const std::string> groups,
                                        int repetitions, std::uint64_t seed) {
  if (repetitions < 1) throw Error("repetitions must be >= 1");
  for (const auto& name : groups) test.manifest.require(name);

  ImportanceReport report;
  report.repetitions = repetitions;
  report.seed = seed;
  report.predictor_label = predictor.label();
  report.baseline_rmse = rmse(test.targets, predictor.predict(test));

  struct Task {
    std::size_t group_index;
    int repetition;
    std::vector<std::size_t> permutation;
    double rmse_change = 0.0;
  };
  std::vector<Task> tasks;
  tasks.reserve(groups.size() * static_cast<std::size_t>(repetitions));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (int rep = 0; rep < repetitions; ++rep) {
      Rng rng = task_rng(seed, groups[gi], rep);
      tasks.push_back(
          {gi, rep, non_identity_permutation(test.rows, rng), 0.0});
    }
  }

  const double baseline = report.baseline_rmse;
  parallel_for(tasks.size(), [&](std::size_t ti) {
    Task& task = tasks[ti];
    const std::unique_ptr<Predictor> worker = predictor.clone();
    const FeatureMatrix shuffled =
        permute_group_rows(test, groups[task.group_index], task.permutation);
    task.rmse_change =
        rmse(shuffled.targets, worker->predict(shuffled)) - baseline;
  });

  report.groups.resize(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    report.groups[gi].group = groups[gi];
    report.groups[gi].per_rep.resize(repetitions, 0.0);
  }
  for (const Task& task : tasks) {
    report.groups[task.group_index].per_rep[task.repetition] =
        task.rmse_change;
  }
  for (auto& g : report.groups) {
    double sum = 0.0;
    for (const double v : g.per_rep) sum += v;
    g.rmse_change = sum / static_cast<double>(repetitions);
  }
  return report;
}

std::vector<PeriodImportance> per_period_importance(
    const Predictor& predictor, const FeatureMatrix& test,
    const std::string& variable, std::uint64_t seed, int repetitions) {
  if (weather_variable_index(variable) < 0) {
    throw Error("unknown weather variable: " + variable);
  }
  if (repetitions < 1) throw Error("repetitions must be >= 1");
  const ColumnGroup& group = test.manifest.require(variable);
  const double baseline = rmse(test.targets, predictor.predict(test));

  std::vector<PeriodImportance> out(group.width);
  struct Task {
    std::size_t column_offset;
    int repetition;
    std::vector<std::size_t> permutation;
    double rmse_change = 0.0;
  };
  std::vector<Task> tasks;
  tasks.reserve(group.width * static_cast<std::size_t>(repetitions));
  for (std::size_t p = 0; p < group.width; ++p) {
    for (int rep = 0; rep < repetitions; ++rep) {
      Rng rng = task_rng(seed, variable + ":" + std::to_string(p + 1), rep);
      tasks.push_back({p, rep, non_identity_permutation(test.rows, rng), 0.0});
    }
  }
  parallel_for(tasks.size(), [&](std::size_t ti) {
    Task& task = tasks[ti];
    const std::unique_ptr<Predictor> worker = predictor.clone();
    const FeatureMatrix shuffled = permute_columns(
        test, group.start + task.column_offset, 1, task.permutation);
    task.rmse_change =
        rmse(shuffled.targets, worker->predict(shuffled)) - baseline;
  });

  for (std::size_t p = 0; p < group.width; ++p) {
    const int period = static_cast<int>(p) + 1;
    out[p].period = period;
    out[p].approx_week = (period * 4 + 6) / 7;  // ceil(period * 4 / 7)
  }
  for (const Task& task : tasks) {
    out[task.column_offset].rmse_change += task.rmse_change;
  }
  for (auto& row : out) {
    row.rmse_change /= static_cast<double>(repetitions);
  }
  return out;
}

std::string importance_csv(const ImportanceReport& report) {
  std::string out = "group,rmse_change,baseline_rmse,repetitions\n";
  for (const auto& g : report.groups) {
    out += g.group;
    out += ',';
    out += format_double(g.rmse_change);
    out += ',';
    out += format_double(report.baseline_rmse);
    out += ',';
    out += std::to_string(report.repetitions);
    out += '\n';
  }
  return out;
}

std::string per_period_csv(const std::string& variable,
                           std::span<const PeriodImportance> rows) {
  std::string out = "variable,period,approx_week,rmse_change\n";
  for (const auto& row : rows) {
    out += variable;
    out += ',';
    out += std::to_string(row.period);
    out += ',';
    out += std::to_string(row.approx_week);
    out += ',';
    out += format_double(row.rmse_change);
    out += '\n';
  }
  return out;
}

GenotypeRanking select_top_genotypes(const Predictor& predictor,
                                     const EncoderContext& context,
                                     const JoinedDataset& data,
                                     const std::string& location, int year,
                                     std::size_t k) {
  const ColumnManifest& manifest = context.manifest;
  if (manifest.has_group("maturity_group")) {
    throw Error("genotype selection needs a model trained without "
                "maturity-group inputs");
  }
  const auto geno_it = manifest.vocabularies.find("genotype");
  if (geno_it == manifest.vocabularies.end()) {
    throw Error("manifest has no genotype vocabulary");
  }
  const std::vector<std::string>& genotypes = geno_it->second;
  if (k == 0 || k > genotypes.size()) {
    throw Error("k must be in 1.." + std::to_string(genotypes.size()) +
                ", got " + std::to_string(k));
  }
  const WeatherSeries* weather = data.find_weather(location, year);
  if (weather == nullptr) {
    throw Error("no weather for location " + location + ", year " +
                std::to_string(year));
  }

  // One row per genotype: fixed location/year/weather, genotype swept.
  FeatureMatrix sweep;
  sweep.rows = genotypes.size();
  sweep.cols = manifest.columns();
  sweep.manifest = manifest;
  sweep.values.assign(sweep.rows * sweep.cols, 0.0);
  sweep.targets.assign(sweep.rows, 0.0);
  sweep.row_keys.resize(sweep.rows);

  std::vector<double> weather_features;
  weather_features.reserve(kWeatherFeatureCount);
  for (int v = 0; v < kWeatherVariableCount; ++v) {
    const std::span<const double> days{
        weather->values.data() + static_cast<std::size_t>(v) * kSeasonDays,
        static_cast<std::size_t>(kSeasonDays)};
    const auto periods = downsample_weather(days, context.tail);
    weather_features.insert(weather_features.end(), periods.begin(),
                            periods.end());
  }

  const ColumnGroup& loc_group = manifest.require("location");
  const ColumnGroup& year_group = manifest.require("year");
  const ColumnGroup& gen_group = manifest.require("genotype");
  const auto& loc_vocab = manifest.vocabularies.at("location");
  const auto& year_vocab = manifest.vocabularies.at("year");

  const auto loc_pos =
      std::find(loc_vocab.begin(), loc_vocab.end(), location);
  if (loc_pos == loc_vocab.end()) {
    throw Error("location " + location + " is not in the model vocabulary");
  }
  const std::string year_text = std::to_string(year);
  const auto year_pos =
      std::find(year_vocab.begin(), year_vocab.end(), year_text);
  if (year_pos == year_vocab.end()) {
    throw Error("year " + year_text + " is not in the model vocabulary");
  }

  const std::size_t weather_start = manifest.weather_start();
  for (std::size_t g = 0; g < genotypes.size(); ++g) {
    double* row = sweep.values.data() + g * sweep.cols;
    row[loc_group.start +
        static_cast<std::size_t>(loc_pos - loc_vocab.begin())] = 1.0;
    row[year_group.start +
        static_cast<std::size_t>(year_pos - year_vocab.begin())] = 1.0;
    row[gen_group.start + g] = 1.0;
    std::memcpy(row + weather_start, weather_features.data(),
                weather_features.size() * sizeof(double));
    sweep.row_keys[g] = {location, year, genotypes[g], "", ""};
  }
  zscore_apply(context.normalizer, sweep);

  const std::vector<double> predicted = predictor.predict(sweep);

  std::vector<std::size_t> order(genotypes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return predicted[a] > predicted[b];
                   });

  GenotypeRanking ranking;
  ranking.location_id = location;
  ranking.year = year;
  ranking.k = k;
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ranking.top.emplace_back(genotypes[order[i]], predicted[order[i]]);
    sum += predicted[order[i]];
  }
  ranking.top_mean = sum / static_cast<double>(k);
  return ranking;
}

std::vector<GenotypeGapRow> genotype_gap_report(
    std::span<const GenotypeRanking> rankings, const JoinedDataset& observed) {
  struct Obs {
    double yield_sum = 0.0;
    std::size_t n = 0;
    std::string state;
  };
  std::map<std::pair<std::string, int>, Obs> observed_by_key;
  for (const auto& rec : observed.records) {
    Obs& obs = observed_by_key[{rec.location_id, rec.year}];
    obs.yield_sum += rec.yield;
    ++obs.n;
    obs.state = rec.state;
  }

  struct StateYearAgg {
    double gap_sum = 0.0;
    std::size_t n_locations = 0;
  };
  std::map<std::pair<std::string, int>, StateYearAgg> by_state_year;
  for (const auto& ranking : rankings) {
    const auto it =
        observed_by_key.find({ranking.location_id, ranking.year});
    if (it == observed_by_key.end()) continue;  // no observations to compare
    const double observed_mean =
        it->second.yield_sum / static_cast<double>(it->second.n);
    StateYearAgg& agg = by_state_year[{it->second.state, ranking.year}];
    agg.gap_sum += ranking.top_mean - observed_mean;
    ++agg.n_locations;
  }

  std::vector<GenotypeGapRow> out;
  out.reserve(by_state_year.size());
  for (const auto& [key, agg] : by_state_year) {
    out.push_back({key.first, key.second,
                   agg.gap_sum / static_cast<double>(agg.n_locations),
                   agg.n_locations});
  }
  return out;
}

std::string rankings_csv(std::span<const GenotypeRanking> rankings) {
  std::string out = "location_id,year,rank,genotype_id,predicted_yield\n";
  for (const auto& ranking : rankings) {
    for (std::size_t i = 0; i < ranking.top.size(); ++i) {
      out += ranking.location_id;
      out += ',';
      out += std::to_string(ranking.year);
      out += ',';
      out += std::to_string(i + 1);
      out += ',';
      out += ranking.top[i].first;
      out += ',';
      out += format_double(ranking.top[i].second);
      out += '\n';
    }
  }
  return out;
}

std::string gap_report_csv(std::span<const GenotypeGapRow> rows) {
  std::string out = "state,year,mean_gap\n";
  for (const auto& row : rows) {
    out += row.state;
    out += ',';
    out += std::to_string(row.year);
    out += ',';
    out += format_double(row.mean_gap);
    out += '\n';
  }
  return out;
}

}  // namespace yieldcast
