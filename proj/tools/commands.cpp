#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "yieldcast/analysis.hpp"
#include "yieldcast/gem.hpp"
#include "yieldcast/lasso.hpp"
#include "yieldcast/metrics.hpp"

namespace yieldcast::cli {

namespace {

std::string path_in(const RunConfig& config, const std::string& name) {
  return (std::filesystem::path(config.out_dir) / name).string();
}

void require_artifact(const std::string& path, const std::string& producer) {
  if (!file_exists(path)) {
    throw Error("missing " + path + "; run `" + producer + "` first");
  }
}

JoinedDataset load_ingested(const RunConfig& config, bool strict,
                            ValidationReport* report) {
  const std::string records_path = path_in(config, "records.csv");
  const std::string weather_path = path_in(config, "weather.csv");
  require_artifact(records_path, "ingest");
  require_artifact(weather_path, "ingest");
  auto records = load_performance_records(records_path);
  auto weather = load_weather(weather_path);
  return join_and_validate(std::move(records), std::move(weather), report,
                           {.strict = strict});
}

PreprocessCache load_feature_cache(const RunConfig& config) {
  const std::string cache_path = path_in(config, "features.ycfm");
  require_artifact(cache_path, "preprocess");
  return load_cache(cache_path);
}

TrainedModel load_checkpoint(const RunConfig& config,
                             const std::string& arch_name,
                             const PreprocessCache& cache) {
  const std::string path = path_in(config, "model_" + arch_name + ".ckpt");
  require_artifact(path, "train --arch " + arch_name);
  TrainedModel model = load_model(path);
  if (model.feature_hash != cache.content_hash) {
    throw Error("checkpoint " + path +
                " was trained on a different feature cache (content hash "
                "mismatch); rerun preprocess and train");
  }
  return model;
}

PredictionMatrix predictions_on_rows(const std::vector<TrainedModel>& models,
                                     const std::vector<std::string>& labels,
                                     const FeatureMatrix& matrix,
                                     std::span<const std::size_t> rows) {
  const FeatureMatrix subset = subset_rows(matrix, rows);
  PredictionMatrix p;
  p.n = subset.rows;
  p.k = models.size();
  p.labels = labels;
  p.targets = subset.targets;
  p.predictions.resize(p.n * p.k);
  for (std::size_t j = 0; j < models.size(); ++j) {
    const std::vector<double> yhat = models[j].predict(subset);
    for (std::size_t i = 0; i < p.n; ++i) p.at(i, j) = yhat[i];
  }
  return p;
}

std::unique_ptr<Predictor> load_report_predictor(const RunConfig& config,
                                                 const PreprocessCache& cache) {
  const std::string ensemble_path = path_in(config, "ensemble.json");
  if (file_exists(ensemble_path)) {
    std::vector<std::string> labels;
    const EnsembleWeights weights =
        weights_from_report_json(read_file(ensemble_path), &labels);
    std::vector<TrainedModel> models;
    models.reserve(labels.size());
    for (const auto& label : labels) {
      models.push_back(load_checkpoint(config, label, cache));
    }
    return std::make_unique<GemPredictor>(std::move(models), weights.weights);
  }
  if (config.ensemble.models.empty()) {
    throw Error("no ensemble report and no models configured");
  }
  return std::make_unique<ModelPredictor>(
      load_checkpoint(config, config.ensemble.models.front(), cache));
}

}  // namespace

RunConfig resolve_config(const GlobalFlags& flags) {
  RunConfig config = load_run_config(flags.config_path);
  if (!flags.out_override.empty()) config.out_dir = flags.out_override;
  if (flags.seed_override.has_value()) {
    config.seed = *flags.seed_override;
    config.training.seed = config.seed + 4;
  }
  return config;
}

int cmd_ingest(const RunConfig& config, bool strict) {
  std::vector<PerformanceRecord> records;
  WeatherMap weather;
  if (config.data.synthetic.has_value()) {
    const SyntheticDataset synth =
        generate_synthetic(*config.data.synthetic, config.synthetic_seed());
    records = synth.data.records;
    weather = synth.data.weather;
  } else {
    if (config.data.records_csv.empty() || config.data.weather_csv.empty()) {
      throw Error("config needs data.records_csv and data.weather_csv, or a "
                  "data.synthetic block");
    }
    records = load_performance_records(config.data.records_csv);
    weather = load_weather(config.data.weather_csv);
  }

  ValidationReport report;
  join_and_validate(records, weather, &report, {.strict = strict});

  write_performance_records(path_in(config, "records.csv"), records);
  write_weather(path_in(config, "weather.csv"), weather);
  atomic_write_file(path_in(config, "validation_report.jsonl"),
                    report.to_jsonl());
  std::printf("ingest: %zu records, %zu weather series, %zu violations, "
              "%zu warnings -> %s\n",
              records.size(), weather.size(), report.violations.size(),
              report.warnings.size(), config.out_dir.c_str());
  return 0;
}

int cmd_preprocess(const RunConfig& config, bool strict) {
  const JoinedDataset data = load_ingested(config, strict, nullptr);

  PreprocessCache cache;
  cache.options.include_mg = config.preprocess.include_mg;
  cache.options.tail = config.preprocess.tail;
  cache.matrix = build_feature_matrix(data, cache.options);
  cache.split = split(cache.matrix.rows, {0.8, 0.1, 0.1}, config.split_seed());
  cache.normalizer = zscore_fit(cache.matrix, cache.split.train);
  zscore_apply(cache.normalizer, cache.matrix);
  cache.content_hash = cache.matrix.content_hash();

  save_cache(path_in(config, "features.ycfm"), cache);
  std::printf("preprocess: %zu rows x %zu columns (%zu one-hot + %d weather), "
              "split %zu/%zu/%zu, %zu constant weather columns -> %s\n",
              cache.matrix.rows, cache.matrix.cols,
              cache.matrix.manifest.weather_start(), kWeatherFeatureCount,
              cache.split.train.size(), cache.split.validation.size(),
              cache.split.test.size(),
              cache.normalizer.constant_columns.size(),
              path_in(config, "features.ycfm").c_str());
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& arch_name) {
  const Architecture arch = architecture_from_name(arch_name);
  const PreprocessCache cache = load_feature_cache(config);

  const TrainedModel model =
      train(arch, config.architecture(arch), cache.matrix, cache.split,
            cache.normalizer, config.training);

  const std::string model_path =
      path_in(config, "model_" + arch_name + ".ckpt");
  save_model(model_path, model);
  atomic_write_file(path_in(config, "history_" + arch_name + ".csv"),
                    history_csv(model.history));
  std::printf("train[%s]: %lld iterations, best val RMSE %.4f -> %s\n",
              arch_name.c_str(),
              static_cast<long long>(config.training.iterations),
              model.best_val_rmse, model_path.c_str());
  return 0;
}

int cmd_ensemble(const RunConfig& config) {
  const PreprocessCache cache = load_feature_cache(config);
  if (config.ensemble.models.empty()) {
    throw Error("ensemble.models is empty");
  }
  std::vector<TrainedModel> models;
  for (const auto& name : config.ensemble.models) {
    models.push_back(load_checkpoint(config, name, cache));
  }

  const PredictionMatrix validation = predictions_on_rows(
      models, config.ensemble.models, cache.matrix, cache.split.validation);
  const EnsembleWeights weights = optimize_weights(validation);

  atomic_write_file(path_in(config, "ensemble.json"),
                    weights_report_json(validation, weights));
  std::string summary;
  for (std::size_t j = 0; j < weights.weights.size(); ++j) {
    if (j > 0) summary += ", ";
    summary += config.ensemble.models[j] + "=" +
               format_double(weights.weights[j]);
  }
  std::printf("ensemble: weights {%s}, validation MSE %.6f -> %s\n",
              summary.c_str(), weights.objective,
              path_in(config, "ensemble.json").c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& config) {
  const PreprocessCache cache = load_feature_cache(config);
  std::vector<TrainedModel> models;
  for (const auto& name : config.ensemble.models) {
    models.push_back(load_checkpoint(config, name, cache));
  }

  const std::vector<std::pair<std::string, const std::vector<std::size_t>*>>
      splits = {{"train", &cache.split.train},
                {"validation", &cache.split.validation},
                {"test", &cache.split.test}};

  std::vector<MetricsRow> rows;
  std::vector<double> gem_weights;
  const std::string ensemble_path = path_in(config, "ensemble.json");
  if (file_exists(ensemble_path)) {
    gem_weights =
        weights_from_report_json(read_file(ensemble_path), nullptr).weights;
    if (gem_weights.size() != models.size()) {
      throw Error("ensemble.json lists " +
                  std::to_string(gem_weights.size()) + " weights but " +
                  std::to_string(models.size()) + " models are configured");
    }
  }

  LassoModel lasso;
  if (config.evaluate.include_lasso) {
    lasso = lasso_fit(cache.matrix, cache.split.train,
                      config.evaluate.lasso_alpha, 1e-7, 300);
    atomic_write_file(path_in(config, "lasso.json"), lasso_to_json(lasso));
  }

  std::vector<RegionObservation> region_obs;
  double region_test_rmse = 0.0;

  for (const auto& [split_name, indices] : splits) {
    const PredictionMatrix p = predictions_on_rows(
        models, config.ensemble.models, cache.matrix, *indices);
    const FeatureMatrix subset = subset_rows(cache.matrix, *indices);

    for (std::size_t j = 0; j < models.size(); ++j) {
      std::vector<double> yhat(p.n);
      for (std::size_t i = 0; i < p.n; ++i) yhat[i] = p.at(i, j);
      rows.push_back({config.ensemble.models[j], split_name,
                      rmse(p.targets, yhat), mae(p.targets, yhat),
                      pearson_r(p.targets, yhat), p.n});
    }
    std::vector<double> region_pred;
    if (!gem_weights.empty()) {
      const std::vector<double> yhat = ensemble_predict(gem_weights, p);
      rows.push_back({"gem", split_name, rmse(p.targets, yhat),
                      mae(p.targets, yhat), pearson_r(p.targets, yhat), p.n});
      if (config.evaluate.region_model == "gem") region_pred = yhat;
    }
    if (config.evaluate.include_lasso) {
      const std::vector<double> yhat = lasso_predict(lasso, subset);
      rows.push_back({"lasso", split_name, rmse(p.targets, yhat),
                      mae(p.targets, yhat), pearson_r(p.targets, yhat), p.n});
      if (config.evaluate.region_model == "lasso") region_pred = yhat;
    }
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (config.evaluate.region_model == config.ensemble.models[j]) {
        region_pred.resize(p.n);
        for (std::size_t i = 0; i < p.n; ++i) region_pred[i] = p.at(i, j);
      }
    }
    if (split_name == "test") {
      if (region_pred.empty()) {
        throw Error("evaluate.region_model '" + config.evaluate.region_model +
                    "' does not name an evaluated model");
      }
      region_obs.reserve(subset.rows);
      for (std::size_t i = 0; i < subset.rows; ++i) {
        region_obs.push_back({subset.row_keys[i].state,
                              subset.row_keys[i].location_id,
                              subset.targets[i], region_pred[i]});
      }
      region_test_rmse = rmse(subset.targets, region_pred);
    }
  }

  atomic_write_file(path_in(config, "metrics.csv"), metrics_csv(rows));
  const RegionErrorReport region = aggregate_by_region(region_obs);
  atomic_write_file(path_in(config, "region_errors.csv"),
                    region_report_csv(region));
  std::printf("evaluate: %zu metric rows, region report for %zu states "
              "(model %s, test RMSE %.4f) -> %s\n",
              rows.size(), region.rows.size(),
              config.evaluate.region_model.c_str(), region_test_rmse,
              path_in(config, "metrics.csv").c_str());
  return 0;
}

int cmd_importance(const RunConfig& config) {
  const PreprocessCache cache = load_feature_cache(config);
  const std::unique_ptr<Predictor> predictor =
      load_report_predictor(config, cache);
  const FeatureMatrix test = subset_rows(cache.matrix, cache.split.test);

  std::vector<std::string> groups = config.importance.groups;
  if (groups.empty()) {
    for (const auto& g : test.manifest.groups) groups.push_back(g.name);
  }
  const ImportanceReport report =
      permutation_importance(*predictor, test, groups,
                             config.importance.repetitions,
                             config.importance_seed());
  atomic_write_file(path_in(config, "importance.csv"), importance_csv(report));

  std::string period_csv = "variable,period,approx_week,rmse_change\n";
  for (const auto& variable : config.importance.per_period_variables) {
    const auto periods = per_period_importance(
        *predictor, test, variable, config.importance_seed(),
        config.importance.per_period_repetitions);
    const std::string block = per_period_csv(variable, periods);
    period_csv += block.substr(block.find('\n') + 1);  // drop repeated header
  }
  atomic_write_file(path_in(config, "importance_periods.csv"), period_csv);

  std::string top;
  double top_change = -1.0;
  for (const auto& g : report.groups) {
    if (g.rmse_change > top_change) {
      top_change = g.rmse_change;
      top = g.group;
    }
  }
  std::printf("importance: baseline RMSE %.4f on %zu test rows (%s); top "
              "group %s (+%.4f) -> %s\n",
              report.baseline_rmse, test.rows,
              report.predictor_label.c_str(), top.c_str(), top_change,
              path_in(config, "importance.csv").c_str());
  return 0;
}

int cmd_select(const RunConfig& config, std::size_t k_override) {
  const PreprocessCache cache = load_feature_cache(config);
  if (cache.options.include_mg) {
    throw Error("genotype selection needs a feature cache built with "
                "include_mg=false (the selection model must not see maturity "
                "groups)");
  }
  const TrainedModel model =
      load_checkpoint(config, config.selection.arch, cache);
  const ModelPredictor predictor(model);
  const JoinedDataset data = load_ingested(config, false, nullptr);
  const std::size_t k =
      k_override > 0 ? k_override : config.selection.k;

  // Every (location, year) with both weather and observations, unless the
  // config narrows the sweep.
  std::set<std::pair<std::string, int>> keys;
  for (const auto& rec : data.records) {
    if (!config.selection.locations.empty() &&
        std::find(config.selection.locations.begin(),
                  config.selection.locations.end(),
                  rec.location_id) == config.selection.locations.end()) {
      continue;
    }
    if (!config.selection.years.empty() &&
        std::find(config.selection.years.begin(), config.selection.years.end(),
                  rec.year) == config.selection.years.end()) {
      continue;
    }
    if (data.find_weather(rec.location_id, rec.year) != nullptr) {
      keys.insert({rec.location_id, rec.year});
    }
  }
  if (keys.empty()) throw Error("no (location, year) pairs to rank");

  const EncoderContext context{model.manifest, model.normalizer,
                               cache.options.tail};
  std::vector<GenotypeRanking> rankings;
  rankings.reserve(keys.size());
  for (const auto& [location, year] : keys) {
    rankings.push_back(
        select_top_genotypes(predictor, context, data, location, year, k));
  }

  atomic_write_file(path_in(config, "rankings.csv"), rankings_csv(rankings));
  const auto gaps = genotype_gap_report(rankings, data);
  atomic_write_file(path_in(config, "genotype_gaps.csv"),
                    gap_report_csv(gaps));
  std::printf("select-genotypes: %zu location-year rankings (k=%zu), "
              "%zu state-year gap rows -> %s\n",
              rankings.size(), k, gaps.size(),
              path_in(config, "rankings.csv").c_str());
  return 0;
}

}  // namespace yieldcast::cli
