#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace yieldcast::cli;

  CLI::App app{"yieldcast: crop-yield prediction and genotype selection"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::uint64_t seed_value = 0;
  app.add_option("--config", flags.config_path, "Run configuration JSON")
      ->required();
  app.add_option("--out", flags.out_override,
                 "Output directory (overrides config out_dir)");
  auto* seed_opt =
      app.add_option("--seed", seed_value, "Master seed override");
  app.add_flag("--strict", flags.strict,
               "Treat validation warnings as errors");

  auto* ingest = app.add_subcommand(
      "ingest", "Load (or synthesize) records and weather, validate, and "
                "emit canonical CSVs");
  auto* preprocess = app.add_subcommand(
      "preprocess", "Encode features, split 80/10/10, fit the weather "
                    "normalizer, and write the feature cache");
  auto* train = app.add_subcommand("train", "Train one architecture");
  std::string arch = "cnn-dnn";
  train->add_option("--arch", arch, "Architecture: cnn-dnn or cnn-lstm-dnn")
      ->check(CLI::IsMember({"cnn-dnn", "cnn-lstm-dnn"}))
      ->capture_default_str();
  auto* ensemble = app.add_subcommand(
      "ensemble", "Fit simplex ensemble weights on the validation split");
  auto* evaluate = app.add_subcommand(
      "evaluate", "Write metric and per-region error reports");
  auto* importance = app.add_subcommand(
      "importance", "Permutation feature importance on the test split");
  auto* select = app.add_subcommand(
      "select-genotypes", "Rank genotypes per location-year scenario");
  std::size_t k = 0;
  select->add_option("--k", k, "Top-k size (overrides config selection.k)");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) flags.seed_override = seed_value;

  try {
    const RunConfig config = resolve_config(flags);
    if (ingest->parsed()) return cmd_ingest(config, flags.strict);
    if (preprocess->parsed()) return cmd_preprocess(config, flags.strict);
    if (train->parsed()) return cmd_train(config, arch);
    if (ensemble->parsed()) return cmd_ensemble(config);
    if (evaluate->parsed()) return cmd_evaluate(config);
    if (importance->parsed()) return cmd_importance(config);
    if (select->parsed()) return cmd_select(config, k);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
