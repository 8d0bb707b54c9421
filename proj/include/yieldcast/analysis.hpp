#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "yieldcast/gem.hpp"
#include "yieldcast/models.hpp"
#include "yieldcast/preprocess.hpp"

namespace yieldcast {

// Anything that can score feature rows: a single network, the GEM ensemble,
// a linear baseline, or a test double. Clones make parallel use explicit.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<double> predict(const FeatureMatrix& m) const = 0;
  virtual std::unique_ptr<Predictor> clone() const = 0;
  virtual std::string label() const = 0;
};

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(TrainedModel model) : model_(std::move(model)) {}
  std::vector<double> predict(const FeatureMatrix& m) const override {
    return model_.predict(m);
  }
  std::unique_ptr<Predictor> clone() const override {
    return std::make_unique<ModelPredictor>(*this);
  }
  std::string label() const override { return architecture_name(model_.arch); }
  const TrainedModel& model() const { return model_; }

 private:
  TrainedModel model_;
};

class GemPredictor final : public Predictor {
 public:
  GemPredictor(std::vector<TrainedModel> models, std::vector<double> weights);
  std::vector<double> predict(const FeatureMatrix& m) const override;
  std::unique_ptr<Predictor> clone() const override {
    return std::make_unique<GemPredictor>(*this);
  }
  std::string label() const override { return "gem"; }

 private:
  std::vector<TrainedModel> models_;
  std::vector<double> weights_;
};

// Copies the group's columns from row perm[i] into row i, leaving every
// other column untouched. One shared permutation preserves intra-group row
// patterns, e.g. valid one-hot rows.
FeatureMatrix permute_group_rows(const FeatureMatrix& m,
                                 const std::string& group,
                                 std::span<const std::size_t> permutation);

struct GroupImportance {
  std::string group;
  double rmse_change = 0.0;        // mean over repetitions
  std::vector<double> per_rep;     // shuffled RMSE - baseline, per repetition
};

struct ImportanceReport {
  double baseline_rmse = 0.0;
  std::vector<GroupImportance> groups;  // in requested order
  int repetitions = 0;
  std::uint64_t seed = 0;
  std::string predictor_label;
};

// Permutes each group's column block jointly and measures the RMSE change on
// the given (held-out) matrix. Permutations are drawn per (group, repetition)
// from the seed, so repetition r of a group is the same no matter how many
// repetitions run. The input matrix is never modified.
ImportanceReport permutation_importance(const Predictor& predictor,
                                        const FeatureMatrix& test,
                                        std::span<const std::string> groups,
                                        int repetitions, std::uint64_t seed);

struct PeriodImportance {
  int period = 0;       // 1..53
  int approx_week = 0;  // ceil(period * 4 / 7)
  double rmse_change = 0.0;
};

// Permutes a single weather column at a time: one RMSE change per period.
std::vector<PeriodImportance> per_period_importance(
    const Predictor& predictor, const FeatureMatrix& test,
    const std::string& variable, std::uint64_t seed, int repetitions = 1);

// CSV: group,rmse_change,baseline_rmse,repetitions
std::string importance_csv(const ImportanceReport& report);
// CSV: variable,period,approx_week,rmse_change
std::string per_period_csv(const std::string& variable,
                           std::span<const PeriodImportance> rows);

struct GenotypeRanking {
  std::string location_id;
  int year = 0;
  std::size_t k = 0;
  std::vector<std::pair<std::string, double>> top;  // descending by yield
  double top_mean = 0.0;
};

struct EncoderContext {
  const ColumnManifest& manifest;
  const Normalizer& normalizer;
  TailPolicy tail = TailPolicy::kSixDayTail;
};

// Predicts every genotype in the vocabulary under one (location, year)
// weather scenario and returns the top k, ties broken by vocabulary order.
// The model must have been trained without maturity-group inputs.
GenotypeRanking select_top_genotypes(const Predictor& predictor,
                                     const EncoderContext& context,
                                     const JoinedDataset& data,
                                     const std::string& location, int year,
                                     std::size_t k);

struct GenotypeGapRow {
  std::string state;
  int year = 0;
  double mean_gap = 0.0;  // mean over locations of (top-k mean - observed mean)
  std::size_t n_locations = 0;
};

// Per state and year: mean over locations of the difference between the
// ranking's top-k predicted mean and the mean observed yield there.
std::vector<GenotypeGapRow> genotype_gap_report(
    std::span<const GenotypeRanking> rankings, const JoinedDataset& observed);

// CSV: location_id,year,rank,genotype_id,predicted_yield
std::string rankings_csv(std::span<const GenotypeRanking> rankings);
// CSV: state,year,mean_gap,n_locations
std::string gap_report_csv(std::span<const GenotypeGapRow> rows);

}  // namespace yieldcast
