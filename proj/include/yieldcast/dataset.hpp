#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "yieldcast/util.hpp"

namespace yieldcast {

inline constexpr int kSeasonDays = 214;
inline constexpr int kWeatherVariableCount = 7;

// Fixed row order of the weather matrix and of all weather feature blocks.
const std::array<std::string, kWeatherVariableCount>& weather_variables();
int weather_variable_index(const std::string& name);  // -1 when unknown

/// One observed soybean yield for a (genotype, location, year) triple.
struct PerformanceRecord {
  std::string location_id;
  int year = 0;
  std::string genotype_id;
  std::string maturity_group;  // may be empty at prediction time
  std::string state;
  double yield = 0.0;

  bool operator==(const PerformanceRecord&) const = default;
};

/// Daily weather for one (location, year): 7 variables x 214 days.
struct WeatherSeries {
  std::string location_id;
  int year = 0;
  std::vector<double> values;  // row-major [variable][day]

  WeatherSeries() : values(kWeatherVariableCount * kSeasonDays, 0.0) {}

  double at(int variable, int day) const {
    return values[static_cast<std::size_t>(variable) * kSeasonDays + day];
  }
  double& at(int variable, int day) {
    return values[static_cast<std::size_t>(variable) * kSeasonDays + day];
  }

  bool operator==(const WeatherSeries&) const = default;
};

using WeatherKey = std::pair<std::string, int>;
using WeatherMap = std::map<WeatherKey, WeatherSeries>;

/// Ordered categorical vocabularies covering every value in the records.
struct DatasetSchema {
  std::vector<std::string> locations;
  std::vector<std::string> maturity_groups;
  std::vector<std::string> genotypes;
  std::vector<std::string> states;
  std::vector<int> years;

  bool operator==(const DatasetSchema&) const = default;
};

struct JoinedDataset {
  std::vector<PerformanceRecord> records;
  WeatherMap weather;
  DatasetSchema schema;

  const WeatherSeries& weather_for(const PerformanceRecord& rec) const;
  const WeatherSeries* find_weather(const std::string& location,
                                    int year) const;
};

struct Violation {
  std::string kind;
  std::string where;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<Violation> warnings;

  bool ok() const { return violations.empty(); }
  std::string to_jsonl() const;  // one JSON object per line, warnings included
};

// Maps canonical record fields to CSV column names.
struct RecordsCsvSchema {
  std::string location_id = "location_id";
  std::string year = "year";
  std::string genotype_id = "genotype_id";
  std::string maturity_group = "maturity_group";
  std::string state = "state";
  std::string yield = "yield";
};

std::vector<PerformanceRecord> load_performance_records(
    const std::string& path, const RecordsCsvSchema& schema = {});
std::string performance_records_csv(
    const std::vector<PerformanceRecord>& records);
void write_performance_records(const std::string& path,
                               const std::vector<PerformanceRecord>& records);

// Long-form weather CSV: location_id,year,variable,day,value with
// day in 1..214 and variable one of the seven fixed names. Duplicate
// (location, year) groups across files are an error.
WeatherMap load_weather(const std::vector<std::string>& paths);
WeatherMap load_weather(const std::string& path);
std::string weather_csv(const WeatherMap& weather);
void write_weather(const std::string& path, const WeatherMap& weather);

struct ValidateOptions {
  bool strict = false;      // violations (and surface-order breaches) throw
  int year_min = 1900;
  int year_max = 2100;
};

// Joins records to weather, builds vocabularies, and checks invariants.
// Dangling records and record-field breaches are violations; the
// MinSur <= AvgSur <= MaxSur ordering is a warning unless strict.
JoinedDataset join_and_validate(std::vector<PerformanceRecord> records,
                                WeatherMap weather, ValidationReport* report,
                                const ValidateOptions& options = {});

/// One additive term of a synthetic ground-truth yield function:
/// coefficient * mean of `variable` over 4-day period `period` (1..53),
/// or over the whole season when period == 0.
struct WeatherTerm {
  int variable = 1;  // index into weather_variables()
  int period = 0;
  double coefficient = 0.0;
};

struct SyntheticConfig {
  int locations = 5;
  int years = 3;
  int genotypes = 10;
  int maturity_groups = 2;
  int first_year = 2003;
  bool full_cross = true;
  int record_count = 0;  // used when full_cross == false
  double intercept = 50.0;
  double location_scale = 5.0;
  double genotype_scale = 3.0;
  double year_scale = 2.0;
  double mg_scale = 1.0;
  std::vector<WeatherTerm> weather_terms;
  double noise_sigma = 0.0;
};

/// The generating function behind a synthetic dataset, kept so tests can
/// reproduce noise-free yields exactly.
struct SyntheticTruth {
  double intercept = 0.0;
  std::map<std::string, double> location_effect;
  std::map<std::string, double> genotype_effect;
  std::map<std::string, double> mg_effect;
  std::map<int, double> year_effect;
  std::vector<WeatherTerm> weather_terms;

  double evaluate(const PerformanceRecord& rec, const WeatherSeries& w) const;
};

struct SyntheticDataset {
  JoinedDataset data;
  SyntheticTruth truth;
};

// Pure function of (config, seed).
SyntheticDataset generate_synthetic(const SyntheticConfig& config,
                                    std::uint64_t seed);

// Mean of the 4-day window for `period` (1..53; period 53 covers the
// six-day tail), or of the whole season when period == 0.
double weather_window_mean(const WeatherSeries& w, int variable, int period);

}  // namespace yieldcast
