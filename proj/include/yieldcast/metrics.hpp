#pragma once

#include <span>
#include <string>
#include <vector>

#include "yieldcast/util.hpp"

namespace yieldcast {

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);
// Sample correlation; throws (rather than returning NaN) when either vector
// has zero variance.
double pearson_r(std::span<const double> y, std::span<const double> yhat);

// |actual - predicted| / |actual| * 100; undefined at actual == 0.
double prediction_error_percentage(double actual, double predicted);

struct MetricsRow {
  std::string model;
  std::string split;
  double rmse = 0.0;
  double mae = 0.0;
  double r = 0.0;
  std::size_t n = 0;
};

// CSV: model,split,rmse,mae,r,n
std::string metrics_csv(std::span<const MetricsRow> rows);

struct RegionObservation {
  std::string state;
  std::string location;
  double actual = 0.0;
  double predicted = 0.0;
};

struct RegionStats {
  std::string state;
  double mean_error_pct = 0.0;
  std::size_t n_locations = 0;
  std::size_t n_obs = 0;
  double mean_observed_yield = 0.0;
};

struct RegionErrorReport {
  std::vector<RegionStats> rows;  // sorted by state
  std::size_t excluded_zero_actual = 0;
  std::vector<std::string> notes;
};

// Two-stage mean: per-location mean error percentage first, then the mean
// across locations within each state. Rows with actual == 0 are excluded
// and counted; states left empty by the exclusions are omitted with a note.
RegionErrorReport aggregate_by_region(
    std::span<const RegionObservation> observations);

// CSV: state,mean_error_pct,n_locations,n_obs,mean_observed_yield
std::string region_report_csv(const RegionErrorReport& report);

}  // namespace yieldcast
