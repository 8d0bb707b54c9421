#include "yieldcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace yieldcast {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat,
                   const char* what) {
  if (y.empty()) throw Error(std::string(what) + ": empty input");
  if (y.size() != yhat.size()) {
    throw Error(std::string(what) + ": length mismatch, " +
                std::to_string(y.size()) + " vs " +
                std::to_string(yhat.size()));
  }
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, "rmse");
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += std::abs(y[i] - yhat[i]);
  }
  return sum / static_cast<double>(y.size());
}

double pearson_r(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, "pearson_r");
  const double n = static_cast<double>(y.size());
  double mean_y = 0.0, mean_p = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mean_y += y[i];
    mean_p += yhat[i];
  }
  mean_y /= n;
  mean_p /= n;
  double cov = 0.0, var_y = 0.0, var_p = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dy = y[i] - mean_y;
    const double dp = yhat[i] - mean_p;
    cov += dy * dp;
    var_y += dy * dy;
    var_p += dp * dp;
  }
  if (var_y == 0.0 || var_p == 0.0) {
    throw Error("pearson_r: zero variance input");
  }
  const double r = cov / std::sqrt(var_y * var_p);
  return std::clamp(r, -1.0, 1.0);
}

double prediction_error_percentage(double actual, double predicted) {
  if (actual == 0.0) {
    throw Error("prediction_error_percentage: actual yield is zero");
  }
  return std::abs(actual - predicted) / std::abs(actual) * 100.0;
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = "model,split,rmse,mae,r,n\n";
  for (const auto& row : rows) {
    out += row.model;
    out += ',';
    out += row.split;
    out += ',';
    out += format_double(row.rmse);
    out += ',';
    out += format_double(row.mae);
    out += ',';
    out += format_double(row.r);
    out += ',';
    out += std::to_string(row.n);
    out += '\n';
  }
  return out;
}

RegionErrorReport aggregate_by_region(
    std::span<const RegionObservation> observations) {
  struct LocationAgg {
    double error_sum = 0.0;
    double yield_sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, std::map<std::string, LocationAgg>> states;
  std::map<std::string, bool> state_seen;

  RegionErrorReport report;
  for (const auto& obs : observations) {
    state_seen[obs.state] = true;
    if (obs.actual == 0.0) {
      ++report.excluded_zero_actual;
      continue;
    }
    LocationAgg& agg = states[obs.state][obs.location];
    agg.error_sum += prediction_error_percentage(obs.actual, obs.predicted);
    agg.yield_sum += obs.actual;
    ++agg.n;
  }

  for (const auto& [state, seen] : state_seen) {
    (void)seen;
    const auto it = states.find(state);
    if (it == states.end() || it->second.empty()) {
      report.notes.push_back("state " + state +
                             " omitted: all rows had zero actual yield");
      continue;
    }
    RegionStats stats;
    stats.state = state;
    double location_mean_sum = 0.0;
    for (const auto& [location, agg] : it->second) {
      (void)location;
      location_mean_sum += agg.error_sum / static_cast<double>(agg.n);
      stats.mean_observed_yield += agg.yield_sum;
      stats.n_obs += agg.n;
    }
    stats.n_locations = it->second.size();
    stats.mean_error_pct =
        location_mean_sum / static_cast<double>(stats.n_locations);
    stats.mean_observed_yield /= static_cast<double>(stats.n_obs);
    report.rows.push_back(std::move(stats));
  }
  return report;
}

std::string region_report_csv(const RegionErrorReport& report) {
  std::string out =
      "state,mean_error_pct,n_locations,n_obs,mean_observed_yield\n";
  for (const auto& row : report.rows) {
    out += row.state;
    out += ',';
    out += format_double(row.mean_error_pct);
    out += ',';
    out += std::to_string(row.n_locations);
    out += ',';
    out += std::to_string(row.n_obs);
    out += ',';
    out += format_double(row.mean_observed_yield);
    out += '\n';
  }
  return out;
}

}  // namespace yieldcast
