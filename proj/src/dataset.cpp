#include "yieldcast/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>

#include "yieldcast/csv.hpp"

#include <nlohmann/json.hpp>

namespace yieldcast {

const std::array<std::string, kWeatherVariableCount>& weather_variables() {
  static const std::array<std::string, kWeatherVariableCount> names = {
      "ADNI", "AP", "ARH", "MDNI", "MaxSur", "MinSur", "AvgSur"};
  return names;
}

int weather_variable_index(const std::string& name) {
  const auto& names = weather_variables();
  for (int i = 0; i < kWeatherVariableCount; ++i) {
    if (names[i] == name) return i;
  }
  return -1;
}

const WeatherSeries& JoinedDataset::weather_for(
    const PerformanceRecord& rec) const {
  const WeatherSeries* w = find_weather(rec.location_id, rec.year);
  if (w == nullptr) {
    throw Error("no weather for location " + rec.location_id + ", year " +
                std::to_string(rec.year));
  }
  return *w;
}

const WeatherSeries* JoinedDataset::find_weather(const std::string& location,
                                                 int year) const {
  const auto it = weather.find({location, year});
  return it == weather.end() ? nullptr : &it->second;
}

std::string ValidationReport::to_jsonl() const {
  std::string out;
  auto emit = [&out](const Violation& v, bool warning) {
    nlohmann::json j;
    j["kind"] = v.kind;
    j["where"] = v.where;
    j["message"] = v.message;
    j["severity"] = warning ? "warning" : "error";
    out += j.dump();
    out += '\n';
  };
  for (const auto& v : violations) emit(v, false);
  for (const auto& w : warnings) emit(w, true);
  return out;
}

namespace {

int parse_int_field(const std::string& text, const std::string& column,
                    std::size_t row) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("row " + std::to_string(row) + ", column '" + column +
                "': cannot parse integer from '" + text + "'");
  }
  return value;
}

double parse_double_field(const std::string& text, const std::string& column,
                          std::size_t row) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("row " + std::to_string(row) + ", column '" + column +
                "': cannot parse number from '" + text + "'");
  }
  return value;
}

}  // namespace

std::vector<PerformanceRecord> load_performance_records(
    const std::string& path, const RecordsCsvSchema& schema) {
  const CsvTable table = read_csv(path);
  const std::size_t c_loc = table.column(schema.location_id, path);
  const std::size_t c_year = table.column(schema.year, path);
  const std::size_t c_gen = table.column(schema.genotype_id, path);
  const std::size_t c_mg = table.column(schema.maturity_group, path);
  const std::size_t c_state = table.column(schema.state, path);
  const std::size_t c_yield = table.column(schema.yield, path);

  std::vector<PerformanceRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw Error("row " + std::to_string(r + 1) + " of " + path + " has " +
                  std::to_string(row.size()) + " fields, expected " +
                  std::to_string(table.header.size()));
    }
    PerformanceRecord rec;
    rec.location_id = row[c_loc];
    rec.year = parse_int_field(row[c_year], schema.year, r + 1);
    rec.genotype_id = row[c_gen];
    rec.maturity_group = row[c_mg];
    rec.state = row[c_state];
    rec.yield = parse_double_field(row[c_yield], schema.yield, r + 1);
    records.push_back(std::move(rec));
  }
  return records;
}

std::string performance_records_csv(
    const std::vector<PerformanceRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& rec : records) {
    rows.push_back({rec.location_id, std::to_string(rec.year),
                    rec.genotype_id, rec.maturity_group, rec.state,
                    format_double(rec.yield)});
  }
  return to_csv({"location_id", "year", "genotype_id", "maturity_group",
                 "state", "yield"},
                rows);
}

void write_performance_records(const std::string& path,
                               const std::vector<PerformanceRecord>& records) {
  atomic_write_file(path, performance_records_csv(records));
}

WeatherMap load_weather(const std::vector<std::string>& paths) {
  WeatherMap merged;
  for (const auto& path : paths) {
    const CsvTable table = read_csv(path);
    const std::size_t c_loc = table.column("location_id", path);
    const std::size_t c_year = table.column("year", path);
    const std::size_t c_var = table.column("variable", path);
    const std::size_t c_day = table.column("day", path);
    const std::size_t c_val = table.column("value", path);

    // Accumulate one grid per (location, year) with a presence mask.
    std::map<WeatherKey, WeatherSeries> grids;
    std::map<WeatherKey, std::vector<char>> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const std::string& location = row[c_loc];
      const int year = parse_int_field(row[c_year], "year", r + 1);
      const int var = weather_variable_index(row[c_var]);
      if (var < 0) {
        throw Error("row " + std::to_string(r + 1) + " of " + path +
                    ": unknown weather variable '" + row[c_var] + "'");
      }
      const int day = parse_int_field(row[c_day], "day", r + 1);
      if (day < 1 || day > kSeasonDays) {
        throw Error("row " + std::to_string(r + 1) + " of " + path +
                    ": day " + std::to_string(day) + " outside 1.." +
                    std::to_string(kSeasonDays));
      }
      const double value = parse_double_field(row[c_val], "value", r + 1);

      const WeatherKey key{location, year};
      auto [it, inserted] = grids.try_emplace(key);
      if (inserted) {
        it->second.location_id = location;
        it->second.year = year;
        seen[key].assign(kWeatherVariableCount * kSeasonDays, 0);
      }
      const std::size_t flat =
          static_cast<std::size_t>(var) * kSeasonDays + (day - 1);
      if (seen[key][flat]) {
        throw Error(path + ": duplicate entry for location " + location +
                    ", year " + std::to_string(year) + ", variable " +
                    weather_variables()[var] + ", day " + std::to_string(day));
      }
      seen[key][flat] = 1;
      it->second.at(var, day - 1) = value;
    }

    for (auto& [key, series] : grids) {
      const auto& mask = seen[key];
      for (int v = 0; v < kWeatherVariableCount; ++v) {
        int days = 0;
        for (int d = 0; d < kSeasonDays; ++d) {
          days += mask[static_cast<std::size_t>(v) * kSeasonDays + d];
        }
        if (days != kSeasonDays) {
          throw Error(path + ": location " + key.first + ", year " +
                      std::to_string(key.second) + ": variable " +
                      weather_variables()[v] + " has " + std::to_string(days) +
                      " of " + std::to_string(kSeasonDays) + " days");
        }
      }
      auto [it, inserted] = merged.try_emplace(key, std::move(series));
      if (!inserted) {
        throw Error("duplicate weather key: location " + key.first +
                    ", year " + std::to_string(key.second) + " (seen again in " +
                    path + ")");
      }
    }
  }
  return merged;
}

WeatherMap load_weather(const std::string& path) {
  return load_weather(std::vector<std::string>{path});
}

std::string weather_csv(const WeatherMap& weather) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(weather.size() * kWeatherVariableCount * kSeasonDays);
  for (const auto& [key, series] : weather) {
    for (int v = 0; v < kWeatherVariableCount; ++v) {
      for (int d = 0; d < kSeasonDays; ++d) {
        rows.push_back({key.first, std::to_string(key.second),
                        weather_variables()[v], std::to_string(d + 1),
                        format_double(series.at(v, d))});
      }
    }
  }
  return to_csv({"location_id", "year", "variable", "day", "value"}, rows);
}

void write_weather(const std::string& path, const WeatherMap& weather) {
  atomic_write_file(path, weather_csv(weather));
}

namespace {

constexpr int kMinSurRow = 5;
constexpr int kAvgSurRow = 6;
constexpr int kMaxSurRow = 4;

template <typename T>
std::vector<T> sorted_unique(std::set<T> values) {
  return std::vector<T>(values.begin(), values.end());
}

}  // namespace

JoinedDataset join_and_validate(std::vector<PerformanceRecord> records,
                                WeatherMap weather, ValidationReport* report,
                                const ValidateOptions& options) {
  ValidationReport local;
  ValidationReport& rep = report != nullptr ? *report : local;

  std::set<std::string> locations, mgs, genotypes, states;
  std::set<int> years;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string where =
        "record " + std::to_string(i) + " (" + rec.location_id + ", " +
        std::to_string(rec.year) + ", " + rec.genotype_id + ")";
    if (rec.location_id.empty() || rec.genotype_id.empty() ||
        rec.state.empty()) {
      rep.violations.push_back(
          {"empty_identifier", where, "location/genotype/state must be set"});
    }
    if (rec.yield < 0.0) {
      rep.violations.push_back({"negative_yield", where,
                                "yield " + format_double(rec.yield) +
                                    " is negative"});
    }
    if (rec.year < options.year_min || rec.year > options.year_max) {
      rep.violations.push_back(
          {"year_out_of_range", where,
           "year " + std::to_string(rec.year) + " outside " +
               std::to_string(options.year_min) + ".." +
               std::to_string(options.year_max)});
    }
    if (weather.find({rec.location_id, rec.year}) == weather.end()) {
      rep.violations.push_back(
          {"dangling_record", where, "no weather series for this key"});
    }
    locations.insert(rec.location_id);
    if (!rec.maturity_group.empty()) mgs.insert(rec.maturity_group);
    genotypes.insert(rec.genotype_id);
    states.insert(rec.state);
    years.insert(rec.year);
  }

  for (const auto& [key, series] : weather) {
    for (int d = 0; d < kSeasonDays; ++d) {
      const double lo = series.at(kMinSurRow, d);
      const double mid = series.at(kAvgSurRow, d);
      const double hi = series.at(kMaxSurRow, d);
      if (lo > mid || mid > hi) {
        const Violation v{
            "surface_temperature_order",
            "weather (" + key.first + ", " + std::to_string(key.second) + ")",
            "day " + std::to_string(d + 1) + ": MinSur=" + format_double(lo) +
                " AvgSur=" + format_double(mid) + " MaxSur=" +
                format_double(hi)};
        if (options.strict) {
          rep.violations.push_back(v);
        } else {
          rep.warnings.push_back(v);
        }
      }
    }
  }

  if (options.strict && !rep.ok()) {
    throw Error("validation failed with " +
                std::to_string(rep.violations.size()) + " violation(s); first: " +
                rep.violations.front().kind + " at " +
                rep.violations.front().where);
  }

  JoinedDataset out;
  out.records = std::move(records);
  out.weather = std::move(weather);
  out.schema.locations = sorted_unique(std::move(locations));
  out.schema.maturity_groups = sorted_unique(std::move(mgs));
  out.schema.genotypes = sorted_unique(std::move(genotypes));
  out.schema.states = sorted_unique(std::move(states));
  out.schema.years = sorted_unique(std::move(years));
  return out;
}

double weather_window_mean(const WeatherSeries& w, int variable, int period) {
  if (variable < 0 || variable >= kWeatherVariableCount) {
    throw Error("weather variable index out of range: " +
                std::to_string(variable));
  }
  if (period == 0) {
    double sum = 0.0;
    for (int d = 0; d < kSeasonDays; ++d) sum += w.at(variable, d);
    return sum / kSeasonDays;
  }
  if (period < 1 || period > 53) {
    throw Error("period outside 1..53: " + std::to_string(period));
  }
  const int first = (period - 1) * 4;
  const int last = period == 53 ? kSeasonDays : first + 4;  // exclusive
  double sum = 0.0;
  for (int d = first; d < last; ++d) sum += w.at(variable, d);
  return sum / (last - first);
}

double SyntheticTruth::evaluate(const PerformanceRecord& rec,
                                const WeatherSeries& w) const {
  double y = intercept;
  if (const auto it = location_effect.find(rec.location_id);
      it != location_effect.end()) {
    y += it->second;
  }
  if (const auto it = genotype_effect.find(rec.genotype_id);
      it != genotype_effect.end()) {
    y += it->second;
  }
  if (const auto it = mg_effect.find(rec.maturity_group);
      it != mg_effect.end()) {
    y += it->second;
  }
  if (const auto it = year_effect.find(rec.year); it != year_effect.end()) {
    y += it->second;
  }
  for (const auto& term : weather_terms) {
    y += term.coefficient * weather_window_mean(w, term.variable, term.period);
  }
  return y;
}

namespace {

std::string padded_name(const std::string& prefix, int index, int width) {
  std::string digits = std::to_string(index);
  while (static_cast<int>(digits.size()) < width) digits.insert(0, "0");
  return prefix + digits;
}

WeatherSeries make_weather(const std::string& location, int year, Rng& rng) {
  WeatherSeries w;
  w.location_id = location;
  w.year = year;

  // Per-series base + seasonal trend + multi-day weather spells + daily
  // jitter. The spells (constant over each 4-day stretch, independent
  // across stretches) keep downsampled periods from collapsing onto one
  // shared level. Surface temperatures keep MinSur <= AvgSur <= MaxSur
  // by construction.
  struct Profile {
    double base_lo, base_hi, amplitude, spell, jitter;
  };
  static constexpr Profile profiles[kWeatherVariableCount] = {
      {4.0, 8.0, 1.0, 1.6, 0.5},     // ADNI
      {2.0, 6.0, 0.8, 2.0, 0.7},     // AP
      {45.0, 75.0, 5.0, 8.0, 2.5},   // ARH
      {6.0, 11.0, 1.2, 2.2, 0.6},    // MDNI
      {0.0, 0.0, 0.0, 0.0, 0.0},     // MaxSur (derived)
      {0.0, 0.0, 0.0, 0.0, 0.0},     // MinSur (derived)
      {12.0, 22.0, 3.0, 4.0, 1.2},   // AvgSur
  };

  for (const int v : {0, 1, 2, 3, 6}) {
    const Profile& p = profiles[v];
    const double base = uniform_real(rng, p.base_lo, p.base_hi);
    const double phase = uniform_real(rng, 0.0, 6.28318);
    double spell = 0.0;
    for (int d = 0; d < kSeasonDays; ++d) {
      if (d % 4 == 0) spell = uniform_real(rng, -p.spell, p.spell);
      const double seasonal =
          p.amplitude * std::sin(2.0 * 3.14159265358979 * d / kSeasonDays +
                                 phase);
      double value = base + seasonal + spell +
                     uniform_real(rng, -p.jitter, p.jitter);
      if (value < 0.0) value = 0.0;
      w.at(v, d) = value;
    }
  }
  for (int d = 0; d < kSeasonDays; ++d) {
    const double avg = w.at(kAvgSurRow, d);
    w.at(kMaxSurRow, d) = avg + uniform_real(rng, 0.5, 6.0);
    w.at(kMinSurRow, d) = avg - uniform_real(rng, 0.5, 6.0);
  }
  return w;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& config,
                                    std::uint64_t seed) {
  if (config.locations <= 0 || config.years <= 0 || config.genotypes <= 0 ||
      config.maturity_groups <= 0) {
    throw Error("synthetic config: all entity counts must be positive");
  }
  if (!config.full_cross && config.record_count <= 0) {
    throw Error("synthetic config: record_count must be positive when "
                "full_cross is off");
  }
  for (const auto& term : config.weather_terms) {
    if (term.variable < 0 || term.variable >= kWeatherVariableCount) {
      throw Error("synthetic config: weather term variable out of range");
    }
    if (term.period < 0 || term.period > 53) {
      throw Error("synthetic config: weather term period outside 0..53");
    }
  }

  Rng rng(seed);
  SyntheticDataset out;
  SyntheticTruth& truth = out.truth;
  truth.intercept = config.intercept;
  truth.weather_terms = config.weather_terms;

  std::vector<std::string> locations, genotypes, mgs;
  std::vector<int> years;
  for (int i = 0; i < config.locations; ++i) {
    locations.push_back(padded_name("loc_", i, 3));
  }
  for (int i = 0; i < config.genotypes; ++i) {
    genotypes.push_back(padded_name("gen_", i, 4));
  }
  for (int i = 0; i < config.maturity_groups; ++i) {
    mgs.push_back(padded_name("mg_", i, 2));
  }
  for (int i = 0; i < config.years; ++i) {
    years.push_back(config.first_year + i);
  }

  const int n_states = std::max(1, config.locations / 2);
  std::map<std::string, std::string> state_of;
  for (int i = 0; i < config.locations; ++i) {
    state_of[locations[i]] = padded_name("ST", i % n_states, 2);
  }

  for (const auto& name : locations) {
    truth.location_effect[name] =
        uniform_real(rng, -config.location_scale, config.location_scale);
  }
  for (const auto& name : genotypes) {
    truth.genotype_effect[name] =
        uniform_real(rng, -config.genotype_scale, config.genotype_scale);
  }
  for (const auto& name : mgs) {
    truth.mg_effect[name] = uniform_real(rng, -config.mg_scale, config.mg_scale);
  }
  for (const int year : years) {
    truth.year_effect[year] =
        uniform_real(rng, -config.year_scale, config.year_scale);
  }

  std::map<std::string, std::string> mg_of;
  for (const auto& gen : genotypes) {
    mg_of[gen] = mgs[uniform_index(rng, mgs.size())];
  }

  WeatherMap weather;
  for (const auto& loc : locations) {
    for (const int year : years) {
      weather.emplace(WeatherKey{loc, year}, make_weather(loc, year, rng));
    }
  }

  std::vector<std::tuple<std::string, int, std::string>> triples;
  if (config.full_cross) {
    for (const auto& loc : locations) {
      for (const int year : years) {
        for (const auto& gen : genotypes) {
          triples.emplace_back(loc, year, gen);
        }
      }
    }
  } else {
    for (int i = 0; i < config.record_count; ++i) {
      triples.emplace_back(locations[uniform_index(rng, locations.size())],
                           years[uniform_index(rng, years.size())],
                           genotypes[uniform_index(rng, genotypes.size())]);
    }
  }

  std::vector<PerformanceRecord> records;
  records.reserve(triples.size());
  for (const auto& [loc, year, gen] : triples) {
    PerformanceRecord rec;
    rec.location_id = loc;
    rec.year = year;
    rec.genotype_id = gen;
    rec.maturity_group = mg_of[gen];
    rec.state = state_of[loc];
    const WeatherSeries& w = weather.at({loc, year});
    double y = truth.evaluate(rec, w);
    if (config.noise_sigma > 0.0) {
      y += normal(rng, 0.0, config.noise_sigma);
    }
    if (y < 0.0) {
      throw Error("synthetic config produced a negative yield (" +
                  format_double(y) + "); reduce effect scales or noise");
    }
    rec.yield = y;
    records.push_back(std::move(rec));
  }

  out.data = join_and_validate(std::move(records), std::move(weather), nullptr);
  return out;
}

}  // namespace yieldcast
