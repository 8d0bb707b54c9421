#include <doctest.h>

#include <nlohmann/json.hpp>

#include "test_helpers.hpp"
#include "yieldcast/dataset.hpp"

using namespace yieldcast;
using yieldcast::testing::TempDir;
using yieldcast::testing::contains;
using yieldcast::testing::error_message;

namespace {

std::string small_records_csv() {
  return "location_id,year,genotype_id,maturity_group,state,yield\n"
         "loc_a,2010,g1,mg1,IA,51.5\n"
         "loc_a,2011,g2,mg1,IA,44.25\n"
         "loc_b,2010,g1,mg2,NE,63\n";
}

// One (location, year) group with all 7 x 214 values.
std::string full_weather_csv(const std::string& location, int year,
                             double base = 1.0) {
  std::string out = "location_id,year,variable,day,value\n";
  for (int v = 0; v < kWeatherVariableCount; ++v) {
    for (int d = 1; d <= kSeasonDays; ++d) {
      double value = base + v * 0.5 + d * 0.001;
      if (v == 4) value += 10.0;  // MaxSur above AvgSur
      if (v == 5) value -= 10.0;  // MinSur below AvgSur
      out += location + "," + std::to_string(year) + "," +
             weather_variables()[v] + "," + std::to_string(d) + "," +
             format_double(value) + "\n";
    }
  }
  return out;
}

}  // namespace

TEST_CASE("performance records load in file order") {
  TempDir tmp;
  atomic_write_file(tmp.file("records.csv"), small_records_csv());
  const auto records = load_performance_records(tmp.file("records.csv"));
  REQUIRE(records.size() == 3);
  CHECK(records[0].location_id == "loc_a");
  CHECK(records[0].year == 2010);
  CHECK(records[0].genotype_id == "g1");
  CHECK(records[0].yield == doctest::Approx(51.5));
  CHECK(records[2].state == "NE");
  CHECK(records[2].yield == doctest::Approx(63.0));
}

TEST_CASE("unparsable yield errors cite the row and column") {
  TempDir tmp;
  atomic_write_file(tmp.file("records.csv"),
                    "location_id,year,genotype_id,maturity_group,state,yield\n"
                    "loc_a,2010,g1,mg1,IA,51.5\n"
                    "loc_a,2011,g2,mg1,IA,abc\n");
  const std::string msg = error_message(
      [&] { load_performance_records(tmp.file("records.csv")); });
  CHECK(contains(msg, "row 2"));
  CHECK(contains(msg, "yield"));
  CHECK(contains(msg, "abc"));
}

TEST_CASE("missing file and missing column are reported") {
  TempDir tmp;
  CHECK(contains(error_message([&] {
          load_performance_records(tmp.file("nope.csv"));
        }),
        "nope.csv"));

  atomic_write_file(tmp.file("bad.csv"), "location_id,year\nx,2010\n");
  CHECK(contains(error_message([&] {
          load_performance_records(tmp.file("bad.csv"));
        }),
        "genotype_id"));
}

TEST_CASE("records csv schema remaps column names") {
  TempDir tmp;
  atomic_write_file(tmp.file("records.csv"),
                    "site,yr,geno,mg,st,bu_acre\nloc,2005,g,m,KS,40.5\n");
  RecordsCsvSchema schema;
  schema.location_id = "site";
  schema.year = "yr";
  schema.genotype_id = "geno";
  schema.maturity_group = "mg";
  schema.state = "st";
  schema.yield = "bu_acre";
  const auto records =
      load_performance_records(tmp.file("records.csv"), schema);
  REQUIRE(records.size() == 1);
  CHECK(records[0].location_id == "loc");
  CHECK(records[0].yield == doctest::Approx(40.5));
}

TEST_CASE("weather loads one series per location-year") {
  TempDir tmp;
  atomic_write_file(tmp.file("weather.csv"), full_weather_csv("loc_a", 2010));
  const WeatherMap weather = load_weather(tmp.file("weather.csv"));
  REQUIRE(weather.size() == 1);
  const WeatherSeries& series = weather.at({"loc_a", 2010});
  CHECK(series.at(0, 0) == doctest::Approx(1.001));
  CHECK(series.at(6, 213) == doctest::Approx(1.0 + 3.0 + 0.214));
}

TEST_CASE("short weather variable errors name the variable") {
  TempDir tmp;
  std::string csv = "location_id,year,variable,day,value\n";
  for (int v = 0; v < kWeatherVariableCount; ++v) {
    const int days = v == 2 ? 213 : 214;  // ARH is short
    for (int d = 1; d <= days; ++d) {
      csv += "loc_a,2010," + weather_variables()[v] + "," +
             std::to_string(d) + ",1.0\n";
    }
  }
  atomic_write_file(tmp.file("weather.csv"), csv);
  const std::string msg =
      error_message([&] { load_weather(tmp.file("weather.csv")); });
  CHECK(contains(msg, "ARH"));
  CHECK(contains(msg, "213"));
}

TEST_CASE("unknown weather variable and bad day are rejected") {
  TempDir tmp;
  atomic_write_file(tmp.file("weather.csv"),
                    "location_id,year,variable,day,value\nloc,2010,FOG,1,1\n");
  CHECK(contains(error_message([&] { load_weather(tmp.file("weather.csv")); }),
                 "FOG"));

  atomic_write_file(tmp.file("weather2.csv"),
                    "location_id,year,variable,day,value\nloc,2010,AP,215,1\n");
  CHECK(contains(
      error_message([&] { load_weather(tmp.file("weather2.csv")); }), "215"));
}

TEST_CASE("overlapping weather keys across files are rejected") {
  TempDir tmp;
  atomic_write_file(tmp.file("w1.csv"), full_weather_csv("loc_a", 2010));
  atomic_write_file(tmp.file("w2.csv"), full_weather_csv("loc_a", 2010, 2.0));
  const std::string msg = error_message(
      [&] { load_weather({tmp.file("w1.csv"), tmp.file("w2.csv")}); });
  CHECK(contains(msg, "duplicate"));
  CHECK(contains(msg, "loc_a"));
}

TEST_CASE("join resolves weather and reports dangling records") {
  TempDir tmp;
  atomic_write_file(tmp.file("weather.csv"), full_weather_csv("loc_a", 2010));
  WeatherMap weather = load_weather(tmp.file("weather.csv"));

  std::vector<PerformanceRecord> records = {
      {"loc_a", 2010, "g1", "mg1", "IA", 50.0},
      {"loc_a", 2010, "g2", "mg1", "IA", 52.0},
  };
  ValidationReport report;
  const JoinedDataset joined =
      join_and_validate(records, weather, &report);
  CHECK(report.ok());
  CHECK(joined.weather_for(joined.records[0]).year == 2010);

  records.push_back({"loc_missing", 2011, "g3", "mg1", "KS", 48.0});
  ValidationReport report2;
  join_and_validate(records, weather, &report2);
  REQUIRE(report2.violations.size() == 1);
  CHECK(report2.violations[0].kind == "dangling_record");
  CHECK(contains(report2.violations[0].where, "loc_missing"));

  // Strict mode turns the report into a failure.
  CHECK_THROWS_AS(
      join_and_validate(records, weather, nullptr, {.strict = true}), Error);
}

TEST_CASE("surface temperature ordering is a warning, strict makes it fatal") {
  TempDir tmp;
  atomic_write_file(tmp.file("weather.csv"), full_weather_csv("loc_a", 2010));
  WeatherMap weather = load_weather(tmp.file("weather.csv"));
  WeatherSeries& series = weather.at({"loc_a", 2010});
  series.at(5, 17) = series.at(4, 17) + 5.0;  // MinSur above MaxSur on day 18

  std::vector<PerformanceRecord> records = {
      {"loc_a", 2010, "g1", "mg1", "IA", 50.0}};
  ValidationReport report;
  join_and_validate(records, weather, &report);
  CHECK(report.ok());
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].kind == "surface_temperature_order");
  CHECK(contains(report.warnings[0].message, "day 18"));

  CHECK_THROWS_AS(
      join_and_validate(records, weather, nullptr, {.strict = true}), Error);

  // Report serializes to JSON lines.
  const std::string jsonl = report.to_jsonl();
  const auto line = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(line.at("kind") == "surface_temperature_order");
  CHECK(line.at("severity") == "warning");
}

TEST_CASE("record invariants are validated") {
  TempDir tmp;
  atomic_write_file(tmp.file("weather.csv"), full_weather_csv("loc_a", 2010));
  WeatherMap weather = load_weather(tmp.file("weather.csv"));
  std::vector<PerformanceRecord> records = {
      {"loc_a", 2010, "g1", "mg1", "IA", -1.0},
      {"", 2010, "g2", "mg1", "IA", 10.0},
      {"loc_a", 1500, "g3", "mg1", "IA", 10.0},
  };
  ValidationReport report;
  join_and_validate(records, weather, &report);
  REQUIRE(report.violations.size() >= 3);
  bool saw_negative = false, saw_empty = false, saw_year = false;
  for (const auto& v : report.violations) {
    if (v.kind == "negative_yield") saw_negative = true;
    if (v.kind == "empty_identifier") saw_empty = true;
    if (v.kind == "year_out_of_range") saw_year = true;
  }
  CHECK(saw_negative);
  CHECK(saw_empty);
  CHECK(saw_year);
}

TEST_CASE("synthetic generation is a pure function of config and seed") {
  SyntheticConfig config;
  config.weather_terms = {{1, 29, 0.8}};
  config.noise_sigma = 0.3;
  const SyntheticDataset a = generate_synthetic(config, 7);
  const SyntheticDataset b = generate_synthetic(config, 7);
  CHECK(performance_records_csv(a.data.records) ==
        performance_records_csv(b.data.records));
  CHECK(weather_csv(a.data.weather) == weather_csv(b.data.weather));

  const SyntheticDataset c = generate_synthetic(config, 8);
  CHECK(performance_records_csv(a.data.records) !=
        performance_records_csv(c.data.records));
}

TEST_CASE("zero-noise synthetic yields reproduce the recorded function") {
  SyntheticConfig config;
  config.intercept = 0.0;
  config.location_scale = 0.0;
  config.genotype_scale = 0.0;
  config.year_scale = 0.0;
  config.mg_scale = 0.0;
  config.weather_terms = {{1, 0, 2.0}};  // 2 * season mean of AP
  config.noise_sigma = 0.0;
  const SyntheticDataset synth = generate_synthetic(config, 11);
  for (const auto& rec : synth.data.records) {
    const WeatherSeries& w = synth.data.weather_for(rec);
    CHECK(rec.yield ==
          doctest::Approx(2.0 * weather_window_mean(w, 1, 0)).epsilon(1e-12));
    CHECK(rec.yield == doctest::Approx(synth.truth.evaluate(rec, w)));
  }
}

TEST_CASE("full cross produces locations x years x genotypes records") {
  SyntheticConfig config;
  config.locations = 5;
  config.years = 3;
  config.genotypes = 10;
  const SyntheticDataset synth = generate_synthetic(config, 3);
  CHECK(synth.data.records.size() == 5 * 3 * 10);
  CHECK(synth.data.weather.size() == 5 * 3);
  CHECK(synth.data.schema.genotypes.size() == 10);
}

TEST_CASE("nonpositive synthetic counts are rejected") {
  SyntheticConfig config;
  config.genotypes = 0;
  CHECK_THROWS_AS(generate_synthetic(config, 1), Error);
}

TEST_CASE("ingestion round-trips losslessly") {
  SyntheticConfig config;
  config.locations = 3;
  config.years = 2;
  config.genotypes = 4;
  config.weather_terms = {{3, 25, 0.4}};
  config.noise_sigma = 0.2;
  const SyntheticDataset synth = generate_synthetic(config, 99);

  TempDir tmp;
  write_performance_records(tmp.file("records.csv"), synth.data.records);
  write_weather(tmp.file("weather.csv"), synth.data.weather);

  const auto records = load_performance_records(tmp.file("records.csv"));
  const auto weather = load_weather(tmp.file("weather.csv"));
  CHECK(records == synth.data.records);
  CHECK(weather == synth.data.weather);

  ValidationReport report;
  const JoinedDataset joined = join_and_validate(records, weather, &report);
  CHECK(report.ok());
  CHECK(joined.schema == synth.data.schema);
}
