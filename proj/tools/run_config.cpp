#include "run_config.hpp"

#include <nlohmann/json.hpp>

namespace yieldcast::cli {

namespace {

using nlohmann::json;

SyntheticConfig parse_synthetic(const json& j) {
  SyntheticConfig c;
  c.locations = j.value("locations", c.locations);
  c.years = j.value("years", c.years);
  c.genotypes = j.value("genotypes", c.genotypes);
  c.maturity_groups = j.value("maturity_groups", c.maturity_groups);
  c.first_year = j.value("first_year", c.first_year);
  c.full_cross = j.value("full_cross", c.full_cross);
  c.record_count = j.value("record_count", c.record_count);
  c.intercept = j.value("intercept", c.intercept);
  c.location_scale = j.value("location_scale", c.location_scale);
  c.genotype_scale = j.value("genotype_scale", c.genotype_scale);
  c.year_scale = j.value("year_scale", c.year_scale);
  c.mg_scale = j.value("mg_scale", c.mg_scale);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  if (j.contains("weather_terms")) {
    for (const auto& t : j.at("weather_terms")) {
      WeatherTerm term;
      if (t.contains("variable") && t.at("variable").is_string()) {
        const std::string name = t.at("variable").get<std::string>();
        term.variable = weather_variable_index(name);
        if (term.variable < 0) {
          throw Error("synthetic weather term names unknown variable: " +
                      name);
        }
      } else {
        term.variable = t.value("variable", 0);
      }
      term.period = t.value("period", 0);
      term.coefficient = t.value("coefficient", 0.0);
      c.weather_terms.push_back(term);
    }
  }
  return c;
}

ArchitectureConfig parse_architecture(const json& j,
                                      const ArchitectureConfig& defaults) {
  ArchitectureConfig c = defaults;
  if (j.contains("conv_stack")) {
    c.conv_stack.clear();
    for (const auto& s : j.at("conv_stack")) {
      c.conv_stack.push_back({s.value("filters", 16), s.value("kernel", 9),
                              s.value("stride", 1)});
    }
  }
  c.combined_dense_width =
      j.value("combined_dense_width", c.combined_dense_width);
  c.others_dense_width = j.value("others_dense_width", c.others_dense_width);
  if (j.contains("head_widths")) {
    const auto widths = j.at("head_widths").get<std::vector<int>>();
    if (widths.size() != c.head_widths.size()) {
      throw Error("head_widths must list exactly " +
                  std::to_string(c.head_widths.size()) + " layers");
    }
    std::copy(widths.begin(), widths.end(), c.head_widths.begin());
  }
  c.lstm_units = j.value("lstm_units", c.lstm_units);
  if (j.contains("dropout")) {
    const auto& d = j.at("dropout");
    c.dropout_cnn = d.value("cnn", c.dropout_cnn);
    c.dropout_lstm = d.value("lstm", c.dropout_lstm);
    c.dropout_others = d.value("others", c.dropout_others);
    c.dropout_final = d.value("final", c.dropout_final);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

TailPolicy parse_tail(const std::string& name) {
  if (name == "six_day_tail") return TailPolicy::kSixDayTail;
  if (name == "truncate") return TailPolicy::kTruncate;
  throw Error("unknown tail_policy: " + name);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error("config " + path + " is not valid JSON: " + e.what());
  }

  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);

  if (j.contains("data")) {
    const auto& d = j.at("data");
    c.data.records_csv = d.value("records_csv", std::string());
    if (d.contains("weather_csv")) {
      if (d.at("weather_csv").is_string()) {
        c.data.weather_csv = {d.at("weather_csv").get<std::string>()};
      } else {
        c.data.weather_csv =
            d.at("weather_csv").get<std::vector<std::string>>();
      }
    }
    if (d.contains("synthetic")) {
      c.data.synthetic = parse_synthetic(d.at("synthetic"));
      if (d.at("synthetic").contains("seed")) {
        c.data.synthetic_seed =
            d.at("synthetic").at("seed").get<std::uint64_t>();
      }
    }
  }

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    c.preprocess.include_mg = p.value("include_mg", c.preprocess.include_mg);
    if (p.contains("split_seed")) {
      c.preprocess.split_seed = p.at("split_seed").get<std::uint64_t>();
    }
    if (p.contains("tail_policy")) {
      c.preprocess.tail = parse_tail(p.at("tail_policy").get<std::string>());
    }
  }

  {
    ArchitectureConfig lstm_defaults;
    if (j.contains("architectures")) {
      const auto& a = j.at("architectures");
      if (a.contains("cnn-dnn")) {
        c.cnn_dnn = parse_architecture(a.at("cnn-dnn"), ArchitectureConfig{});
      }
      if (a.contains("cnn-lstm-dnn")) {
        c.cnn_lstm_dnn = parse_architecture(a.at("cnn-lstm-dnn"),
                                            lstm_defaults);
      }
    }
  }

  if (j.contains("training")) {
    const auto& t = j.at("training");
    c.training.iterations = t.value("iterations", c.training.iterations);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.log_interval = t.value("log_interval", c.training.log_interval);
    c.training.seed = t.value("seed", c.seed + 4);
    if (t.contains("learning_rate")) {
      const auto& lr = t.at("learning_rate");
      c.training.lr.base_lr = lr.value("base", c.training.lr.base_lr);
      c.training.lr.decay_rate =
          lr.value("decay_rate", c.training.lr.decay_rate);
      c.training.lr.decay_interval =
          lr.value("decay_steps", c.training.lr.decay_interval);
    }
  } else {
    c.training.seed = c.seed + 4;
  }

  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    if (e.contains("models")) {
      c.ensemble.models = e.at("models").get<std::vector<std::string>>();
    }
  }

  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    c.evaluate.include_lasso =
        e.value("include_lasso", c.evaluate.include_lasso);
    c.evaluate.lasso_alpha = e.value("lasso_alpha", c.evaluate.lasso_alpha);
    c.evaluate.region_model = e.value("region_model", c.evaluate.region_model);
  }

  if (j.contains("importance")) {
    const auto& i = j.at("importance");
    c.importance.repetitions = i.value("repetitions", c.importance.repetitions);
    if (i.contains("seed")) {
      c.importance.seed = i.at("seed").get<std::uint64_t>();
    }
    if (i.contains("groups")) {
      c.importance.groups = i.at("groups").get<std::vector<std::string>>();
    }
    if (i.contains("per_period_variables")) {
      c.importance.per_period_variables =
          i.at("per_period_variables").get<std::vector<std::string>>();
    }
    c.importance.per_period_repetitions = i.value(
        "per_period_repetitions", c.importance.per_period_repetitions);
  }

  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    c.selection.arch = s.value("arch", c.selection.arch);
    c.selection.k = s.value("k", c.selection.k);
    if (s.contains("locations")) {
      c.selection.locations =
          s.at("locations").get<std::vector<std::string>>();
    }
    if (s.contains("years")) {
      c.selection.years = s.at("years").get<std::vector<int>>();
    }
  }
  return c;
}

}  // namespace yieldcast::cli
