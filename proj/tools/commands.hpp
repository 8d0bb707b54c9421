#pragma once

#include <string>

#include "run_config.hpp"

namespace yieldcast::cli {

struct GlobalFlags {
  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
  bool strict = false;
};

RunConfig resolve_config(const GlobalFlags& flags);

int cmd_ingest(const RunConfig& config, bool strict);
int cmd_preprocess(const RunConfig& config, bool strict);
int cmd_train(const RunConfig& config, const std::string& arch_name);
int cmd_ensemble(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_importance(const RunConfig& config);
int cmd_select(const RunConfig& config, std::size_t k_override);

}  // namespace yieldcast::cli
