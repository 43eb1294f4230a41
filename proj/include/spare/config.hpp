#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spare/jsonl.hpp"
#include "spare/transport.hpp"

namespace spare {

struct PipelineConfig {
  std::string profile;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;  // defaults to output_dir / "cache"
  std::uint64_t seed = 0;

  int samples_per_problem = 20;       // N
  double generation_temperature = 1.0;
  std::size_t exemplar_count = 5;     // k
  int retries = 3;                    // total attempts per backend call
  int judge_attempts = 3;             // total judge calls incl. repair
  int concurrency = 4;
  int backoff_ms = 500;

  std::filesystem::path problems_file;
  std::filesystem::path exemplars_file;
  std::optional<std::filesystem::path> human_labels_file;
  std::optional<std::filesystem::path> score_file;

  EndpointConfig generator;
  EndpointConfig judge;
  std::optional<EndpointConfig> scorer;
  std::optional<EndpointConfig> orm_scorer;

  std::string pair_policy = "spare";
  std::size_t pair_cap = 0;  // 0 = unlimited

  std::string prm_marker = "<|step_end|>";
  std::size_t prm_per_class = 0;  // 0 = balance down to the smaller class

  std::vector<std::string> strategies;  // sc, orm, orm+sc, prm_bon, prm+sc
  std::string aggregation = "last";

  int eval_groups = 0;       // 0 = no grouped replication
  std::size_t eval_group_size = 0;  // 0 = floor(available / groups)

  std::string digest;  // sha256 of the raw config file
};

// Full structural validation with every problem reported at once; defaults
// (N=20, T=1, k=5, retries=3) applied. Throws ConfigError carrying the
// complete diagnostic list.
PipelineConfig validate_config(const std::filesystem::path& path);
PipelineConfig validate_config_json(const Json& raw);

}  // namespace spare
