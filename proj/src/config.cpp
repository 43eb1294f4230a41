#include "spare/config.hpp"

#include <set>

#include "spare/digest.hpp"
#include "spare/profiles.hpp"

namespace spare {

namespace {

const std::set<std::string> kStrategies = {"sc", "orm", "orm+sc", "prm_bon",
                                           "prm+sc"};
const std::set<std::string> kAggregations = {"min", "prod", "last", "max"};
const std::set<std::string> kTopLevelKeys = {
    "profile",    "output_dir",           "cache_dir", "seed",
    "samples_per_problem", "generation_temperature", "exemplar_count",
    "retries",    "judge_attempts",       "concurrency", "backoff_ms",
    "inputs",     "endpoints",            "pairs",     "prm_export",
    "selection",  "eval"};

class Checker {
 public:
  explicit Checker(const Json& raw) : raw_(raw) {}

  std::vector<std::string> errors;

  template <typename T>
  T field(const Json& obj, const std::string& where, const std::string& key,
          T fallback, bool required = false) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
      if (required) errors.push_back(where + key + " is required");
      return fallback;
    }
    try {
      return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors.push_back(where + key + " has the wrong type");
      return fallback;
    }
  }

  EndpointConfig endpoint(const Json& endpoints, const std::string& id,
                          bool required) {
    EndpointConfig ep;
    ep.id = id;
    if (!endpoints.contains(id) || endpoints.at(id).is_null()) {
      if (required) errors.push_back("endpoints." + id + " is required");
      return ep;
    }
    const Json& obj = endpoints.at(id);
    if (!obj.is_object()) {
      errors.push_back("endpoints." + id + " must be an object");
      return ep;
    }
    std::string where = "endpoints." + id + ".";
    ep.kind = field<std::string>(obj, where, "kind", "mock");
    ep.model = field<std::string>(obj, where, "model", "");
    if (ep.kind == "http") {
      ep.base_url = field<std::string>(obj, where, "base_url", "", true);
      if (ep.model.empty()) errors.push_back(where + "model is required");
      ep.api_key_env = field<std::string>(obj, where, "api_key_env", "");
    } else if (ep.kind == "mock") {
      ep.mock_seed = field<std::uint64_t>(obj, where, "mock_seed", 0);
      ep.mock_role = field<std::string>(obj, where, "mock_role", "");
    } else {
      errors.push_back(where + "kind must be 'mock' or 'http'");
    }
    return ep;
  }

 private:
  const Json& raw_;
};

}  // namespace

PipelineConfig validate_config_json(const Json& raw) {
  Checker check(raw);
  PipelineConfig config;

  if (!raw.is_object()) {
    throw ConfigError({"config root must be a JSON object"});
  }
  for (const auto& [key, _] : raw.items()) {
    if (kTopLevelKeys.count(key) == 0) {
      check.errors.push_back("unknown key '" + key + "'");
    }
  }

  config.profile = check.field<std::string>(raw, "", "profile", "", true);
  if (!config.profile.empty()) {
    try {
      get_profile(config.profile);
    } catch (const ConfigError& e) {
      check.errors.insert(check.errors.end(), e.diagnostics.begin(),
                          e.diagnostics.end());
    }
  }

  std::string out_dir =
      check.field<std::string>(raw, "", "output_dir", "", true);
  config.output_dir = out_dir;
  std::string cache_dir = check.field<std::string>(raw, "", "cache_dir", "");
  config.cache_dir =
      cache_dir.empty() ? config.output_dir / "cache" : cache_dir;

  config.seed = check.field<std::uint64_t>(raw, "", "seed", 0);
  config.samples_per_problem =
      check.field<int>(raw, "", "samples_per_problem", 20);
  config.generation_temperature =
      check.field<double>(raw, "", "generation_temperature", 1.0);
  int k = check.field<int>(raw, "", "exemplar_count", 5);
  config.retries = check.field<int>(raw, "", "retries", 3);
  config.judge_attempts = check.field<int>(raw, "", "judge_attempts", 3);
  config.concurrency = check.field<int>(raw, "", "concurrency", 4);
  config.backoff_ms = check.field<int>(raw, "", "backoff_ms", 500);

  if (config.samples_per_problem < 1) {
    check.errors.push_back("samples_per_problem must be >= 1");
  }
  if (config.generation_temperature < 0.0) {
    check.errors.push_back("generation_temperature must be >= 0");
  }
  if (k < 0) {
    check.errors.push_back("exemplar_count must be >= 0");
  } else {
    config.exemplar_count = static_cast<std::size_t>(k);
  }
  if (config.retries < 1) check.errors.push_back("retries must be >= 1");
  if (config.judge_attempts < 1) {
    check.errors.push_back("judge_attempts must be >= 1");
  }
  if (config.concurrency < 1) {
    check.errors.push_back("concurrency must be >= 1");
  }

  Json inputs = raw.value("inputs", Json::object());
  if (!inputs.is_object()) {
    check.errors.push_back("inputs must be an object");
    inputs = Json::object();
  }
  config.problems_file =
      check.field<std::string>(inputs, "inputs.", "problems", "", true);
  config.exemplars_file =
      check.field<std::string>(inputs, "inputs.", "exemplars", "", true);
  std::string human = check.field<std::string>(inputs, "inputs.", "human_labels", "");
  if (!human.empty()) config.human_labels_file = human;
  std::string score_file = check.field<std::string>(inputs, "inputs.", "score_file", "");
  if (!score_file.empty()) config.score_file = score_file;

  Json endpoints = raw.value("endpoints", Json::object());
  if (!endpoints.is_object()) {
    check.errors.push_back("endpoints must be an object");
    endpoints = Json::object();
  }
  config.generator = check.endpoint(endpoints, "generator", true);
  if (config.generator.kind == "mock" && config.generator.mock_role.empty()) {
    config.generator.mock_role = "generator";
  }
  config.judge = check.endpoint(endpoints, "judge", true);
  if (config.judge.kind == "mock" && config.judge.mock_role.empty()) {
    config.judge.mock_role = "judge";
  }
  if (endpoints.contains("scorer") && !endpoints.at("scorer").is_null()) {
    auto ep = check.endpoint(endpoints, "scorer", false);
    if (ep.kind == "mock" && ep.mock_role.empty()) ep.mock_role = "scorer";
    config.scorer = ep;
  }
  if (endpoints.contains("orm_scorer") && !endpoints.at("orm_scorer").is_null()) {
    auto ep = check.endpoint(endpoints, "orm_scorer", false);
    if (ep.kind == "mock" && ep.mock_role.empty()) ep.mock_role = "scorer";
    config.orm_scorer = ep;
  }

  Json pairs = raw.value("pairs", Json::object());
  if (pairs.is_object()) {
    config.pair_policy =
        check.field<std::string>(pairs, "pairs.", "policy", "spare");
    if (config.pair_policy != "spare" && config.pair_policy != "outcome") {
      check.errors.push_back("pairs.policy must be 'spare' or 'outcome'");
    }
    long cap = check.field<long>(pairs, "pairs.", "cap", 0);
    if (cap < 0) {
      check.errors.push_back("pairs.cap must be >= 0");
    } else {
      config.pair_cap = static_cast<std::size_t>(cap);
    }
  } else {
    check.errors.push_back("pairs must be an object");
  }

  Json prm = raw.value("prm_export", Json::object());
  if (prm.is_object()) {
    config.prm_marker =
        check.field<std::string>(prm, "prm_export.", "marker", "<|step_end|>");
    if (config.prm_marker.empty()) {
      check.errors.push_back("prm_export.marker must be non-empty");
    }
    long per_class = check.field<long>(prm, "prm_export.", "per_class", 0);
    if (per_class < 0) {
      check.errors.push_back("prm_export.per_class must be >= 0");
    } else {
      config.prm_per_class = static_cast<std::size_t>(per_class);
    }
  } else {
    check.errors.push_back("prm_export must be an object");
  }

  Json selection = raw.value("selection", Json::object());
  if (selection.is_object()) {
    std::vector<std::string> fallback = {"sc"};
    if (config.scorer) {
      fallback.push_back("prm_bon");
      fallback.push_back("prm+sc");
    }
    if (config.orm_scorer) {
      fallback.push_back("orm");
      fallback.push_back("orm+sc");
    }
    config.strategies = check.field<std::vector<std::string>>(
        selection, "selection.", "strategies", fallback);
    for (const auto& strategy : config.strategies) {
      if (kStrategies.count(strategy) == 0) {
        check.errors.push_back("selection.strategies: unknown strategy '" +
                               strategy + "'");
      } else if ((strategy == "prm_bon" || strategy == "prm+sc") &&
                 !config.scorer && !config.score_file) {
        check.errors.push_back("strategy '" + strategy +
                               "' needs endpoints.scorer or inputs.score_file");
      } else if ((strategy == "orm" || strategy == "orm+sc") &&
                 !config.orm_scorer) {
        check.errors.push_back("strategy '" + strategy +
                               "' needs endpoints.orm_scorer");
      }
    }
    config.aggregation =
        check.field<std::string>(selection, "selection.", "aggregation", "last");
    if (kAggregations.count(config.aggregation) == 0) {
      check.errors.push_back(
          "selection.aggregation must be one of min/prod/last/max");
    }
  } else {
    check.errors.push_back("selection must be an object");
  }

  Json eval = raw.value("eval", Json::object());
  if (eval.is_object()) {
    config.eval_groups = check.field<int>(eval, "eval.", "groups", 0);
    if (config.eval_groups < 0) {
      check.errors.push_back("eval.groups must be >= 0");
    }
    long group_size = check.field<long>(eval, "eval.", "group_size", 0);
    if (group_size < 0) {
      check.errors.push_back("eval.group_size must be >= 0");
    } else {
      config.eval_group_size = static_cast<std::size_t>(group_size);
    }
  } else {
    check.errors.push_back("eval must be an object");
  }

  if (!check.errors.empty()) throw ConfigError(check.errors);
  return config;
}

PipelineConfig validate_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError({"config file not found: " + path.string()});
  }
  std::string text = read_text(path);
  Json raw;
  try {
    raw = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  PipelineConfig config = validate_config_json(raw);
  config.digest = sha256_hex(text);
  return config;
}

}  // namespace spare
