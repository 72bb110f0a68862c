#include "progres/run_config.hpp"

#include <cstdlib>
#include <fstream>

namespace progres {

namespace {

using nlohmann::json;

EndpointConfig endpoint_from_json(const json& j, int default_parallelism,
                                  std::string* api_key_env) {
  EndpointConfig cfg;
  cfg.parallelism_limit = default_parallelism;
  if (j.contains("base_url")) cfg.base_url = j["base_url"].get<std::string>();
  if (j.contains("model_id")) cfg.model_id = j["model_id"].get<std::string>();
  if (j.contains("temperature")) cfg.temperature = j["temperature"].get<double>();
  if (j.contains("max_tokens")) cfg.max_tokens = j["max_tokens"].get<int>();
  if (j.contains("timeout_ms")) cfg.timeout = std::chrono::milliseconds(j["timeout_ms"].get<long>());
  if (j.contains("max_retries")) cfg.max_retries = j["max_retries"].get<int>();
  if (j.contains("retry_base_ms"))
    cfg.retry_base_delay = std::chrono::milliseconds(j["retry_base_ms"].get<long>());
  if (j.contains("parallelism_limit")) cfg.parallelism_limit = j["parallelism_limit"].get<int>();
  if (j.contains("api_key_env")) *api_key_env = j["api_key_env"].get<std::string>();
  if (cfg.parallelism_limit < 1)
    throw std::runtime_error("endpoint parallelism_limit must be >= 1");
  if (cfg.temperature < 0.0) throw std::runtime_error("endpoint temperature must be >= 0");
  return cfg;
}

json endpoint_to_json(const EndpointConfig& cfg, const std::string& api_key_env) {
  return json{{"base_url", cfg.base_url},
              {"model_id", cfg.model_id},
              {"temperature", cfg.temperature},
              {"max_tokens", cfg.max_tokens},
              {"timeout_ms", cfg.timeout.count()},
              {"max_retries", cfg.max_retries},
              {"retry_base_ms", cfg.retry_base_delay.count()},
              {"parallelism_limit", cfg.parallelism_limit},
              {"api_key_env", api_key_env}};
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("parallelism_limit")) cfg.parallelism_limit = j["parallelism_limit"].get<int>();
  if (cfg.parallelism_limit < 1) throw std::runtime_error("parallelism_limit must be >= 1");

  if (j.contains("validation_corpus") && !j["validation_corpus"].is_null())
    cfg.validation_corpus = j["validation_corpus"].get<std::string>();
  if (j.contains("test_corpus") && !j["test_corpus"].is_null())
    cfg.test_corpus = j["test_corpus"].get<std::string>();

  if (j.contains("generation_endpoint"))
    cfg.generation = endpoint_from_json(j["generation_endpoint"], cfg.parallelism_limit,
                                        &cfg.generation_api_key_env);
  else
    cfg.generation.parallelism_limit = cfg.parallelism_limit;
  if (j.contains("scoring_endpoint"))
    cfg.scoring =
        endpoint_from_json(j["scoring_endpoint"], cfg.parallelism_limit, &cfg.scoring_api_key_env);
  else
    cfg.scoring.parallelism_limit = cfg.parallelism_limit;

  if (j.contains("mode")) cfg.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("eval_modes")) {
    cfg.eval_modes.clear();
    for (const auto& m : j["eval_modes"]) cfg.eval_modes.push_back(mode_from_string(m.get<std::string>()));
    if (cfg.eval_modes.empty()) throw std::runtime_error("eval_modes must not be empty");
  }

  if (j.contains("alpha")) {
    const auto& a = j["alpha"];
    if (a.is_string()) {
      if (a.get<std::string>() != "sweep")
        throw std::runtime_error("alpha must be a number in [0,1] or \"sweep\"");
    } else {
      cfg.alpha = a.get<double>();
      if (!(*cfg.alpha >= 0.0 && *cfg.alpha <= 1.0))
        throw std::runtime_error("alpha must lie in [0, 1]");
    }
  }

  if (j.contains("template"))
    cfg.prompt_template = prompt_template_from_string(j["template"].get<std::string>());
  if (j.contains("normalization"))
    cfg.normalization = norm_policy_from_string(j["normalization"].get<std::string>());
  if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  return cfg;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  try {
    json j;
    in >> j;
    return from_json(j);
  } catch (const json::exception& e) {
    throw std::runtime_error("config file " + path.string() + ": " + e.what());
  }
}

json RunConfig::to_json() const {
  json j;
  j["validation_corpus"] =
      validation_corpus ? json(validation_corpus->string()) : json(nullptr);
  j["test_corpus"] = test_corpus ? json(test_corpus->string()) : json(nullptr);
  j["generation_endpoint"] = endpoint_to_json(generation, generation_api_key_env);
  j["scoring_endpoint"] = endpoint_to_json(scoring, scoring_api_key_env);
  j["mode"] = std::string(to_string(mode));
  json modes = json::array();
  for (Mode m : eval_modes) modes.push_back(std::string(to_string(m)));
  j["eval_modes"] = modes;
  j["alpha"] = alpha ? json(*alpha) : json("sweep");
  j["template"] = std::string(to_string(prompt_template));
  j["normalization"] = std::string(to_string(normalization));
  j["cache_dir"] = cache_dir.string();
  j["output_dir"] = output_dir.string();
  j["parallelism_limit"] = parallelism_limit;
  return j;
}

std::string RunConfig::config_hash() const {
  return ResponseCache::key_digest("run-config", "config", to_json());
}

void RunConfig::validate() const {
  if (!validation_corpus && !test_corpus)
    throw std::runtime_error("config names no corpus: set validation_corpus and/or test_corpus");
  for (const auto* p : {&validation_corpus, &test_corpus}) {
    if (!*p) continue;
    std::ifstream probe(**p);
    if (!probe)
      throw std::runtime_error("corpus path not readable: " + (*p)->string());
  }
  if (!alpha && !validation_corpus)
    throw std::runtime_error("alpha=\"sweep\" requires a validation corpus");
}

void RunConfig::resolve_api_keys() {
  auto resolve = [](EndpointConfig& cfg, const std::string& env_name) {
    if (cfg.api_key || env_name.empty()) return;
    if (const char* v = std::getenv(env_name.c_str()); v && *v) cfg.api_key = std::string(v);
  };
  resolve(generation, generation_api_key_env);
  resolve(scoring, scoring_api_key_env);
}

}  // namespace progres
