#pragma once

// Declarative run configuration: corpus paths, endpoint settings, pipeline
// knobs. Loaded from JSON; command-line flags override file values.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "progres/gateway.hpp"
#include "progres/prompts.hpp"
#include "progres/rescoring.hpp"

namespace progres {

struct RunConfig {
  std::optional<std::filesystem::path> validation_corpus;
  std::optional<std::filesystem::path> test_corpus;

  EndpointConfig generation;
  EndpointConfig scoring;
  std::string generation_api_key_env = "PROGRES_API_KEY";
  std::string scoring_api_key_env = "PROGRES_API_KEY";

  Mode mode = Mode::progres;
  std::vector<Mode> eval_modes{Mode::baseline, Mode::prompt_only, Mode::llm_rescoring,
                               Mode::progres, Mode::oracle};
  std::optional<double> alpha;  // absent means "sweep"
  PromptTemplate prompt_template = PromptTemplate::primary;
  NormPolicy normalization = NormPolicy::lowercase_strip_punct;

  std::filesystem::path cache_dir = ".progres-cache";
  std::filesystem::path output_dir = "progres-out";
  int parallelism_limit = 4;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::filesystem::path& path);

  // Secrets are never serialized; endpoints carry only the env var name.
  nlohmann::json to_json() const;

  // SHA-256 (hex) of the canonical JSON form; prefixes name run directories.
  std::string config_hash() const;

  // Referenced corpus paths must exist and be readable; "sweep" requires a
  // validation corpus. Throws std::runtime_error with a diagnostic.
  void validate() const;

  // Pulls API keys from the configured environment variables when unset.
  void resolve_api_keys();
};

}  // namespace progres
