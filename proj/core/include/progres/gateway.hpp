#pragma once

// Endpoint interaction: chat-completion generation and echoed-logprob
// sequence scoring against OpenAI-compatible servers, with disk caching,
// retry with exponential backoff, request coalescing, and a hard cap on
// in-flight requests.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "progres/cache.hpp"

namespace progres {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model_id = "default";
  std::optional<std::string> api_key;  // sent as a bearer header, never logged
  double temperature = 0.0;            // deterministic by default
  int max_tokens = 256;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds retry_base_delay{1000};  // doubled per attempt
  int parallelism_limit = 4;                         // hard cap on in-flight requests
};

enum class GatewayErrorKind { transport, auth, truncated, protocol, config };

std::string_view to_string(GatewayErrorKind k);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

 private:
  GatewayErrorKind kind_;
};

struct GenerationResult {
  std::string raw_text;                 // assistant reply, verbatim
  std::optional<std::string> extracted; // present iff exactly one bracketed span
  bool fallback_used = false;           // reply violated the bracket format
  bool cache_hit = false;
};

struct TokenScore {
  std::string token;
  double logprob = 0.0;  // <= 0; a null endpoint value contributes 0
};

struct ScoringResult {
  std::vector<TokenScore> tokens;
  double total = 0.0;  // sum of token logprobs in order
  bool cache_hit = false;
};

class LlmGateway {
 public:
  LlmGateway(EndpointConfig cfg, ResponseCache& cache);
  ~LlmGateway();
  LlmGateway(const LlmGateway&) = delete;
  LlmGateway& operator=(const LlmGateway&) = delete;

  // Cache first; on miss issues POST {base_url}/v1/chat/completions and
  // stores the raw body before extraction. Throws GatewayError; failures are
  // per-call, callers decide whether to degrade or abort.
  GenerationResult generate_correction(const std::string& prompt);

  // Cache first; on miss issues POST {base_url}/v1/completions with
  // {"prompt": text, "max_tokens": 0, "echo": true, "logprobs": 1}. The text
  // is scored verbatim (no case or punctuation changes).
  ScoringResult score_sequence(const std::string& text);

  // Digests let callers check cache state without touching the network.
  std::string generation_digest(const std::string& prompt) const;
  std::string scoring_digest(const std::string& text) const;

  // GET {base_url}/v1/models; any HTTP response counts as reachable.
  // Throws GatewayError(transport) when the endpoint cannot be reached.
  void probe_reachable();

  // Scores a one-word probe text through the normal (cached) path; throws
  // GatewayError(config) when the endpoint does not return logprobs.
  void probe_logprob_support();

  std::uint64_t network_requests() const { return network_requests_.load(); }
  std::uint64_t cache_hits() const { return cache_hits_.load(); }

  const EndpointConfig& config() const { return cfg_; }

 private:
  struct Impl;

  nlohmann::json generation_payload(const std::string& prompt) const;
  nlohmann::json scoring_payload(const std::string& text) const;
  std::string fetch(const std::string& digest, const nlohmann::json& payload,
                    const std::string& path, bool& cache_hit);

  EndpointConfig cfg_;
  ResponseCache& cache_;
  std::atomic<std::uint64_t> network_requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::unique_ptr<Impl> impl_;
};

}  // namespace progres
