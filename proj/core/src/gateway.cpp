#include "progres/gateway.hpp"

#include <httplib.h>

#include <cmath>
#include <future>
#include <mutex>
#include <semaphore>
#include <thread>
#include <unordered_map>

#include "progres/prompts.hpp"

namespace progres {

namespace {

using nlohmann::json;

GenerationResult parse_generation_body(const std::string& body, bool cache_hit) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("generation response is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw GatewayError(GatewayErrorKind::protocol, "generation response has no choices");
  const auto& choice = j["choices"][0];
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string() &&
      choice["finish_reason"].get<std::string>() == "length")
    throw GatewayError(GatewayErrorKind::truncated,
                       "generation truncated: max_tokens reached before the reply completed");
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string())
    throw GatewayError(GatewayErrorKind::protocol, "generation response has no message content");

  GenerationResult out;
  out.raw_text = choice["message"]["content"].get<std::string>();
  out.extracted = extract_bracketed(out.raw_text);
  out.fallback_used = !out.extracted.has_value();
  out.cache_hit = cache_hit;
  return out;
}

ScoringResult parse_scoring_body(const std::string& body, bool cache_hit) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw GatewayError(GatewayErrorKind::protocol,
                       std::string("scoring response is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw GatewayError(GatewayErrorKind::protocol, "scoring response has no choices");
  const auto& choice = j["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null())
    throw GatewayError(GatewayErrorKind::config,
                       "endpoint does not return logprobs; echo scoring is unsupported");
  const auto& lp = choice["logprobs"];
  if (!lp.contains("tokens") || !lp["tokens"].is_array() || !lp.contains("token_logprobs") ||
      !lp["token_logprobs"].is_array() || lp["tokens"].size() != lp["token_logprobs"].size())
    throw GatewayError(GatewayErrorKind::protocol, "scoring response has malformed logprobs");

  ScoringResult out;
  out.cache_hit = cache_hit;
  out.tokens.reserve(lp["tokens"].size());
  for (std::size_t i = 0; i < lp["tokens"].size(); ++i) {
    TokenScore ts;
    ts.token = lp["tokens"][i].get<std::string>();
    const auto& v = lp["token_logprobs"][i];
    ts.logprob = v.is_null() ? 0.0 : v.get<double>();  // leading echo token may be null
    if (!std::isfinite(ts.logprob))
      throw GatewayError(GatewayErrorKind::protocol, "scoring response has non-finite logprob");
    out.tokens.push_back(std::move(ts));
  }
  double total = 0.0;
  for (const auto& ts : out.tokens) total += ts.logprob;
  out.total = total;
  return out;
}

}  // namespace

std::string_view to_string(GatewayErrorKind k) {
  switch (k) {
    case GatewayErrorKind::transport: return "transport";
    case GatewayErrorKind::auth: return "auth";
    case GatewayErrorKind::truncated: return "truncated";
    case GatewayErrorKind::protocol: return "protocol";
    case GatewayErrorKind::config: return "config";
  }
  return "unknown";
}

struct LlmGateway::Impl {
  explicit Impl(int limit) : sem(limit > 0 ? limit : 1) {}

  std::counting_semaphore<> sem;
  std::mutex inflight_mu;
  std::unordered_map<std::string, std::shared_future<std::string>> inflight;

  std::string post_with_retries(LlmGateway& gw, const std::string& path, const std::string& body);
};

std::string LlmGateway::Impl::post_with_retries(LlmGateway& gw, const std::string& path,
                                                const std::string& body) {
  const EndpointConfig& cfg = gw.cfg_;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(cfg.retry_base_delay * (1LL << (attempt - 1)));

    httplib::Client cli(cfg.base_url);
    cli.set_connection_timeout(cfg.timeout);
    cli.set_read_timeout(cfg.timeout);
    cli.set_write_timeout(cfg.timeout);
    httplib::Headers headers;
    if (cfg.api_key) headers.emplace("Authorization", "Bearer " + *cfg.api_key);

    struct Permit {
      std::counting_semaphore<>& sem;
      explicit Permit(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
      ~Permit() { sem.release(); }
    };
    httplib::Result res = [&] {
      Permit permit(sem);
      ++gw.network_requests_;
      return cli.Post(path, headers, body, "application/json");
    }();

    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403)
      throw GatewayError(GatewayErrorKind::auth,
                         "authentication failed (HTTP " + std::to_string(status) + ")");
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300)
      throw GatewayError(GatewayErrorKind::protocol, "unexpected HTTP " + std::to_string(status));
    return res->body;
  }
  throw GatewayError(GatewayErrorKind::transport,
                     "transport failure after " + std::to_string(cfg.max_retries) +
                         " retries: " + last_error);
}

LlmGateway::LlmGateway(EndpointConfig cfg, ResponseCache& cache)
    : cfg_(std::move(cfg)), cache_(cache), impl_(std::make_unique<Impl>(cfg_.parallelism_limit)) {}

LlmGateway::~LlmGateway() = default;

json LlmGateway::generation_payload(const std::string& prompt) const {
  return json{{"model", cfg_.model_id},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
              {"temperature", cfg_.temperature},
              {"max_tokens", cfg_.max_tokens}};
}

json LlmGateway::scoring_payload(const std::string& text) const {
  return json{{"model", cfg_.model_id},
              {"prompt", text},
              {"max_tokens", 0},
              {"echo", true},
              {"logprobs", 1}};
}

std::string LlmGateway::generation_digest(const std::string& prompt) const {
  return ResponseCache::key_digest(cfg_.model_id, "chat", generation_payload(prompt));
}

std::string LlmGateway::scoring_digest(const std::string& text) const {
  return ResponseCache::key_digest(cfg_.model_id, "score", scoring_payload(text));
}

std::string LlmGateway::fetch(const std::string& digest, const json& payload,
                              const std::string& path, bool& cache_hit) {
  if (auto body = cache_.get(digest)) {
    cache_hit = true;
    ++cache_hits_;
    return *body;
  }
  cache_hit = false;

  // Coalesce identical concurrent requests onto one network call.
  std::shared_future<std::string> fut;
  std::promise<std::string> prom;
  bool owner = false;
  {
    std::lock_guard lock(impl_->inflight_mu);
    auto it = impl_->inflight.find(digest);
    if (it != impl_->inflight.end()) {
      fut = it->second;
    } else {
      fut = prom.get_future().share();
      impl_->inflight.emplace(digest, fut);
      owner = true;
    }
  }
  if (!owner) return fut.get();

  try {
    std::string body = impl_->post_with_retries(*this, path, payload.dump());
    cache_.put(digest, payload, body);
    prom.set_value(std::move(body));
  } catch (...) {
    prom.set_exception(std::current_exception());
  }
  {
    std::lock_guard lock(impl_->inflight_mu);
    impl_->inflight.erase(digest);
  }
  return fut.get();
}

GenerationResult LlmGateway::generate_correction(const std::string& prompt) {
  const json payload = generation_payload(prompt);
  bool cache_hit = false;
  const std::string body =
      fetch(generation_digest(prompt), payload, "/v1/chat/completions", cache_hit);
  return parse_generation_body(body, cache_hit);
}

ScoringResult LlmGateway::score_sequence(const std::string& text) {
  if (text.empty())
    throw std::invalid_argument("score_sequence: text must be non-empty");
  const json payload = scoring_payload(text);
  bool cache_hit = false;
  const std::string body = fetch(scoring_digest(text), payload, "/v1/completions", cache_hit);
  return parse_scoring_body(body, cache_hit);
}

void LlmGateway::probe_reachable() {
  httplib::Client cli(cfg_.base_url);
  cli.set_connection_timeout(cfg_.timeout);
  cli.set_read_timeout(cfg_.timeout);
  ++network_requests_;
  auto res = cli.Get("/v1/models");
  if (!res)
    throw GatewayError(GatewayErrorKind::transport,
                       "endpoint unreachable: " + cfg_.base_url + " (" +
                           httplib::to_string(res.error()) + ")");
}

void LlmGateway::probe_logprob_support() {
  score_sequence("a");  // GatewayError(config) when logprobs are missing
}

}  // namespace progres
