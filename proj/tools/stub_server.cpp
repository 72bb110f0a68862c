#include "stub_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cctype>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace progres::stub {

using nlohmann::json;

struct StubServer::Impl {
  httplib::Server server;
  std::thread listener;
  int port = 0;

  GenerateFn generate = &StubServer::default_generate;
  ScoreFn score = &StubServer::default_score;
  TokenScoreFn token_score;
  std::string required_api_key;
  std::chrono::milliseconds delay{0};
  std::atomic<int> fail_budget{0};
  int fail_status = 500;
  bool truncate_generation = false;
  bool null_first_logprob = false;
  bool omit_logprobs = false;

  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> gen_requests{0};
  std::atomic<std::uint64_t> score_requests{0};
  std::atomic<int> inflight{0};
  std::atomic<int> high_water{0};
  std::mutex handler_mu;  // guards handler std::functions against data races

  struct InflightGuard {
    Impl& impl;
    explicit InflightGuard(Impl& i) : impl(i) {
      ++impl.requests;
      const int now = ++impl.inflight;
      int hw = impl.high_water.load();
      while (now > hw && !impl.high_water.compare_exchange_weak(hw, now)) {
      }
      if (impl.delay.count() > 0) std::this_thread::sleep_for(impl.delay);
    }
    ~InflightGuard() { --impl.inflight; }
  };

  bool authorized(const httplib::Request& req) const {
    if (required_api_key.empty()) return true;
    return req.get_header_value("Authorization") == "Bearer " + required_api_key;
  }

  bool maybe_fail(httplib::Response& res) {
    int budget = fail_budget.load();
    while (budget > 0) {
      if (fail_budget.compare_exchange_weak(budget, budget - 1)) {
        res.status = fail_status;
        res.set_content("{\"error\":\"injected failure\"}", "application/json");
        return true;
      }
    }
    return false;
  }
};

StubServer::StubServer() : impl_(std::make_unique<Impl>()) {
  auto& impl = *impl_;

  impl.server.Get("/v1/models", [&impl](const httplib::Request&, httplib::Response& res) {
    Impl::InflightGuard guard(impl);
    res.set_content(json{{"object", "list"}, {"data", json::array({json{{"id", "stub"}}})}}.dump(),
                    "application/json");
  });

  impl.server.Post("/v1/chat/completions",
                   [&impl](const httplib::Request& req, httplib::Response& res) {
    Impl::InflightGuard guard(impl);
    ++impl.gen_requests;
    if (!impl.authorized(req)) {
      res.status = 401;
      res.set_content("{\"error\":\"invalid api key\"}", "application/json");
      return;
    }
    if (impl.maybe_fail(res)) return;

    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      res.status = 400;
      return;
    }
    std::string prompt;
    if (body.contains("messages") && body["messages"].is_array() && !body["messages"].empty())
      prompt = body["messages"][0].value("content", "");

    std::string content;
    {
      std::lock_guard lock(impl.handler_mu);
      content = impl.generate(prompt);
    }
    const std::string finish = impl.truncate_generation ? "length" : "stop";
    const json reply{{"id", "stub-chat"},
                     {"object", "chat.completion"},
                     {"model", body.value("model", "stub")},
                     {"choices",
                      json::array({json{{"index", 0},
                                        {"message", json{{"role", "assistant"}, {"content", content}}},
                                        {"finish_reason", finish}}})}};
    res.set_content(reply.dump(), "application/json");
  });

  impl.server.Post("/v1/completions", [&impl](const httplib::Request& req, httplib::Response& res) {
    Impl::InflightGuard guard(impl);
    ++impl.score_requests;
    if (!impl.authorized(req)) {
      res.status = 401;
      res.set_content("{\"error\":\"invalid api key\"}", "application/json");
      return;
    }
    if (impl.maybe_fail(res)) return;

    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      res.status = 400;
      return;
    }
    const std::string text = body.value("prompt", "");

    // Whitespace tokens with the usual leading-space convention so the
    // pieces concatenate back to the text.
    std::vector<std::string> tokens;
    std::istringstream words(text);
    std::string w;
    while (words >> w) tokens.push_back(tokens.empty() ? w : " " + w);

    std::optional<std::vector<double>> explicit_logprobs;
    double total = 0.0;
    {
      std::lock_guard lock(impl.handler_mu);
      if (impl.token_score) explicit_logprobs = impl.token_score(text);
      if (!explicit_logprobs) total = impl.score(text);
    }
    if (explicit_logprobs && explicit_logprobs->size() != tokens.size()) {
      res.status = 500;
      res.set_content("{\"error\":\"token_score handler size mismatch\"}", "application/json");
      return;
    }

    json jt = json::array();
    json jl = json::array();
    const std::size_t n = tokens.empty() ? 1 : tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      jt.push_back(tokens[i]);
      if (explicit_logprobs)
        jl.push_back((*explicit_logprobs)[i]);
      else if (i == 0 && impl.null_first_logprob)
        jl.push_back(nullptr);
      else
        jl.push_back(total / static_cast<double>(n));
    }
    json choice{{"index", 0}, {"text", text}, {"finish_reason", "stop"}};
    if (!impl.omit_logprobs)
      choice["logprobs"] = json{{"tokens", jt}, {"token_logprobs", jl}};
    const json reply{{"id", "stub-cmpl"},
                     {"object", "text_completion"},
                     {"model", body.value("model", "stub")},
                     {"choices", json::array({choice})}};
    res.set_content(reply.dump(), "application/json");
  });
}

StubServer::~StubServer() { stop(); }

void StubServer::set_generate_handler(GenerateFn fn) {
  std::lock_guard lock(impl_->handler_mu);
  impl_->generate = std::move(fn);
}

void StubServer::set_score_handler(ScoreFn fn) {
  std::lock_guard lock(impl_->handler_mu);
  impl_->score = std::move(fn);
}

void StubServer::set_token_score_handler(TokenScoreFn fn) {
  std::lock_guard lock(impl_->handler_mu);
  impl_->token_score = std::move(fn);
}

void StubServer::set_required_api_key(std::string key) {
  impl_->required_api_key = std::move(key);
}

void StubServer::set_response_delay(std::chrono::milliseconds d) { impl_->delay = d; }

void StubServer::fail_next(int n, int status) {
  impl_->fail_status = status;
  impl_->fail_budget = n;
}

void StubServer::set_truncate_generation(bool on) { impl_->truncate_generation = on; }

void StubServer::set_null_first_logprob(bool on) { impl_->null_first_logprob = on; }

void StubServer::set_omit_logprobs(bool on) { impl_->omit_logprobs = on; }

int StubServer::start(int port) {
  if (port > 0) {
    if (!impl_->server.bind_to_port("127.0.0.1", port))
      throw std::runtime_error("stub server failed to bind port " + std::to_string(port));
    impl_->port = port;
  } else {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  }
  if (impl_->port <= 0) throw std::runtime_error("stub server failed to bind");
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void StubServer::stop() {
  if (impl_->listener.joinable()) {
    impl_->server.stop();
    impl_->listener.join();
  }
}

std::string StubServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

std::uint64_t StubServer::request_count() const { return impl_->requests.load(); }
std::uint64_t StubServer::generation_requests() const { return impl_->gen_requests.load(); }
std::uint64_t StubServer::scoring_requests() const { return impl_->score_requests.load(); }
int StubServer::concurrency_high_water() const { return impl_->high_water.load(); }

void StubServer::reset_counters() {
  impl_->requests = 0;
  impl_->gen_requests = 0;
  impl_->score_requests = 0;
  impl_->high_water = 0;
}

std::uint64_t StubServer::fnv1a(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> StubServer::parse_numbered_lines(const std::string& prompt) {
  std::vector<std::string> hyps;
  std::istringstream lines(prompt);
  std::string line;
  while (std::getline(lines, line)) {
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i + 1 >= line.size() || line[i] != '.' || line[i + 1] != ' ') continue;
    hyps.push_back(line.substr(i + 2));
  }
  return hyps;
}

std::string StubServer::default_generate(const std::string& prompt) {
  const auto hyps = parse_numbered_lines(prompt);
  if (hyps.empty()) return "<unintelligible>";
  const std::string& pick = hyps.size() > 1 ? hyps[1] : hyps[0];
  return "<" + pick + ">";
}

double StubServer::default_score(const std::string& text) {
  return -1.0 - static_cast<double>(fnv1a(text) % 4000) / 1000.0;
}

}  // namespace progres::stub
