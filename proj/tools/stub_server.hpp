#pragma once

// In-process OpenAI-compatible stub endpoint. Serves /v1/chat/completions,
// /v1/completions (echo + logprobs), and /v1/models with deterministic,
// configurable behavior. Instrumented with request counters and an
// in-flight high-water mark so tests can assert cache soundness and
// concurrency bounds.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace progres::stub {

class StubServer {
 public:
  // Reply content for a chat prompt (the "<...>" wrapping is the handler's
  // job, so format violations are expressible).
  using GenerateFn = std::function<std::string(const std::string& prompt)>;
  // Total logprob for a scored text; the server splits it uniformly over
  // whitespace tokens.
  using ScoreFn = std::function<double(const std::string& text)>;
  // Explicit per-token logprobs (must match the whitespace token count);
  // returning nullopt falls through to ScoreFn.
  using TokenScoreFn =
      std::function<std::optional<std::vector<double>>(const std::string& text)>;

  StubServer();
  ~StubServer();

  void set_generate_handler(GenerateFn fn);
  void set_score_handler(ScoreFn fn);
  void set_token_score_handler(TokenScoreFn fn);
  void set_required_api_key(std::string key);  // 401 on mismatch
  void set_response_delay(std::chrono::milliseconds d);
  void fail_next(int n, int status = 500);  // transient failures for retry tests
  void set_truncate_generation(bool on);    // finish_reason "length"
  void set_null_first_logprob(bool on);     // echo convention: leading null
  void set_omit_logprobs(bool on);          // mimic servers without echo scoring

  int start(int port = 0);  // binds 127.0.0.1 (free port when 0), returns the port
  void stop();
  std::string base_url() const;

  std::uint64_t request_count() const;
  std::uint64_t generation_requests() const;
  std::uint64_t scoring_requests() const;
  int concurrency_high_water() const;
  void reset_counters();

  // Deterministic defaults: the generator brackets the second-ranked
  // hypothesis (first when only one exists); the scorer hashes the text into
  // a stable total in [-5, -1].
  static std::string default_generate(const std::string& prompt);
  static double default_score(const std::string& text);
  static std::vector<std::string> parse_numbered_lines(const std::string& prompt);
  static std::uint64_t fnv1a(std::string_view data);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace progres::stub
