#pragma once

// Content-addressed disk cache for endpoint exchanges. Entries live at
// {dir}/{first-2-hex}/{digest}.json and store the request, the raw response
// body, and a timestamp. Writes are atomic (temp file + rename) so concurrent
// writers of the same key leave one intact winner.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace progres {

class ResponseCache {
 public:
  // Creates the directory if needed; throws std::runtime_error when the
  // location cannot be created or written.
  explicit ResponseCache(std::filesystem::path dir);

  // SHA-256 over (model id, operation kind, canonical payload dump).
  // Any payload difference yields a different digest.
  static std::string key_digest(std::string_view model_id, std::string_view op_kind,
                                const nlohmann::json& payload);

  // Exact bytes stored for the key, or nullopt. A corrupt entry is evicted,
  // counted, and reported as a miss.
  std::optional<std::string> get(std::string_view digest);

  void put(std::string_view digest, const nlohmann::json& request, std::string_view response_body);

  bool contains(std::string_view digest) const;

  const std::filesystem::path& dir() const { return dir_; }
  std::uint64_t corrupt_evictions() const { return corrupt_evictions_; }

 private:
  std::filesystem::path entry_path(std::string_view digest) const;

  std::filesystem::path dir_;
  std::uint64_t corrupt_evictions_ = 0;
  std::uint64_t tmp_counter_ = 0;
  mutable std::mutex mu_;
};

}  // namespace progres
