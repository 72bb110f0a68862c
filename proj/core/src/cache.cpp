#include "progres/cache.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace progres {

namespace fs = std::filesystem;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cache directory unusable: " + dir_.string() + ": " + ec.message());
  // Verify writability up front; a read-only cache dir is fatal at startup.
  const fs::path probe = dir_ / ".write-probe";
  {
    std::ofstream f(probe, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cache directory not writable: " + dir_.string());
  }
  fs::remove(probe, ec);
}

std::string ResponseCache::key_digest(std::string_view model_id, std::string_view op_kind,
                                      const nlohmann::json& payload) {
  std::string material;
  material.reserve(model_id.size() + op_kind.size() + 64);
  material.append(model_id);
  material.push_back('\x1f');
  material.append(op_kind);
  material.push_back('\x1f');
  material.append(payload.dump());  // dump() sorts keys: canonical form
  return sha256_hex(material);
}

fs::path ResponseCache::entry_path(std::string_view digest) const {
  return dir_ / std::string(digest.substr(0, 2)) / (std::string(digest) + ".json");
}

std::optional<std::string> ResponseCache::get(std::string_view digest) {
  const fs::path path = entry_path(digest);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();

  try {
    const auto entry = nlohmann::json::parse(buf.str());
    if (!entry.contains("response") || !entry["response"].is_string())
      throw std::runtime_error("missing response field");
    return entry["response"].get<std::string>();
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    ++corrupt_evictions_;
    std::error_code ec;
    fs::remove(path, ec);
    std::cerr << "warning: corrupt cache entry evicted: " << path.string() << " (" << e.what()
              << ")\n";
    return std::nullopt;
  }
}

void ResponseCache::put(std::string_view digest, const nlohmann::json& request,
                        std::string_view response_body) {
  const fs::path path = entry_path(digest);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error("cache write failed: " + ec.message());

  nlohmann::json entry;
  entry["request"] = request;
  entry["response"] = std::string(response_body);
  entry["timestamp"] = utc_timestamp();

  std::uint64_t serial;
  {
    std::lock_guard lock(mu_);
    serial = ++tmp_counter_;
  }
  const fs::path tmp = path.parent_path() / (std::string(digest) + ".tmp." +
                                             std::to_string(::getpid()) + "." +
                                             std::to_string(serial));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cache write failed: " + tmp.string());
    out << entry.dump();
    out.flush();
    if (!out) throw std::runtime_error("cache write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);  // atomic on POSIX, last writer wins
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cache rename failed: " + path.string());
  }
}

bool ResponseCache::contains(std::string_view digest) const {
  std::error_code ec;
  return fs::exists(entry_path(digest), ec);
}

}  // namespace progres
