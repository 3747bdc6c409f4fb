#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "mia/provider.hpp"

namespace mia {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Content-addressed store of provider responses: one JSON document per key
/// under `dir`, file name = hex hash of (protocol version, endpoint, request).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(std::string_view endpoint, const nlohmann::json& request);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& response) const;

  const std::filesystem::path& dir() const { return dir_; }

  /// Per-key lock; concurrent misses on one key are serialized.
  std::mutex& lock_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> stripes_;
};

/// Decorator that serves score/generate/fill_mask from a ResponseCache and
/// forwards misses to the wrapped backend.
class CachingProvider : public Provider {
 public:
  CachingProvider(std::unique_ptr<Provider> inner, std::filesystem::path dir);

  const std::string& model_id() const override { return inner_->model_id(); }
  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 protected:
  ScoredSequence do_score(std::string_view text, const std::optional<std::string>& prefix) override;
  std::vector<std::string> do_generate(const GenerateRequest& request) override;
  std::vector<std::string> do_fill_mask(const FillMaskRequest& request) override;

 private:
  template <typename Fetch>
  nlohmann::json cached(std::string_view endpoint, const nlohmann::json& request, Fetch&& fetch);

  std::unique_ptr<Provider> inner_;
  ResponseCache cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

}  // namespace mia
