#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mia {

/// Model output at one token position of the scored text.
struct TokenRecord {
  std::int64_t token_id = 0;
  std::string token_text;
  double logprob = 0.0;    // ln p(token | context), <= 0
  double dist_mean = 0.0;  // E_{z~p}[ln p(z | context)] over the vocabulary
  double dist_std = 0.0;   // std of ln p(z | context) under the same distribution
  double entropy = 0.0;    // Shannon entropy of the next-token distribution (nats)

  bool operator==(const TokenRecord&) const = default;
};

struct ScoredSequence {
  std::string model_id;
  std::string text;
  std::optional<std::string> prefix;
  std::vector<TokenRecord> tokens;

  bool operator==(const ScoredSequence&) const = default;
};

/// L(s) = -mean(logprob). Throws DegenerateDataError on an empty token list.
double sequence_loss(const ScoredSequence& s);

struct GenerateRequest {
  std::string prompt;
  std::size_t n_candidates = 1;
  std::size_t top_k = 50;  // 1 = greedy
  double temperature = 1.0;
  std::size_t max_new_tokens = 1024;
  std::optional<std::uint64_t> seed;
};

struct FillMaskRequest {
  std::string text;
  std::size_t n_neighbors = 50;
  double swap_fraction = 0.7;
  std::size_t top_k = 10;
  std::optional<std::uint64_t> seed;
};

/// One scoring / generation / fill-mask contract for every model backend.
/// Public entry points validate preconditions and keep in-flight counters;
/// backends implement the do_* hooks. Implementations must be safe for
/// concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual const std::string& model_id() const = 0;

  /// Scores `text`, optionally conditioned on `prefix`. An empty prefix is
  /// treated exactly like no prefix.
  ScoredSequence score(std::string_view text, std::optional<std::string> prefix = std::nullopt);
  std::vector<std::string> generate(const GenerateRequest& request);
  std::vector<std::string> fill_mask(const FillMaskRequest& request);

  /// Requests currently executing / the maximum observed concurrently.
  std::size_t in_flight() const { return in_flight_.load(); }
  std::size_t peak_in_flight() const { return peak_in_flight_.load(); }
  std::size_t request_count() const { return requests_.load(); }

 protected:
  virtual ScoredSequence do_score(std::string_view text, const std::optional<std::string>& prefix) = 0;
  virtual std::vector<std::string> do_generate(const GenerateRequest& request);
  virtual std::vector<std::string> do_fill_mask(const FillMaskRequest& request);

 private:
  class InFlightGuard;

  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_in_flight_{0};
  std::atomic<std::size_t> requests_{0};
};

struct ScoreItem {
  std::string text;
  std::optional<std::string> prefix;
};

struct BatchFailure {
  std::size_t index = 0;
  std::string message;
};

struct BatchResult {
  std::vector<std::optional<ScoredSequence>> results;  // input order; nullopt where failed
  std::vector<BatchFailure> failures;
};

/// Scores every item with at most max_in_flight concurrent requests.
/// Per-item errors are collected instead of aborting the batch.
BatchResult batch_score(Provider& provider, const std::vector<ScoreItem>& items,
                        std::size_t max_in_flight);

enum class ProviderKind { http, synthetic_unigram, synthetic_boosted };

ProviderKind parse_provider_kind(std::string_view s);
std::string_view to_string(ProviderKind kind);

/// Declarative description of a model backend.
struct ProviderHandle {
  ProviderKind kind = ProviderKind::synthetic_unigram;
  std::optional<std::string> endpoint;
  std::string model_id;
  std::size_t max_in_flight = 4;
  std::optional<std::filesystem::path> cache_dir;

  // synthetic backends
  std::size_t vocab_size = 1000;
  double zipf_exponent = 1.0;  // 0 = uniform
  double boost = 0.0;
  std::vector<std::string> member_texts;
};

/// Builds the backend described by `handle`, wrapped in a response cache
/// when cache_dir is set.
std::unique_ptr<Provider> make_provider(const ProviderHandle& handle);

}  // namespace mia
