#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/provider.hpp"
#include "mia/rng.hpp"

namespace mia::synthetic {

/// Unigram language model over whitespace words. Words outside the vocabulary
/// are hashed onto a vocabulary entry, so every token has a defined probability.
class UnigramModel {
 public:
  UnigramModel(std::vector<std::string> words, std::vector<double> weights);

  /// V words "w0".."w{V-1}" with weight 1/(rank+1)^exponent (exponent 0 = uniform).
  static UnigramModel zipf(std::size_t vocab_size, double exponent);

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<double>& probs() const { return probs_; }

  std::size_t id_of(std::string_view word) const;
  double logprob(std::size_t id) const { return logprobs_[id]; }

  double dist_mean() const { return dist_mean_; }
  double dist_std() const { return dist_std_; }
  double entropy() const { return entropy_; }

  /// Draws one word id with temperature and top-k truncation (top_k = 0: full vocabulary).
  std::size_t sample(Rng& rng, double temperature, std::size_t top_k) const;
  std::string sample_text(Rng& rng, std::size_t n_words, double temperature = 1.0,
                          std::size_t top_k = 0) const;

  /// Ids sorted by decreasing probability (ties by id).
  const std::vector<std::size_t>& ranked_ids() const { return ranked_; }

 private:
  std::vector<std::string> words_;
  std::vector<double> probs_;
  std::vector<double> logprobs_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> ranked_;
  std::unordered_map<std::string, std::size_t> index_;
  double dist_mean_ = 0.0;
  double dist_std_ = 0.0;
  double entropy_ = 0.0;
};

struct SyntheticOptions {
  /// Artificial per-request latency; makes concurrency observable in tests.
  std::chrono::microseconds latency{0};
};

/// In-process provider scoring text under a fixed UnigramModel. Conditioning
/// on a prefix does not change scores. generate() samples i.i.d. words;
/// fill_mask() swaps words for top-k vocabulary words.
class UnigramProvider : public Provider {
 public:
  UnigramProvider(std::string model_id, UnigramModel model, SyntheticOptions options = {});

  const std::string& model_id() const override { return model_id_; }
  const UnigramModel& model() const { return model_; }

 protected:
  ScoredSequence do_score(std::string_view text, const std::optional<std::string>& prefix) override;
  std::vector<std::string> do_generate(const GenerateRequest& request) override;
  std::vector<std::string> do_fill_mask(const FillMaskRequest& request) override;

  ScoredSequence base_score(std::string_view text, const std::optional<std::string>& prefix) const;

 private:
  std::string model_id_;
  UnigramModel model_;
  SyntheticOptions options_;
};

/// Stand-in for a memorizing model: unconditioned scoring of a registered
/// member text adds `boost` nats to every token logprob (capped at 0).
/// Prefix-conditioned scoring returns the unboosted unigram values.
class BoostedProvider : public UnigramProvider {
 public:
  BoostedProvider(std::string model_id, UnigramModel model, double boost,
                  const std::vector<std::string>& member_texts, SyntheticOptions options = {});

  double boost() const { return boost_; }

 protected:
  ScoredSequence do_score(std::string_view text, const std::optional<std::string>& prefix) override;

 private:
  double boost_;
  std::unordered_set<std::string> members_;
};

/// Corpus whose members and non-members are drawn from the same generator.
std::vector<Document> iid_corpus(const UnigramModel& model, std::size_t n_members,
                                 std::size_t n_nonmembers, std::size_t words_per_doc,
                                 std::uint64_t seed);

}  // namespace mia::synthetic
