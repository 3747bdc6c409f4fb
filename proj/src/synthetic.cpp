#include "mia/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "mia/errors.hpp"
#include "mia/text.hpp"

namespace mia::synthetic {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

UnigramModel::UnigramModel(std::vector<std::string> words, std::vector<double> weights)
    : words_(std::move(words)) {
  if (words_.empty() || words_.size() != weights.size()) {
    throw ConfigError("unigram model needs one positive weight per word");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("unigram weights must be positive");
    total += w;
  }
  const double log_total = std::log(total);
  const std::size_t v = words_.size();
  probs_.resize(v);
  logprobs_.resize(v);
  cumulative_.resize(v);
  double acc = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    probs_[i] = weights[i] / total;
    logprobs_[i] = std::log(weights[i]) - log_total;
    acc += probs_[i];
    cumulative_[i] = acc;
    if (!index_.emplace(words_[i], i).second) throw ConfigError("duplicate vocabulary word " + words_[i]);
  }
  ranked_.resize(v);
  std::iota(ranked_.begin(), ranked_.end(), std::size_t{0});
  std::stable_sort(ranked_.begin(), ranked_.end(),
                   [&](std::size_t a, std::size_t b) { return probs_[a] > probs_[b]; });

  bool uniform = std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights[0]; });
  if (uniform) {
    dist_mean_ = logprobs_[0];
    dist_std_ = 0.0;
  } else {
    for (std::size_t i = 0; i < v; ++i) dist_mean_ += probs_[i] * logprobs_[i];
    double var = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
      double d = logprobs_[i] - dist_mean_;
      var += probs_[i] * d * d;
    }
    dist_std_ = std::sqrt(std::max(0.0, var));
  }
  entropy_ = std::max(0.0, -dist_mean_);
}

UnigramModel UnigramModel::zipf(std::size_t vocab_size, double exponent) {
  if (vocab_size == 0) throw ConfigError("vocab_size must be > 0");
  std::vector<std::string> words(vocab_size);
  std::vector<double> weights(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    words[i] = "w" + std::to_string(i);
    weights[i] = exponent == 0.0 ? 1.0 : std::pow(static_cast<double>(i + 1), -exponent);
  }
  return UnigramModel(std::move(words), std::move(weights));
}

std::size_t UnigramModel::id_of(std::string_view word) const {
  if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
  return fnv1a(word) % words_.size();
}

std::size_t UnigramModel::sample(Rng& rng, double temperature, std::size_t top_k) const {
  const std::size_t v = words_.size();
  if (top_k == 1) return ranked_[0];
  if ((top_k == 0 || top_k >= v) && temperature == 1.0) {
    double u = std::uniform_real_distribution<double>(0.0, cumulative_.back())(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), v - 1);
  }
  std::size_t k = (top_k == 0 || top_k > v) ? v : top_k;
  const double top = logprobs_[ranked_[0]];
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) w[i] = std::exp((logprobs_[ranked_[i]] - top) / temperature);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return ranked_[dist(rng)];
}

std::string UnigramModel::sample_text(Rng& rng, std::size_t n_words, double temperature,
                                      std::size_t top_k) const {
  std::string out;
  for (std::size_t i = 0; i < n_words; ++i) {
    if (i) out.push_back(' ');
    out += words_[sample(rng, temperature, top_k)];
  }
  return out;
}

UnigramProvider::UnigramProvider(std::string model_id, UnigramModel model, SyntheticOptions options)
    : model_id_(std::move(model_id)), model_(std::move(model)), options_(options) {}

ScoredSequence UnigramProvider::base_score(std::string_view text,
                                           const std::optional<std::string>& prefix) const {
  if (options_.latency.count() > 0) std::this_thread::sleep_for(options_.latency);
  ScoredSequence out{model_id_, std::string(text), prefix, {}};
  for (auto word : text::split_whitespace(text)) {
    std::size_t id = model_.id_of(word);
    out.tokens.push_back(TokenRecord{static_cast<std::int64_t>(id), std::string(word),
                                     model_.logprob(id), model_.dist_mean(), model_.dist_std(),
                                     model_.entropy()});
  }
  return out;
}

ScoredSequence UnigramProvider::do_score(std::string_view text,
                                         const std::optional<std::string>& prefix) {
  return base_score(text, prefix);
}

std::vector<std::string> UnigramProvider::do_generate(const GenerateRequest& request) {
  std::vector<std::string> out;
  out.reserve(request.n_candidates);
  const std::uint64_t seed = request.seed.value_or(0);
  const std::uint64_t stream = fnv1a(request.prompt);
  for (std::size_t i = 0; i < request.n_candidates; ++i) {
    Rng rng = make_rng(seed, stream + i);
    out.push_back(model_.sample_text(rng, request.max_new_tokens, request.temperature, request.top_k));
  }
  return out;
}

std::vector<std::string> UnigramProvider::do_fill_mask(const FillMaskRequest& request) {
  auto words = text::split_whitespace(request.text);
  if (words.empty()) throw ConfigError("fill_mask: text has no words");
  const std::size_t n_words = words.size();
  const std::size_t n_swap = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(request.swap_fraction * static_cast<double>(n_words))), 1,
      n_words);
  const std::size_t k = std::clamp<std::size_t>(request.top_k, 2, model_.size());
  if (model_.size() < 2) throw CapabilityError("fill_mask needs a vocabulary of at least 2 words");

  Rng rng = make_rng(request.seed.value_or(0), fnv1a(request.text));
  std::vector<std::string> out;
  std::unordered_set<std::string> seen{request.text};
  std::vector<std::size_t> positions(n_words);
  const std::size_t budget = 20 * request.n_neighbors + 100;
  for (std::size_t attempt = 0; out.size() < request.n_neighbors && attempt < budget; ++attempt) {
    std::vector<std::string> variant(words.begin(), words.end());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_swap; ++i) {
      std::size_t j = std::uniform_int_distribution<std::size_t>(i, n_words - 1)(rng);
      std::swap(positions[i], positions[j]);
      std::size_t pick = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
      const std::string* candidate = &model_.words()[model_.ranked_ids()[pick]];
      if (*candidate == variant[positions[i]]) {
        candidate = &model_.words()[model_.ranked_ids()[(pick + 1) % k]];
      }
      variant[positions[i]] = *candidate;
    }
    std::string joined = text::join(variant);
    if (seen.insert(joined).second) out.push_back(std::move(joined));
  }
  if (out.size() < request.n_neighbors) {
    throw ProviderError("fill_mask: could only produce " + std::to_string(out.size()) +
                        " distinct neighbors of " + std::to_string(request.n_neighbors));
  }
  return out;
}

BoostedProvider::BoostedProvider(std::string model_id, UnigramModel model, double boost,
                                 const std::vector<std::string>& member_texts, SyntheticOptions options)
    : UnigramProvider(std::move(model_id), std::move(model), options),
      boost_(boost),
      members_(member_texts.begin(), member_texts.end()) {
  if (!std::isfinite(boost) || boost < 0.0) throw ConfigError("boost must be finite and >= 0");
}

ScoredSequence BoostedProvider::do_score(std::string_view text,
                                         const std::optional<std::string>& prefix) {
  ScoredSequence out = base_score(text, prefix);
  if (!prefix && boost_ > 0.0 && members_.contains(out.text)) {
    for (auto& t : out.tokens) t.logprob = std::min(0.0, t.logprob + boost_);
  }
  return out;
}

std::vector<Document> iid_corpus(const UnigramModel& model, std::size_t n_members,
                                 std::size_t n_nonmembers, std::size_t words_per_doc,
                                 std::uint64_t seed) {
  std::vector<Document> docs;
  docs.reserve(n_members + n_nonmembers);
  for (std::size_t i = 0; i < n_members + n_nonmembers; ++i) {
    Rng rng = make_rng(seed, i);
    bool member = i < n_members;
    Document d;
    d.id = (member ? "m" : "n") + std::to_string(member ? i : i - n_members);
    d.label = member ? Label::member : Label::non_member;
    d.source = "synthetic";
    d.text = model.sample_text(rng, words_per_doc);
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace mia::synthetic
