#include "mia/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mia/compress.hpp"
#include "mia/errors.hpp"
#include "mia/text.hpp"

namespace mia {

namespace {

struct AttackName {
  AttackId id;
  std::string_view name;
};

constexpr AttackName kAttackNames[] = {
    {AttackId::loss, "loss"},       {AttackId::zlib, "zlib"},
    {AttackId::lower, "lower"},     {AttackId::ratio, "ratio"},
    {AttackId::neighborhood, "neighborhood"}, {AttackId::mink, "mink"},
    {AttackId::minkpp, "minkpp"},   {AttackId::recall, "recall"},
    {AttackId::con_recall, "con_recall"}, {AttackId::pac, "pac"},
    {AttackId::surp, "surp"},       {AttackId::samia, "samia"},
    {AttackId::samia_zlib, "samia_zlib"},
};

void require_tokens(const ScoredSequence& s) {
  if (s.tokens.empty()) throw DegenerateDataError("attack on a sequence with no tokens");
}

double nonzero_loss(const ScoredSequence& s, std::string_view attack) {
  double l = sequence_loss(s);
  if (l == 0.0) throw DegenerateDataError(std::string(attack) + ": loss is zero (certain prediction)");
  return l;
}

/// Mean of the n smallest values, summed in original position order so that
/// selecting every position reproduces a plain in-order mean bit for bit.
double mean_of_smallest(std::span<const double> values, std::size_t n) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (n < values.size()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    order.resize(n);
    std::sort(order.begin(), order.end());
  }
  double sum = 0.0;
  for (std::size_t i : order) sum += values[i];
  return sum / static_cast<double>(n);
}

std::size_t ceil_count(double fraction, std::size_t n) {
  // Guard against products like 0.3 * 10 = 3.0000000000000004.
  auto c = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(c, 1, n);
}

std::vector<std::string> lowered_words(std::string_view s) {
  std::vector<std::string> out;
  for (auto w : text::split_whitespace(s)) out.push_back(text::lowercase(w));
  return out;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& words,
                                                              std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    out[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                 words.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
  }
  return out;
}

double checked(double v, AttackId id) {
  if (!std::isfinite(v)) {
    throw DegenerateDataError(std::string(to_string(id)) + " produced a non-finite score");
  }
  return v;
}

}  // namespace

std::string_view to_string(AttackId id) {
  for (const auto& a : kAttackNames) {
    if (a.id == id) return a.name;
  }
  return "?";
}

AttackId parse_attack_id(std::string_view s) {
  for (const auto& a : kAttackNames) {
    if (a.name == s) return a.id;
  }
  throw ConfigError("unknown attack: " + std::string(s));
}

const std::vector<AttackId>& all_attacks() {
  static const std::vector<AttackId> ids = [] {
    std::vector<AttackId> v;
    for (const auto& a : kAttackNames) v.push_back(a.id);
    return v;
  }();
  return ids;
}

void AttackConfig::validate() const {
  auto fail = [&](const std::string& what) {
    throw ConfigError(std::string(to_string(id)) + ": " + what);
  };
  if (!(k_percent > 0.0 && k_percent <= 100.0)) fail("k_percent must be in (0, 100]");
  if (!(prefix_fraction > 0.0 && prefix_fraction < 1.0)) fail("prefix_fraction must be in (0, 1)");
  if (!(k_max > 0.0 && k_max <= 1.0) || !(k_min > 0.0 && k_min <= 1.0)) fail("k_max and k_min must be in (0, 1]");
  if (!(swap_fraction > 0.0 && swap_fraction <= 1.0)) fail("swap_fraction must be in (0, 1]");
  if (!(aug_alpha > 0.0 && aug_alpha <= 1.0)) fail("aug_alpha must be in (0, 1]");
  if (!(surp_k > 0.0 && surp_k <= 100.0)) fail("surp_k must be in (0, 100]");
  if (!(gen_temperature > 0.0)) fail("gen_temperature must be > 0");
  if (samia_ngram == 0) fail("samia_ngram must be >= 1");
  if (id == AttackId::neighborhood && n_neighbors == 0) fail("n_neighbors must be >= 1");
  if (id == AttackId::pac && n_augmentations == 0) fail("n_augmentations must be >= 1");
  if ((id == AttackId::samia || id == AttackId::samia_zlib) && n_candidates == 0) fail("n_candidates must be >= 1");
  if ((id == AttackId::recall || id == AttackId::con_recall) && n_shots == 0) fail("n_shots must be >= 1");
}

namespace attacks {

std::size_t k_count(double k_percent, std::size_t n) {
  auto c = static_cast<std::size_t>(std::floor(k_percent * static_cast<double>(n) / 100.0));
  return std::clamp<std::size_t>(c, 1, std::max<std::size_t>(n, 1));
}

double loss(const ScoredSequence& s) { return -sequence_loss(s); }

double zlib(const ScoredSequence& s) {
  if (s.text.empty()) throw DegenerateDataError("zlib: empty text");
  std::size_t z = zlib_compressed_size(s.text);
  if (z == 0) throw DegenerateDataError("zlib: zero compressed size");
  return -sequence_loss(s) / static_cast<double>(z);
}

double lower(const ScoredSequence& s, const ScoredSequence& s_lower) {
  return sequence_loss(s_lower) / nonzero_loss(s, "lower");
}

double ratio(const ScoredSequence& target, const ScoredSequence& reference) {
  return sequence_loss(reference) - sequence_loss(target);
}

double neighborhood(const ScoredSequence& s, std::span<const ScoredSequence> neighbors) {
  if (neighbors.empty()) throw DegenerateDataError("neighborhood: no neighbors");
  double sum = 0.0;
  for (const auto& n : neighbors) sum += sequence_loss(n);
  return sum / static_cast<double>(neighbors.size()) - sequence_loss(s);
}

double mink(const ScoredSequence& s, double k_percent) {
  require_tokens(s);
  std::vector<double> lp;
  lp.reserve(s.tokens.size());
  for (const auto& t : s.tokens) lp.push_back(t.logprob);
  return mean_of_smallest(lp, k_count(k_percent, lp.size()));
}

double minkpp(const ScoredSequence& s, double k_percent) {
  require_tokens(s);
  std::vector<double> z;
  for (const auto& t : s.tokens) {
    if (t.dist_std > 0.0) z.push_back((t.logprob - t.dist_mean) / t.dist_std);
  }
  if (z.empty()) throw DegenerateDataError("minkpp: next-token distribution has zero spread at every position");
  return mean_of_smallest(z, k_count(k_percent, z.size()));
}

double recall(const ScoredSequence& uncond, const ScoredSequence& cond) {
  return sequence_loss(cond) / nonzero_loss(uncond, "recall");
}

double con_recall(const ScoredSequence& uncond, const ScoredSequence& cond_nonmember,
                  const ScoredSequence& cond_member) {
  return (sequence_loss(cond_nonmember) - sequence_loss(cond_member)) / nonzero_loss(uncond, "con_recall");
}

double polarized_distance(const ScoredSequence& s, double k_max, double k_min) {
  require_tokens(s);
  std::vector<double> lp;
  for (const auto& t : s.tokens) lp.push_back(t.logprob);
  std::sort(lp.begin(), lp.end());
  const std::size_t n = lp.size();
  const std::size_t n_top = ceil_count(k_max, n);
  const std::size_t n_bottom = ceil_count(k_min, n);
  double top = std::accumulate(lp.end() - static_cast<std::ptrdiff_t>(n_top), lp.end(), 0.0) / static_cast<double>(n_top);
  double bottom = std::accumulate(lp.begin(), lp.begin() + static_cast<std::ptrdiff_t>(n_bottom), 0.0) /
                  static_cast<double>(n_bottom);
  return top - bottom;
}

double pac(const ScoredSequence& s, std::span<const ScoredSequence> augmentations, double k_max,
           double k_min) {
  if (augmentations.empty()) throw DegenerateDataError("pac: no augmentations");
  double mean_aug = 0.0;
  for (const auto& a : augmentations) mean_aug += polarized_distance(a, k_max, k_min);
  mean_aug /= static_cast<double>(augmentations.size());
  // The original statistic is larger for non-members; negate for member-high orientation.
  return -(polarized_distance(s, k_max, k_min) - mean_aug);
}

SurpValue surp(const ScoredSequence& s, double surp_k, double entropy_threshold) {
  require_tokens(s);
  std::vector<double> eligible;
  for (const auto& t : s.tokens) {
    if (t.entropy < entropy_threshold) eligible.push_back(t.logprob);
  }
  if (eligible.empty()) return SurpValue{mink(s, surp_k), true};
  return SurpValue{mean_of_smallest(eligible, k_count(surp_k, eligible.size())), false};
}

std::pair<std::string, std::string> split_prefix(std::string_view text, double prefix_fraction) {
  auto words = text::split_whitespace(text);
  auto cut = static_cast<std::size_t>(std::floor(prefix_fraction * static_cast<double>(words.size())));
  std::span<const std::string_view> all(words);
  return {text::join(all.first(cut)), text::join(all.subspan(cut))};
}

double samia(std::span<const std::string> candidates, std::string_view reference, std::size_t ngram) {
  if (ngram == 0) throw ConfigError("samia: n-gram order must be >= 1");
  auto ref_counts = ngram_counts(lowered_words(reference), ngram);
  std::size_t ref_total = 0;
  for (const auto& [g, c] : ref_counts) ref_total += c;
  if (ref_total == 0) throw DegenerateDataError("samia: empty reference suffix");
  if (candidates.empty()) throw DegenerateDataError("samia: no candidates");
  double sum = 0.0;
  for (const auto& cand : candidates) {
    auto cand_counts = ngram_counts(lowered_words(cand), ngram);
    std::size_t hit = 0;
    for (const auto& [g, c] : ref_counts) {
      if (auto it = cand_counts.find(g); it != cand_counts.end()) hit += std::min(c, it->second);
    }
    sum += static_cast<double>(hit) / static_cast<double>(ref_total);
  }
  return sum / static_cast<double>(candidates.size());
}

double samia_zlib(double samia_value, std::string_view reference) {
  if (reference.empty()) throw DegenerateDataError("samia_zlib: empty reference suffix");
  const double raw_bits = 8.0 * static_cast<double>(reference.size());
  const double zlib_bits = 8.0 * static_cast<double>(zlib_compressed_size(reference));
  return samia_value * raw_bits / zlib_bits;
}

std::string augment_words(std::string_view text, double alpha, std::span<const std::string> vocabulary,
                          Rng& rng) {
  if (vocabulary.empty()) throw ConfigError("augmentation vocabulary is empty");
  auto words = text::split_whitespace(text);
  std::vector<std::string> out(words.begin(), words.end());
  const auto n_replace = std::min<std::size_t>(
      out.size(), static_cast<std::size_t>(std::lround(alpha * static_cast<double>(out.size()))));
  std::vector<std::size_t> positions(out.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_replace; ++i) {
    std::size_t j = std::uniform_int_distribution<std::size_t>(i, out.size() - 1)(rng);
    std::swap(positions[i], positions[j]);
    out[positions[i]] = vocabulary[std::uniform_int_distribution<std::size_t>(0, vocabulary.size() - 1)(rng)];
  }
  return text::join(out);
}

std::string shot_prefix(std::span<const std::string> shots) { return text::join(shots, "\n"); }

}  // namespace attacks

namespace {

constexpr std::uint64_t kStreamRecallPrefix = 0x5245;
constexpr std::uint64_t kStreamConRecall = 1ULL << 40;
constexpr std::uint64_t kStreamPac = 2ULL << 40;
constexpr std::uint64_t kStreamNeighbors = 3ULL << 40;
constexpr std::uint64_t kStreamSamia = 4ULL << 40;

std::vector<std::string> draw_shots(const std::vector<std::string>& pool, std::size_t n, Rng& rng,
                                    std::string_view exclude = {}) {
  std::vector<std::string> candidates;
  for (const auto& s : pool) {
    if (s != exclude) candidates.push_back(s);
  }
  if (candidates.empty()) throw ConfigError("shot pool is empty");
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min(n, candidates.size()));
  return candidates;
}

Provider& need(Provider* p, AttackId id, const char* role) {
  if (!p) throw ConfigError(std::string(to_string(id)) + " requires a " + role + " provider");
  return *p;
}

}  // namespace

std::string fixed_recall_prefix(const AttackContext& ctx, std::size_t n_shots) {
  Rng rng = make_rng(ctx.seed, kStreamRecallPrefix);
  return attacks::shot_prefix(draw_shots(ctx.nonmember_shots, n_shots, rng));
}

std::vector<AttackScore> score_sequence(const std::vector<AttackConfig>& configs, std::string_view doc_id,
                                        std::size_t seq_index, std::string_view text,
                                        std::size_t target_index, const AttackContext& ctx) {
  Provider& target = need(ctx.target, AttackId::loss, "target");
  std::optional<ScoredSequence> base;
  auto base_score = [&]() -> const ScoredSequence& {
    if (!base) base = target.score(text);
    return *base;
  };
  std::optional<std::pair<double, std::string>> samia_cache;  // (value, reference)
  std::map<std::size_t, std::string> recall_prefixes;

  std::vector<AttackScore> out;
  out.reserve(configs.size());
  for (const auto& cfg : configs) {
    AttackScore score{cfg.id, std::string(doc_id), seq_index, 0.0, {}};
    switch (cfg.id) {
      case AttackId::loss:
        score.value = attacks::loss(base_score());
        break;
      case AttackId::zlib:
        score.value = attacks::zlib(base_score());
        break;
      case AttackId::lower:
        score.value = attacks::lower(base_score(), target.score(text::lowercase(text)));
        break;
      case AttackId::ratio:
        score.value = attacks::ratio(base_score(), need(ctx.reference, cfg.id, "reference").score(text));
        break;
      case AttackId::neighborhood: {
        FillMaskRequest req{std::string(text), cfg.n_neighbors, cfg.swap_fraction, cfg.neighbor_top_k,
                            derive_seed(ctx.seed, kStreamNeighbors + target_index)};
        std::vector<ScoredSequence> scored;
        for (const auto& n : need(ctx.mask, cfg.id, "fill-mask").fill_mask(req)) scored.push_back(target.score(n));
        score.value = attacks::neighborhood(base_score(), scored);
        break;
      }
      case AttackId::mink:
        score.value = attacks::mink(base_score(), cfg.k_percent);
        break;
      case AttackId::minkpp:
        score.value = attacks::minkpp(base_score(), cfg.k_percent);
        break;
      case AttackId::recall: {
        auto [it, inserted] = recall_prefixes.try_emplace(cfg.n_shots);
        if (inserted) it->second = fixed_recall_prefix(ctx, cfg.n_shots);
        score.value = attacks::recall(base_score(), target.score(text, it->second));
        break;
      }
      case AttackId::con_recall: {
        Rng rng = make_rng(ctx.seed, kStreamConRecall + target_index);
        auto nm = attacks::shot_prefix(draw_shots(ctx.nonmember_shots, cfg.n_shots, rng));
        auto m = attacks::shot_prefix(draw_shots(ctx.member_shots, cfg.n_shots, rng, text));
        score.value = attacks::con_recall(base_score(), target.score(text, nm), target.score(text, m));
        break;
      }
      case AttackId::pac: {
        Rng rng = make_rng(ctx.seed, kStreamPac + target_index);
        std::vector<std::string> own_words;
        std::span<const std::string> vocab = ctx.vocabulary;
        if (vocab.empty()) {
          for (auto w : text::split_whitespace(text)) own_words.emplace_back(w);
          vocab = own_words;
        }
        std::vector<ScoredSequence> augs;
        for (std::size_t i = 0; i < cfg.n_augmentations; ++i) {
          augs.push_back(target.score(attacks::augment_words(text, cfg.aug_alpha, vocab, rng)));
        }
        score.value = attacks::pac(base_score(), augs, cfg.k_max, cfg.k_min);
        break;
      }
      case AttackId::surp: {
        auto v = attacks::surp(base_score(), cfg.surp_k, cfg.entropy_threshold);
        score.value = v.value;
        if (v.fell_back) score.flags.emplace_back("surp_fallback_mink");
        break;
      }
      case AttackId::samia:
      case AttackId::samia_zlib: {
        if (!samia_cache) {
          auto [prompt, reference] = attacks::split_prefix(text, cfg.prefix_fraction);
          if (reference.empty()) throw DegenerateDataError("samia: empty reference suffix");
          Provider& gen = ctx.generator ? *ctx.generator : target;
          GenerateRequest req{prompt, cfg.n_candidates, cfg.gen_top_k, cfg.gen_temperature, cfg.gen_max_tokens,
                              derive_seed(ctx.seed, kStreamSamia + target_index)};
          auto candidates = gen.generate(req);
          samia_cache.emplace(attacks::samia(candidates, reference, cfg.samia_ngram), reference);
        }
        score.value = cfg.id == AttackId::samia ? samia_cache->first
                                                : attacks::samia_zlib(samia_cache->first, samia_cache->second);
        break;
      }
    }
    score.value = checked(score.value, cfg.id);
    out.push_back(std::move(score));
  }
  return out;
}

}  // namespace mia
