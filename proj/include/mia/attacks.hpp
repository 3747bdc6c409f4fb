#pragma once

// Sequence-level membership scores. Every attack is a pure function of
// provider outputs and is oriented so that a higher value means "more likely
// a member". Losses are L(s) = -mean(logprob) throughout.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mia/provider.hpp"
#include "mia/rng.hpp"

namespace mia {

enum class AttackId {
  loss,
  zlib,
  lower,
  ratio,
  neighborhood,
  mink,
  minkpp,
  recall,
  con_recall,
  pac,
  surp,
  samia,
  samia_zlib,
};

std::string_view to_string(AttackId id);
AttackId parse_attack_id(std::string_view s);
const std::vector<AttackId>& all_attacks();

/// Hyperparameters; defaults are the settings used for the published benchmark.
struct AttackConfig {
  AttackId id = AttackId::loss;
  double k_percent = 20.0;          // mink, minkpp
  std::string ref_model;            // ratio
  std::size_t n_neighbors = 50;     // neighborhood
  double swap_fraction = 0.7;
  std::size_t neighbor_top_k = 10;
  std::size_t n_shots = 10;         // recall, con_recall
  std::size_t n_augmentations = 10; // pac
  double aug_alpha = 0.3;
  double k_max = 0.05;
  double k_min = 0.3;
  double surp_k = 40.0;             // surp
  double entropy_threshold = 2.0;   // nats
  std::size_t n_candidates = 10;    // samia
  std::size_t gen_top_k = 50;
  double gen_temperature = 1.0;
  std::size_t gen_max_tokens = 1024;
  double prefix_fraction = 0.5;
  std::size_t samia_ngram = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct AttackScore {
  AttackId attack = AttackId::loss;
  std::string doc_id;
  std::size_t seq_index = 0;
  double value = 0.0;
  std::vector<std::string> flags;
};

namespace attacks {

/// Number of selected positions for a k-percent rule: max(1, floor(k/100 * T)).
std::size_t k_count(double k_percent, std::size_t n);

/// mean(logprob) = -L(s).
double loss(const ScoredSequence& s);

/// -L(s) / Z(s), Z = zlib-compressed byte length of the text.
double zlib(const ScoredSequence& s);

/// L(lowercase(s)) / L(s).
double lower(const ScoredSequence& s, const ScoredSequence& s_lower);

/// L_ref(s) - L_target(s).
double ratio(const ScoredSequence& target, const ScoredSequence& reference);

/// mean_i L(neighbor_i) - L(s).
double neighborhood(const ScoredSequence& s, std::span<const ScoredSequence> neighbors);

/// Mean of the k% lowest token logprobs. With k = 100 this is bitwise equal to loss().
double mink(const ScoredSequence& s, double k_percent);

/// Min-K% over standardized logprobs z = (logprob - dist_mean) / dist_std.
/// Positions with dist_std = 0 are skipped; all-zero std is an error.
double minkpp(const ScoredSequence& s, double k_percent);

/// L(s | P) / L(s).
double recall(const ScoredSequence& uncond, const ScoredSequence& cond);

/// [L(s | P_nonmember) - L(s | P_member)] / L(s).
double con_recall(const ScoredSequence& uncond, const ScoredSequence& cond_nonmember,
                  const ScoredSequence& cond_member);

/// Polarized distance: mean of the top ceil(k_max T) logprobs minus mean of the bottom ceil(k_min T).
double polarized_distance(const ScoredSequence& s, double k_max, double k_min);

/// -(d(s) - mean_i d(aug_i)) with d the polarized distance.
double pac(const ScoredSequence& s, std::span<const ScoredSequence> augmentations, double k_max,
           double k_min);

struct SurpValue {
  double value = 0.0;
  bool fell_back = false;  // no position under the entropy threshold; Min-K% over all tokens used
};

/// Mean of the surp_k% lowest logprobs among positions whose entropy is below the threshold.
SurpValue surp(const ScoredSequence& s, double surp_k, double entropy_threshold);

/// Splits text at floor(prefix_fraction * words): (prompt, reference suffix).
std::pair<std::string, std::string> split_prefix(std::string_view text, double prefix_fraction);

/// Mean over candidates of clipped n-gram recall against the reference (words lowercased).
double samia(std::span<const std::string> candidates, std::string_view reference, std::size_t ngram = 1);

/// samia_value scaled by the reference's compression ratio (raw bytes / zlib bytes).
double samia_zlib(double samia_value, std::string_view reference);

/// Copy of `text` with round(alpha * words) random positions replaced by
/// random words from `vocabulary`.
std::string augment_words(std::string_view text, double alpha, std::span<const std::string> vocabulary,
                          Rng& rng);

/// Joins shot texts with newlines to form a conditioning prefix.
std::string shot_prefix(std::span<const std::string> shots);

}  // namespace attacks

/// Models and auxiliary pools an attack may need beyond the target model.
struct AttackContext {
  Provider* target = nullptr;
  Provider* reference = nullptr;  // ratio
  Provider* mask = nullptr;       // neighborhood
  Provider* generator = nullptr;  // samia (defaults to target when null)
  std::vector<std::string> nonmember_shots;  // recall, con_recall
  std::vector<std::string> member_shots;     // con_recall
  std::vector<std::string> vocabulary;       // pac augmentations
  std::uint64_t seed = 0;
};

/// Target-independent fixed prefix for ReCaLL: n_shots non-member shots drawn once per seed.
std::string fixed_recall_prefix(const AttackContext& ctx, std::size_t n_shots);

/// Scores one sequence with every attack in `configs`, querying providers
/// through `ctx`. `target_index` keys per-target randomness (prefix draws,
/// augmentations) so results are reproducible for a given seed.
std::vector<AttackScore> score_sequence(const std::vector<AttackConfig>& configs, std::string_view doc_id,
                                        std::size_t seq_index, std::string_view text,
                                        std::size_t target_index, const AttackContext& ctx);

}  // namespace mia
