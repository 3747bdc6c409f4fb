#pragma once

// Document-level membership: sequence scores aggregated by a fitted
// threshold vote, or token-level features fed to a meta-classifier.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mia/corpus.hpp"
#include "mia/forest.hpp"
#include "mia/provider.hpp"

namespace mia::doclevel {

struct ThresholdFit {
  double tau = 0.0;
  double balanced_accuracy = 0.0;
};

/// Picks tau maximizing balanced accuracy of (score >= tau). Candidates are
/// the smallest score (everything predicted member), midpoints between
/// adjacent distinct scores, and +inf; ties go to the smallest tau.
ThresholdFit fit_threshold(std::span<const double> scores, std::span<const Label> labels);

/// Balanced accuracy of (score >= tau).
double balanced_accuracy(std::span<const double> scores, std::span<const Label> labels, double tau);

/// Fraction of a document's sequence scores at or above tau.
double threshold_vote(std::span<const double> seq_scores, double tau);

enum class Normalization { ratio_norm_tf, max_norm_tf };
enum class Aggregation { agg_fe, hist_fe };

Normalization parse_normalization(std::string_view s);
Aggregation parse_aggregation(std::string_view s);
std::string_view to_string(Normalization n);
std::string_view to_string(Aggregation a);

struct DocFeatureConfig {
  Normalization normalization = Normalization::ratio_norm_tf;
  Aggregation aggregation = Aggregation::agg_fe;
  std::size_t chunk_tokens = 2048;
  std::size_t hist_bins = 50;
  std::pair<double, double> hist_range{-20.0, 0.0};

  void validate() const;
};

/// Add-one smoothed token frequencies from a reference corpus:
/// freq(t) = (count(t) + 1) / (N + V).
class TokenFrequency {
 public:
  TokenFrequency(std::unordered_map<std::int64_t, std::size_t> counts, std::size_t vocab_size);
  static TokenFrequency from_sequences(std::span<const ScoredSequence> reference, std::size_t vocab_size);

  double log_freq(std::int64_t token_id) const;
  /// log frequency of the corpus's most common token.
  double max_log_freq() const { return max_log_freq_; }

 private:
  std::unordered_map<std::int64_t, std::size_t> counts_;
  double log_denominator_ = 0.0;
  double max_log_freq_ = 0.0;
};

/// Linear-interpolation percentile of an ascending-sorted sample, q in [0, 100].
double percentile(std::span<const double> sorted, double q);

/// RatioNormTF: v = logprob - log freq(token); MaxNormTF: v = logprob - log freq_max.
/// AggFE: [min, max, mean, std, median, p5, p25, p75, p95] of v.
/// HistFE: relative frequencies over hist_bins equal-width bins on hist_range (values clamped).
std::vector<double> doc_features(std::span<const ScoredSequence> chunks, const DocFeatureConfig& config,
                                 const TokenFrequency& freq);

/// Consecutive chunks of at most chunk_words whitespace words.
std::vector<std::string> chunk_words(std::string_view text, std::size_t chunk_words);

/// Trains the shared random forest on document features; returns eval member-probabilities.
std::vector<double> meta_classify(const forest::FeatureMatrix& train, std::span<const Label> train_labels,
                                  const forest::FeatureMatrix& eval, std::uint64_t seed,
                                  const forest::ForestParams& params = {});

struct Protocol {
  std::size_t train_docs = 1600;
  std::size_t eval_docs = 400;
  std::size_t n_splits = 5;
};

struct DocSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Class-stratified splits over document positions: half of train_docs and of
/// eval_docs come from each class.
std::vector<DocSplit> make_doc_splits(std::span<const Label> labels, const Protocol& protocol, std::uint64_t seed);

struct DocSequences {
  std::string doc_id;
  Label label = Label::unlabeled;
  std::vector<double> seq_scores;
};

struct DocLevelReport {
  std::string method;  // "threshold_vote" or "meta_classifier"
  std::string name;    // attack id or feature configuration
  std::string dataset;
  Protocol protocol;
  std::vector<double> split_aucs;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::vector<double> taus;  // threshold_vote only
};

/// Per split: fit tau on all sequences of the training documents, vote on the
/// evaluation documents, and compute the document AUC.
DocLevelReport evaluate_threshold_vote(std::span<const DocSequences> docs, const Protocol& protocol,
                                       std::uint64_t seed);

/// Per split: train the meta-classifier on training-document features and
/// compute the AUC of its probabilities on the evaluation documents.
DocLevelReport evaluate_meta_classifier(const forest::FeatureMatrix& features, std::span<const Label> labels,
                                        const Protocol& protocol, std::uint64_t seed,
                                        const forest::ForestParams& params = {});

nlohmann::json to_json(const DocLevelReport& r);
DocLevelReport doclevel_report_from_json(const nlohmann::json& j);

}  // namespace mia::doclevel
