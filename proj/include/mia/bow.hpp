#pragma once

// Model-less bag-of-words baseline: a random forest over word counts that
// tries to tell members from non-members using the text alone. A high AUC
// means the two sets differ in distribution, independent of any model.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mia/corpus.hpp"
#include "mia/forest.hpp"

namespace mia::bow {

struct BowVocabulary {
  std::vector<std::string> words;     // lexicographic
  std::vector<double> doc_frequency;  // fraction of training documents containing the word

  std::size_t size() const { return words.size(); }
  /// Position of `word`, or -1.
  std::ptrdiff_t index_of(const std::string& word) const;

 private:
  friend BowVocabulary build_vocabulary(std::span<const Document>, double);
  std::unordered_map<std::string, std::size_t> index_;
};

/// Words (lexical_words) present in at least min_doc_fraction of `train_docs`.
BowVocabulary build_vocabulary(std::span<const Document> train_docs, double min_doc_fraction = 0.05);

/// Word counts aligned to the vocabulary; out-of-vocabulary words are ignored.
std::vector<std::uint32_t> featurize(std::string_view text, const BowVocabulary& vocab);
forest::FeatureMatrix featurize_all(std::span<const Document> docs, const BowVocabulary& vocab);

struct BowModel {
  BowVocabulary vocabulary;
  forest::RandomForest forest;
};

BowModel train(BowVocabulary vocabulary, const forest::FeatureMatrix& features, std::span<const Label> labels,
               std::uint64_t seed, const forest::ForestParams& params = {});

/// Forest member-probability for one count vector.
double predict(const BowModel& model, std::span<const std::uint32_t> counts);

struct AuditOptions {
  std::size_t n_runs = 5;
  double train_fraction = 0.8;
  double min_doc_fraction = 0.05;
  forest::ForestParams forest;
  std::size_t top_words = 20;
};

struct AuditResult {
  std::string dataset;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::size_t n_runs = 0;
  std::vector<std::pair<std::string, double>> top_words;  // from the final run
  std::vector<double> run_aucs;
};

/// Per run: balance classes, split, build the vocabulary on the training
/// side only, train the forest, and measure AUC on the held-out side.
AuditResult audit(std::span<const Document> docs, const AuditOptions& options, std::uint64_t seed,
                  std::string dataset_name = "");

nlohmann::json to_json(const AuditResult& r);
AuditResult audit_result_from_json(const nlohmann::json& j);

}  // namespace mia::bow
