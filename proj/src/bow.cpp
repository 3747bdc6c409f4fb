#include "mia/bow.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "mia/errors.hpp"
#include "mia/rng.hpp"
#include "mia/stats.hpp"
#include "mia/text.hpp"

namespace mia::bow {

std::ptrdiff_t BowVocabulary::index_of(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

BowVocabulary build_vocabulary(std::span<const Document> train_docs, double min_doc_fraction) {
  if (train_docs.size() < 2) throw DegenerateDataError("vocabulary needs at least 2 training documents");
  std::map<std::string, std::size_t> presence;
  for (const auto& d : train_docs) {
    auto words = text::lexical_words(d.text);
    std::unordered_set<std::string> seen(words.begin(), words.end());
    for (auto& w : seen) presence[w]++;
  }
  const double n = static_cast<double>(train_docs.size());
  BowVocabulary vocab;
  for (const auto& [word, count] : presence) {
    double df = static_cast<double>(count) / n;
    if (static_cast<double>(count) >= min_doc_fraction * n - 1e-9) {
      vocab.index_.emplace(word, vocab.words.size());
      vocab.words.push_back(word);
      vocab.doc_frequency.push_back(df);
    }
  }
  if (vocab.words.empty()) {
    throw DegenerateDataError("no word appears in " + std::to_string(min_doc_fraction * 100.0) +
                              "% of training documents; lower the document-frequency threshold");
  }
  return vocab;
}

std::vector<std::uint32_t> featurize(std::string_view text, const BowVocabulary& vocab) {
  std::vector<std::uint32_t> counts(vocab.size(), 0);
  for (const auto& w : text::lexical_words(text)) {
    if (auto i = vocab.index_of(w); i >= 0) counts[static_cast<std::size_t>(i)]++;
  }
  return counts;
}

forest::FeatureMatrix featurize_all(std::span<const Document> docs, const BowVocabulary& vocab) {
  forest::FeatureMatrix x(docs.size(), vocab.size());
  for (std::size_t r = 0; r < docs.size(); ++r) {
    auto counts = featurize(docs[r].text, vocab);
    for (std::size_t c = 0; c < counts.size(); ++c) x.at(r, c) = counts[c];
  }
  return x;
}

BowModel train(BowVocabulary vocabulary, const forest::FeatureMatrix& features, std::span<const Label> labels,
               std::uint64_t seed, const forest::ForestParams& params) {
  if (features.cols() != vocabulary.size()) throw ConfigError("feature width does not match vocabulary");
  return BowModel{std::move(vocabulary), forest::RandomForest::train(features, labels, params, seed)};
}

double predict(const BowModel& model, std::span<const std::uint32_t> counts) {
  if (counts.size() != model.vocabulary.size()) {
    throw ConfigError("count vector has " + std::to_string(counts.size()) + " entries, vocabulary has " +
                      std::to_string(model.vocabulary.size()));
  }
  std::vector<double> row(counts.begin(), counts.end());
  return model.forest.predict(row);
}

AuditResult audit(std::span<const Document> docs, const AuditOptions& options, std::uint64_t seed,
                  std::string dataset_name) {
  if (options.n_runs == 0) throw ConfigError("audit: n_runs must be >= 1");
  std::vector<Document> all(docs.begin(), docs.end());
  auto splits = corpus::make_splits(all, options.train_fraction, options.n_runs, seed);
  std::unordered_map<std::string_view, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, &d);

  AuditResult result;
  result.dataset = std::move(dataset_name);
  result.n_runs = options.n_runs;
  for (const auto& split : splits) {
    auto gather = [&](const std::vector<std::string>& ids) {
      std::vector<Document> out;
      out.reserve(ids.size());
      for (const auto& id : ids) out.push_back(*by_id.at(id));
      return out;
    };
    auto train_docs = gather(split.train_ids);
    auto eval_docs = gather(split.eval_ids);
    auto labels_of = [](const std::vector<Document>& ds) {
      std::vector<Label> l;
      for (const auto& d : ds) l.push_back(d.label);
      return l;
    };

    auto vocab = build_vocabulary(train_docs, options.min_doc_fraction);
    auto x_train = featurize_all(train_docs, vocab);
    auto x_eval = featurize_all(eval_docs, vocab);
    auto train_labels = labels_of(train_docs);
    auto model = train(std::move(vocab), x_train, train_labels,
                       derive_seed(seed, 0x424f57ULL + split.run_index), options.forest);
    auto scores = model.forest.predict(x_eval);
    auto eval_labels = labels_of(eval_docs);
    result.run_aucs.push_back(stats::auc(scores, eval_labels));

    if (split.run_index + 1 == splits.size()) {
      const auto& imp = model.forest.feature_importance();
      std::vector<std::size_t> order(imp.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
      for (std::size_t i : order) {
        if (result.top_words.size() >= options.top_words || imp[i] <= 0.0) break;
        result.top_words.emplace_back(model.vocabulary.words[i], imp[i]);
      }
    }
  }
  auto ms = stats::mean_std(result.run_aucs);
  result.auc_mean = ms.mean;
  result.auc_std = ms.std;
  return result;
}

nlohmann::json to_json(const AuditResult& r) {
  nlohmann::json words = nlohmann::json::array();
  for (const auto& [w, v] : r.top_words) words.push_back({w, v});
  return {{"dataset", r.dataset}, {"auc_mean", r.auc_mean}, {"auc_std", r.auc_std},
          {"n_runs", r.n_runs},   {"top_words", words},     {"run_aucs", r.run_aucs}};
}

AuditResult audit_result_from_json(const nlohmann::json& j) {
  AuditResult r;
  r.dataset = j.at("dataset").get<std::string>();
  r.auc_mean = j.at("auc_mean").get<double>();
  r.auc_std = j.at("auc_std").get<double>();
  r.n_runs = j.at("n_runs").get<std::size_t>();
  for (const auto& p : j.at("top_words")) r.top_words.emplace_back(p.at(0).get<std::string>(), p.at(1).get<double>());
  r.run_aucs = j.value("run_aucs", std::vector<double>{});
  return r;
}

}  // namespace mia::bow
