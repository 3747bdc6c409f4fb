#include "mia/doclevel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mia/errors.hpp"
#include "mia/rng.hpp"
#include "mia/stats.hpp"
#include "mia/text.hpp"

namespace mia::doclevel {
namespace {

struct Counts {
  std::size_t members = 0;
  std::size_t nonmembers = 0;
};

Counts count_classes(std::span<const Label> labels) {
  Counts c;
  for (auto l : labels) {
    if (l == Label::member) ++c.members;
    else if (l == Label::non_member) ++c.nonmembers;
    else throw ConfigError("document-level labels must be member or non-member");
  }
  return c;
}

}  // namespace

ThresholdFit fit_threshold(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
  auto c = count_classes(labels);
  if (c.members == 0 || c.nonmembers == 0) throw DegenerateDataError("fit_threshold needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Balanced accuracy is (tp/M + tn/N)/2; compare tp*N + tn*M as integers.
  const std::uint64_t m = c.members, nn = c.nonmembers;
  std::uint64_t tp = m, tn = 0;  // tau = smallest score: everything predicted member
  double best_tau = scores[order.front()];
  std::uint64_t best_key = tp * nn + tn * m;

  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == Label::member) --tp; else ++tn;
      ++j;
    }
    double tau = j < order.size() ? 0.5 * (scores[order[i]] + scores[order[j]])
                                  : std::numeric_limits<double>::infinity();
    std::uint64_t key = tp * nn + tn * m;
    if (key > best_key) {
      best_key = key;
      best_tau = tau;
    }
    i = j;
  }
  return ThresholdFit{best_tau, static_cast<double>(best_key) / (2.0 * static_cast<double>(m * nn))};
}

double balanced_accuracy(std::span<const double> scores, std::span<const Label> labels, double tau) {
  auto c = count_classes(labels);
  if (c.members == 0 || c.nonmembers == 0) throw DegenerateDataError("balanced accuracy needs both classes");
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool predicted = scores[i] >= tau;
    if (labels[i] == Label::member && predicted) ++tp;
    if (labels[i] == Label::non_member && !predicted) ++tn;
  }
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(c.members) +
                static_cast<double>(tn) / static_cast<double>(c.nonmembers));
}

double threshold_vote(std::span<const double> seq_scores, double tau) {
  if (seq_scores.empty()) throw DegenerateDataError("threshold_vote: document has no sequence scores");
  std::size_t above = 0;
  for (double s : seq_scores) above += s >= tau;
  return static_cast<double>(above) / static_cast<double>(seq_scores.size());
}

Normalization parse_normalization(std::string_view s) {
  if (s == "RatioNormTF" || s == "ratio") return Normalization::ratio_norm_tf;
  if (s == "MaxNormTF" || s == "max") return Normalization::max_norm_tf;
  throw ConfigError("unknown normalization: " + std::string(s));
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "AggFE" || s == "agg") return Aggregation::agg_fe;
  if (s == "HistFE" || s == "hist") return Aggregation::hist_fe;
  throw ConfigError("unknown aggregation: " + std::string(s));
}

std::string_view to_string(Normalization n) { return n == Normalization::ratio_norm_tf ? "RatioNormTF" : "MaxNormTF"; }
std::string_view to_string(Aggregation a) { return a == Aggregation::agg_fe ? "AggFE" : "HistFE"; }

void DocFeatureConfig::validate() const {
  if (chunk_tokens == 0) throw ConfigError("chunk_tokens must be > 0");
  if (hist_bins < 2) throw ConfigError("hist_bins must be >= 2");
  if (!(hist_range.first < hist_range.second)) throw ConfigError("hist_range must be increasing");
}

TokenFrequency::TokenFrequency(std::unordered_map<std::int64_t, std::size_t> counts, std::size_t vocab_size)
    : counts_(std::move(counts)) {
  std::size_t total = 0, top = 0;
  for (const auto& [id, c] : counts_) {
    total += c;
    top = std::max(top, c);
  }
  if (vocab_size < counts_.size()) throw ConfigError("vocab_size smaller than the number of observed tokens");
  log_denominator_ = std::log(static_cast<double>(total + vocab_size));
  max_log_freq_ = std::log(static_cast<double>(top + 1)) - log_denominator_;
}

TokenFrequency TokenFrequency::from_sequences(std::span<const ScoredSequence> reference, std::size_t vocab_size) {
  std::unordered_map<std::int64_t, std::size_t> counts;
  for (const auto& s : reference) {
    for (const auto& t : s.tokens) counts[t.token_id]++;
  }
  return TokenFrequency(std::move(counts), std::max(vocab_size, counts.size()));
}

double TokenFrequency::log_freq(std::int64_t token_id) const {
  auto it = counts_.find(token_id);
  std::size_t c = it == counts_.end() ? 0 : it->second;
  return std::log(static_cast<double>(c + 1)) - log_denominator_;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DegenerateDataError("percentile of an empty sample");
  double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::vector<double> doc_features(std::span<const ScoredSequence> chunks, const DocFeatureConfig& config,
                                 const TokenFrequency& freq) {
  config.validate();
  if (chunks.empty()) throw DegenerateDataError("doc_features: no chunks");
  std::vector<double> v;
  for (const auto& chunk : chunks) {
    for (const auto& t : chunk.tokens) {
      double norm = config.normalization == Normalization::ratio_norm_tf ? freq.log_freq(t.token_id)
                                                                         : freq.max_log_freq();
      v.push_back(t.logprob - norm);
    }
  }
  if (v.empty()) throw DegenerateDataError("doc_features: chunks carry no tokens");

  if (config.aggregation == Aggregation::hist_fe) {
    std::vector<double> hist(config.hist_bins, 0.0);
    const auto [lo, hi] = config.hist_range;
    const double width = (hi - lo) / static_cast<double>(config.hist_bins);
    for (double x : v) {
      double clamped = std::clamp(x, lo, hi);
      auto bin = static_cast<std::size_t>(std::floor((clamped - lo) / width));
      hist[std::min(bin, config.hist_bins - 1)] += 1.0;
    }
    for (auto& h : hist) h /= static_cast<double>(v.size());
    return hist;
  }

  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  auto ms = stats::mean_std(v);
  return {sorted.front(),          sorted.back(),           ms.mean,
          ms.std,                  percentile(sorted, 50),  percentile(sorted, 5),
          percentile(sorted, 25),  percentile(sorted, 75),  percentile(sorted, 95)};
}

std::vector<std::string> chunk_words(std::string_view text, std::size_t chunk_words) {
  if (chunk_words == 0) throw ConfigError("chunk size must be > 0");
  auto words = text::split_whitespace(text);
  std::vector<std::string> out;
  std::span<const std::string_view> all(words);
  for (std::size_t i = 0; i < words.size(); i += chunk_words) {
    out.push_back(text::join(all.subspan(i, std::min(chunk_words, words.size() - i))));
  }
  return out;
}

std::vector<double> meta_classify(const forest::FeatureMatrix& train, std::span<const Label> train_labels,
                                  const forest::FeatureMatrix& eval, std::uint64_t seed,
                                  const forest::ForestParams& params) {
  auto model = forest::RandomForest::train(train, train_labels, params, seed);
  return model.predict(eval);
}

std::vector<DocSplit> make_doc_splits(std::span<const Label> labels, const Protocol& protocol, std::uint64_t seed) {
  if (protocol.n_splits == 0 || protocol.train_docs < 2 || protocol.eval_docs < 2) {
    throw ConfigError("protocol needs n_splits >= 1 and at least 2 train and 2 eval documents");
  }
  std::vector<std::size_t> members, nonmembers;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::member) members.push_back(i);
    else if (labels[i] == Label::non_member) nonmembers.push_back(i);
  }
  const std::size_t train_per_class = protocol.train_docs / 2;
  const std::size_t eval_per_class = protocol.eval_docs / 2;
  const std::size_t required = train_per_class + eval_per_class;
  if (members.size() < required || nonmembers.size() < required) {
    throw DegenerateDataError("document-level protocol needs " + std::to_string(required) +
                              " documents per class; have " + std::to_string(members.size()) + " members and " +
                              std::to_string(nonmembers.size()) + " non-members");
  }
  std::vector<DocSplit> splits;
  for (std::size_t s = 0; s < protocol.n_splits; ++s) {
    Rng rng = make_rng(seed, s);
    auto m = members;
    auto n = nonmembers;
    std::shuffle(m.begin(), m.end(), rng);
    std::shuffle(n.begin(), n.end(), rng);
    DocSplit split;
    for (std::size_t i = 0; i < required; ++i) {
      auto& side = i < train_per_class ? split.train : split.eval;
      side.push_back(m[i]);
      side.push_back(n[i]);
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

DocLevelReport evaluate_threshold_vote(std::span<const DocSequences> docs, const Protocol& protocol,
                                       std::uint64_t seed) {
  std::vector<Label> labels;
  for (const auto& d : docs) labels.push_back(d.label);
  DocLevelReport report;
  report.method = "threshold_vote";
  report.protocol = protocol;
  for (const auto& split : make_doc_splits(labels, protocol, seed)) {
    std::vector<double> seq_scores;
    std::vector<Label> seq_labels;
    for (auto i : split.train) {
      for (double s : docs[i].seq_scores) {
        seq_scores.push_back(s);
        seq_labels.push_back(docs[i].label);
      }
    }
    double tau = fit_threshold(seq_scores, seq_labels).tau;
    std::vector<double> doc_scores;
    std::vector<Label> doc_labels;
    for (auto i : split.eval) {
      doc_scores.push_back(threshold_vote(docs[i].seq_scores, tau));
      doc_labels.push_back(docs[i].label);
    }
    report.taus.push_back(tau);
    report.split_aucs.push_back(stats::auc(doc_scores, doc_labels));
  }
  auto ms = stats::mean_std(report.split_aucs);
  report.auc_mean = ms.mean;
  report.auc_std = ms.std;
  return report;
}

DocLevelReport evaluate_meta_classifier(const forest::FeatureMatrix& features, std::span<const Label> labels,
                                        const Protocol& protocol, std::uint64_t seed,
                                        const forest::ForestParams& params) {
  if (features.rows() != labels.size()) throw ConfigError("feature rows and labels differ in length");
  DocLevelReport report;
  report.method = "meta_classifier";
  report.protocol = protocol;
  std::size_t split_index = 0;
  for (const auto& split : make_doc_splits(labels, protocol, seed)) {
    forest::FeatureMatrix train, eval;
    std::vector<Label> train_labels, eval_labels;
    for (auto i : split.train) {
      train.append_row(features.row(i));
      train_labels.push_back(labels[i]);
    }
    for (auto i : split.eval) {
      eval.append_row(features.row(i));
      eval_labels.push_back(labels[i]);
    }
    auto probs = meta_classify(train, train_labels, eval, derive_seed(seed, 0x4d455441ULL + split_index++), params);
    report.split_aucs.push_back(stats::auc(probs, eval_labels));
  }
  auto ms = stats::mean_std(report.split_aucs);
  report.auc_mean = ms.mean;
  report.auc_std = ms.std;
  return report;
}

nlohmann::json to_json(const DocLevelReport& r) {
  nlohmann::json j{{"method", r.method},
                   {"name", r.name},
                   {"dataset", r.dataset},
                   {"protocol",
                    {{"train_docs", r.protocol.train_docs},
                     {"eval_docs", r.protocol.eval_docs},
                     {"n_splits", r.protocol.n_splits}}},
                   {"split_aucs", r.split_aucs},
                   {"auc_mean", r.auc_mean},
                   {"auc_std", r.auc_std}};
  if (!r.taus.empty()) j["taus"] = r.taus;
  return j;
}

DocLevelReport doclevel_report_from_json(const nlohmann::json& j) {
  DocLevelReport r;
  r.method = j.at("method").get<std::string>();
  r.name = j.value("name", std::string{});
  r.dataset = j.value("dataset", std::string{});
  const auto& p = j.at("protocol");
  r.protocol = {p.at("train_docs").get<std::size_t>(), p.at("eval_docs").get<std::size_t>(),
                p.at("n_splits").get<std::size_t>()};
  r.split_aucs = j.at("split_aucs").get<std::vector<double>>();
  r.auc_mean = j.at("auc_mean").get<double>();
  r.auc_std = j.at("auc_std").get<double>();
  r.taus = j.value("taus", std::vector<double>{});
  return r;
}

}  // namespace mia::doclevel
