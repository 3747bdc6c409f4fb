#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mia {

class Provider;

enum class Label { member, non_member, unlabeled };

std::string_view to_string(Label label);
/// Accepts exactly "member", "non-member", "unlabeled".
Label parse_label(std::string_view s);

/// Calendar month; membership cutoffs work at month granularity.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  /// Parses "YYYY-MM"; a trailing "-DD" (or longer timestamp) is accepted and dropped.
  static YearMonth parse(std::string_view s);
  std::string str() const;
  YearMonth plus_months(int delta) const;
};

struct Document {
  std::string id;
  std::string text;
  Label label = Label::unlabeled;
  std::string source;
  std::optional<YearMonth> date;
};

struct SequenceSample {
  std::string doc_id;
  std::size_t index = 0;
  std::size_t start_word = 0;
  std::size_t end_word = 0;
  std::string text;
  Label label = Label::unlabeled;
};

struct CorpusSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> eval_ids;
  std::size_t run_index = 0;
};

enum class DatasetFormat { jsonl, text_dir };

DatasetFormat parse_dataset_format(std::string_view s);

namespace corpus {

/// JSONL: one {"id","text","label","source","date"} object per line (blank lines skipped).
/// text_dir: *.txt files next to a `labels.tsv` manifest with lines
/// `<file name>\t<label>[\t<source>[\t<YYYY-MM>]]`; the id is the file stem.
std::vector<Document> load_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Parses JSONL from a stream. `origin` names the input in error messages.
std::vector<Document> read_jsonl(std::istream& in, std::string_view origin = "<stream>");

void write_jsonl(std::ostream& out, const std::vector<Document>& docs);
std::string to_jsonl_line(const Document& doc);

/// Splits the first n_seq * words_per_seq whitespace words of `doc` into
/// n_seq consecutive, non-overlapping sequences.
std::vector<SequenceSample> extract_sequences(const Document& doc, std::size_t n_seq,
                                              std::size_t words_per_seq);

/// Drops the first and last `fraction` of the document's words. Word-fraction
/// semantics approximate page-based trimming of book bodies.
Document trim_edges(const Document& doc, double fraction);

/// Keeps only the first `max_words` words of the text.
Document truncate_words(const Document& doc, std::size_t max_words);

struct RddOptions {
  std::size_t min_words = 5000;
  std::size_t truncate_to = 5000;
};

/// Regression-discontinuity sample around a training cutoff: documents dated in
/// [cutoff - window, cutoff) become members, [cutoff, cutoff + window)
/// non-members, everything else is dropped. Survivors must have at least
/// min_words words and are truncated to truncate_to words.
std::vector<Document> rdd_sample(const std::vector<Document>& corpus, YearMonth cutoff,
                                 int window_months, const RddOptions& options = {});

/// Balanced train/eval splits. For every run the majority class is downsampled
/// (uniformly, seeded) to the minority size, then train_fraction of each class
/// goes to train.
std::vector<CorpusSplit> make_splits(const std::vector<Document>& docs, double train_fraction,
                                     std::size_t n_runs, std::uint64_t seed);

struct CanarySpec {
  std::size_t length_tokens = 0;
  std::size_t n_rep = 1;
  std::optional<std::pair<double, double>> perplexity_band;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::size_t top_k = 0;  // 0 = full distribution
  std::size_t max_attempts_per_canary = 50;
};

struct CanaryDataset {
  std::vector<std::string> injection_lines;  // member canaries, each repeated n_rep times
  std::vector<std::string> members;
  std::vector<std::string> non_members;
};

/// Samples n_members + n_nonmembers distinct canaries from `generator` with the
/// same configuration, then splits them into members and non-members. When a
/// perplexity band is set, candidates are scored by `generator` and resampled
/// until their perplexity lies inside [low, high).
CanaryDataset build_canary_dataset(const CanarySpec& spec, Provider& generator,
                                   std::size_t n_members, std::size_t n_nonmembers);

}  // namespace corpus
}  // namespace mia
