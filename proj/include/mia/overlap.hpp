#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mia/bow.hpp"
#include "mia/corpus.hpp"

namespace mia::overlap {

/// 64-bit fingerprint of a word n-gram (words already lowercased).
std::uint64_t fingerprint(std::span<const std::string> words);

/// Set of word n-gram fingerprints over a member corpus. Words are the same
/// lexical words the bag-of-words auditor counts.
class NGramIndex {
 public:
  NGramIndex(std::size_t n, std::vector<std::uint64_t> fingerprints, std::size_t source_doc_count);

  std::size_t n() const { return n_; }
  std::size_t size() const { return grams_.size(); }
  std::size_t source_doc_count() const { return source_doc_count_; }
  const std::vector<std::uint64_t>& fingerprints() const { return grams_; }

  /// Fingerprint match; in exact mode the gram text must match as well.
  bool contains(std::uint64_t fp, std::span<const std::string> gram) const;

  /// Exact mode keeps the gram text behind each fingerprint.
  bool exact() const { return exact_.has_value(); }
  /// Distinct grams that shared a fingerprint with another gram (exact mode only).
  std::size_t collisions() const { return collisions_; }

  /// "MIAG" | u16 version | u16 n | u64 count | count x u64 sorted fingerprints, little endian.
  void save(const std::filesystem::path& path) const;
  static NGramIndex load(const std::filesystem::path& path);

 private:
  friend NGramIndex build_index(std::span<const Document>, std::size_t, bool);

  std::size_t n_;
  std::vector<std::uint64_t> grams_;  // sorted, unique
  std::size_t source_doc_count_;
  std::optional<std::unordered_map<std::uint64_t, std::string>> exact_;
  std::size_t collisions_ = 0;
};

/// Every word n-gram of every document; documents shorter than n words add nothing.
NGramIndex build_index(std::span<const Document> docs, std::size_t n, bool exact = false);

struct OverlapResult {
  double fraction = 0.0;   // distinct n-grams of the document found in the index
  bool too_short = false;  // fewer than n words; fraction reported as 0
  std::size_t n_grams = 0;
  std::size_t n_hits = 0;
};

OverlapResult overlap_fraction(std::string_view text, const NGramIndex& index);

struct DedupPreset {
  std::string name;
  std::size_t n = 0;
  double max_overlap = 0.0;
};

/// Built-ins "13_0.8" and "7_0.2"; any "<n>_<max>" string is also accepted.
DedupPreset parse_preset(std::string_view name);
const std::vector<DedupPreset>& builtin_presets();

struct DedupResult {
  std::vector<Document> kept;     // overlap <= max_overlap
  std::vector<Document> removed;  // overlap strictly above max_overlap
};

DedupResult dedup(std::span<const Document> nonmembers, const NGramIndex& index, const DedupPreset& preset);

struct ShiftStep {
  std::string preset;  // "none" for the undeduplicated baseline
  std::size_t kept = 0;
  std::size_t removed = 0;
  std::optional<bow::AuditResult> audit;
  std::string degenerate;  // reason when the audit could not run
};

/// Bag-of-words audit before deduplication and after each preset.
std::vector<ShiftStep> shift_after_dedup(std::span<const Document> members, std::span<const Document> nonmembers,
                                         std::span<const DedupPreset> presets, const bow::AuditOptions& options,
                                         std::uint64_t seed);

nlohmann::json to_json(const ShiftStep& s);

}  // namespace mia::overlap
