#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mia/attacks.hpp"
#include "mia/bow.hpp"
#include "mia/corpus.hpp"
#include "mia/doclevel.hpp"
#include "mia/overlap.hpp"
#include "mia/provider.hpp"

namespace mia {

struct DatasetConfig {
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::jsonl;
  std::string name;
  std::size_t max_docs_per_class = 0;  // 0 = all
};

struct SequenceConfig {
  std::size_t n_seq = 1;
  std::size_t words_per_seq = 0;  // 0 = whole document is one sequence
};

struct ProvidersConfig {
  std::optional<ProviderHandle> target;
  std::optional<ProviderHandle> reference;
  std::optional<ProviderHandle> mask;
  std::optional<ProviderHandle> generator;
};

struct ShotsConfig {
  std::optional<std::filesystem::path> nonmember_path;
  std::optional<std::filesystem::path> member_path;  // default: the dataset's member sequences
};

struct EvaluationConfig {
  std::size_t n_bootstrap = 1000;
  std::vector<double> fpr_levels{0.01, 0.05};
};

struct DedupConfig {
  overlap::DedupPreset preset;
};

struct DoclevelConfig {
  bool threshold_vote = true;
  doclevel::Protocol protocol;
  std::vector<doclevel::DocFeatureConfig> features;
  std::optional<std::filesystem::path> token_freq_path;  // reference corpus; default: the dataset
  std::size_t token_vocab_size = 50000;
};

/// Declarative benchmark run, read from a JSON document:
///
///   {"seed": 1, "dataset": {"path": "...", "format": "jsonl", "name": "..."},
///    "sequences": {"n_seq": 25, "words_per_seq": 200},
///    "providers": {"target": {"kind": "http", "endpoint": "...", "model": "..."}, ...},
///    "attacks": ["loss", {"id": "mink", "k_percent": 20}],
///    "shots": {"nonmember_path": "..."}, "evaluation": {...}, "bow": {...},
///    "dedup": {"preset": "13_0.8"}, "doclevel": {...}, "output_dir": "..."}
///
/// Relative paths resolve against the config file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  SequenceConfig sequences;
  ProvidersConfig providers;
  std::vector<AttackConfig> attacks;
  ShotsConfig shots;
  EvaluationConfig evaluation;
  bow::AuditOptions bow;
  std::optional<DedupConfig> dedup;
  std::optional<DoclevelConfig> doclevel;
  std::filesystem::path output_dir;

  /// Checks that every attack's providers and pools are declared. Throws ConfigError.
  void validate() const;

  /// Normalized JSON with every default filled in (output_dir excluded).
  nlohmann::json semantic_json() const;
  /// SHA-256 of semantic_json().
  std::string hash() const;
};

/// Parses a config document. `base_dir` anchors relative paths. The
/// MIA_CACHE_DIR environment variable, when set, becomes every provider's cache_dir.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

ProviderHandle parse_provider_handle(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const ProviderHandle& h);

AttackConfig parse_attack_config(const nlohmann::json& j);
nlohmann::json to_json(const AttackConfig& c);

}  // namespace mia
