#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mia/bow.hpp"
#include "mia/doclevel.hpp"
#include "mia/stats.hpp"

namespace mia {

inline constexpr int kReportVersion = 1;

struct Provenance {
  std::string config_hash;
  std::string dataset_hash;
  int protocol_version = 1;
  std::map<std::string, std::string> model_ids;  // role -> model id
  std::uint64_t seed = 0;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
};

struct DedupSummary {
  std::string preset;
  std::size_t kept = 0;
  std::size_t removed = 0;
};

/// Results of one benchmark run. The bag-of-words baseline is a constructor
/// argument and cannot be removed, so no serialized report lacks it.
class BenchmarkReport {
 public:
  BenchmarkReport(std::string dataset, bow::AuditResult bow_baseline);

  const std::string& dataset() const { return dataset_; }
  const bow::AuditResult& bow_baseline() const { return bow_baseline_; }

  std::vector<stats::EvalReport> attacks;
  std::vector<doclevel::DocLevelReport> doclevel;
  std::optional<DedupSummary> dedup;
  Provenance provenance;

 private:
  std::string dataset_;
  bow::AuditResult bow_baseline_;
};

nlohmann::json to_json(const BenchmarkReport& r);
/// Throws ConfigError when the document has no bow_baseline.
BenchmarkReport report_from_json(const nlohmann::json& j);
BenchmarkReport load_report(const std::filesystem::path& path);

struct AttackDelta {
  std::string attack;
  double auc_a = 0.0;
  double auc_b = 0.0;
  double delta = 0.0;         // b - a (auc_mean)
  double combined_std = 0.0;  // sqrt(std_a^2 + std_b^2)
  bool notable = false;       // |delta| > 2 combined_std
  bool missing = false;       // attack reported by only one side
};

struct ReportDiff {
  std::vector<AttackDelta> deltas;  // only attacks whose AUC differs
  bool empty() const { return deltas.empty(); }
};

/// Per-attack AUC differences, bag-of-words baseline included as "bow".
/// Throws ConfigError when the dataset hashes differ.
ReportDiff compare_reports(const BenchmarkReport& a, const BenchmarkReport& b);
nlohmann::json to_json(const ReportDiff& d);

inline constexpr const char* kBowRowName = "Bag of words (model-less)";

/// Attacks x datasets table; the bag-of-words row comes first.
std::string render_report_table(const std::vector<BenchmarkReport>& reports);

/// Every report.json directly under `dir` or one level below, sorted by path.
std::vector<BenchmarkReport> load_reports(const std::filesystem::path& dir);

}  // namespace mia
