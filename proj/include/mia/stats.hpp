#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mia/corpus.hpp"

namespace mia::stats {

/// Rank AUC (Mann-Whitney): fraction of (member, non-member) pairs where the
/// member scores higher, ties counting one half. Labels must be member or non-member.
double auc(std::span<const double> scores, std::span<const Label> labels);

struct OperatingPoint {
  double fpr_level = 0.0;
  double tpr = 0.0;

  bool operator==(const OperatingPoint&) const = default;
};

/// For each level a: the highest TPR reachable by a threshold rule
/// (score >= t) whose empirical FPR is <= a. No interpolation between
/// realizable operating points.
std::vector<OperatingPoint> tpr_at_fpr(std::span<const double> scores, std::span<const Label> labels,
                                       std::span<const double> fpr_levels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

struct EvalReport {
  std::string attack_id;
  std::string dataset;
  double auc = 0.0;  // point estimate on the full sample
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::vector<OperatingPoint> tpr_at_fpr;
  std::size_t n_bootstrap = 1000;
  std::uint64_t seed = 0;
  std::size_t n_members = 0;
  std::size_t n_nonmembers = 0;
};

/// Stratified bootstrap: members and non-members are resampled independently
/// with replacement at their original sizes, n_bootstrap times. Iteration i
/// draws from its own stream derived from (seed, i), so the result does not
/// depend on how iterations are scheduled across threads.
EvalReport bootstrap_eval(std::span<const double> scores, std::span<const Label> labels,
                          std::size_t n_bootstrap, std::uint64_t seed,
                          std::span<const double> fpr_levels = {});

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

struct TableCell {
  std::string row;     // attack
  std::string column;  // dataset
  double mean = 0.0;
  double std = 0.0;
};

/// Aligned text table, rows x columns in first-appearance order; cells read "0.522 ± .003".
std::string render_table(const std::vector<TableCell>& cells, const std::string& corner = "MIA");

/// "0.522 ± .003"
std::string format_mean_std(double mean, double std);

}  // namespace mia::stats
