#include "mia/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "mia/errors.hpp"
#include "mia/rng.hpp"

namespace mia::stats {
namespace {

struct ClassCounts {
  std::size_t members = 0;
  std::size_t nonmembers = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::member) {
      ++c.members;
    } else if (labels[i] == Label::non_member) {
      ++c.nonmembers;
    } else {
      throw ConfigError("evaluation labels must be member or non-member");
    }
    if (std::isnan(scores[i])) throw DegenerateDataError("NaN score");
  }
  if (c.members == 0 || c.nonmembers == 0) throw DegenerateDataError("evaluation needs both classes");
  return c;
}

double auc_unchecked(std::span<const double> scores, std::span<const Label> labels, std::size_t n_members,
                     std::size_t n_nonmembers, std::vector<std::size_t>& order) {
  order.resize(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // 2U accumulated as an integer: each member earns 2 per non-member strictly
  // below it and 1 per tied non-member.
  std::uint64_t two_u = 0;
  std::uint64_t nm_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t m_group = 0, nm_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == Label::member ? m_group : nm_group)++;
      ++j;
    }
    two_u += m_group * (2 * nm_below + nm_group);
    nm_below += nm_group;
    i = j;
  }
  return static_cast<double>(two_u) / (2.0 * static_cast<double>(n_members) * static_cast<double>(n_nonmembers));
}

}  // namespace

double auc(std::span<const double> scores, std::span<const Label> labels) {
  auto c = check_inputs(scores, labels);
  std::vector<std::size_t> order;
  return auc_unchecked(scores, labels, c.members, c.nonmembers, order);
}

std::vector<OperatingPoint> tpr_at_fpr(std::span<const double> scores, std::span<const Label> labels,
                                       std::span<const double> fpr_levels) {
  auto c = check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // ROC vertices for thresholds +inf, then each distinct score in decreasing order.
  std::vector<std::pair<double, double>> roc{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == Label::member ? tp : fp)++;
      ++j;
    }
    roc.emplace_back(static_cast<double>(fp) / static_cast<double>(c.nonmembers),
                     static_cast<double>(tp) / static_cast<double>(c.members));
    i = j;
  }

  std::vector<OperatingPoint> out;
  for (double level : fpr_levels) {
    double best = 0.0;
    for (const auto& [fpr, tpr] : roc) {
      if (fpr <= level) best = std::max(best, tpr);
    }
    out.push_back({level, best});
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

EvalReport bootstrap_eval(std::span<const double> scores, std::span<const Label> labels,
                          std::size_t n_bootstrap, std::uint64_t seed, std::span<const double> fpr_levels) {
  auto c = check_inputs(scores, labels);
  if (n_bootstrap == 0) throw ConfigError("n_bootstrap must be >= 1");
  std::vector<double> member_scores, nonmember_scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] == Label::member ? member_scores : nonmember_scores).push_back(scores[i]);
  }

  std::vector<double> aucs(n_bootstrap);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::vector<double> s(scores.size());
    std::vector<Label> l(scores.size());
    std::vector<std::size_t> order;
    std::fill(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(c.members), Label::member);
    std::fill(l.begin() + static_cast<std::ptrdiff_t>(c.members), l.end(), Label::non_member);
    for (std::size_t it = begin; it < end; ++it) {
      Rng rng = make_rng(seed, it);
      std::uniform_int_distribution<std::size_t> pick_m(0, c.members - 1), pick_n(0, c.nonmembers - 1);
      for (std::size_t k = 0; k < c.members; ++k) s[k] = member_scores[pick_m(rng)];
      for (std::size_t k = 0; k < c.nonmembers; ++k) s[c.members + k] = nonmember_scores[pick_n(rng)];
      aucs[it] = auc_unchecked(s, l, c.members, c.nonmembers, order);
    }
  };

  std::size_t n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  n_threads = std::min(n_threads, n_bootstrap);
  if (n_threads <= 1) {
    run_range(0, n_bootstrap);
  } else {
    std::vector<std::jthread> pool;
    std::size_t chunk = (n_bootstrap + n_threads - 1) / n_threads;
    for (std::size_t b = 0; b < n_bootstrap; b += chunk) pool.emplace_back(run_range, b, std::min(n_bootstrap, b + chunk));
  }

  EvalReport r;
  r.auc = auc(scores, labels);
  auto ms = mean_std(aucs);
  r.auc_mean = ms.mean;
  r.auc_std = ms.std;
  r.tpr_at_fpr = tpr_at_fpr(scores, labels, fpr_levels);
  r.n_bootstrap = n_bootstrap;
  r.seed = seed;
  r.n_members = c.members;
  r.n_nonmembers = c.nonmembers;
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json tpr = nlohmann::json::array();
  for (const auto& p : r.tpr_at_fpr) tpr.push_back({{"fpr", p.fpr_level}, {"tpr", p.tpr}});
  return {{"attack", r.attack_id},     {"dataset", r.dataset},         {"auc", r.auc},
          {"auc_mean", r.auc_mean},    {"auc_std", r.auc_std},         {"tpr_at_fpr", tpr},
          {"n_bootstrap", r.n_bootstrap}, {"seed", r.seed},            {"n_members", r.n_members},
          {"n_nonmembers", r.n_nonmembers}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.attack_id = j.at("attack").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.auc = j.value("auc", 0.0);
  r.auc_mean = j.at("auc_mean").get<double>();
  r.auc_std = j.at("auc_std").get<double>();
  for (const auto& p : j.value("tpr_at_fpr", nlohmann::json::array())) {
    r.tpr_at_fpr.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>()});
  }
  r.n_bootstrap = j.value("n_bootstrap", std::size_t{0});
  r.seed = j.value("seed", std::uint64_t{0});
  r.n_members = j.value("n_members", std::size_t{0});
  r.n_nonmembers = j.value("n_nonmembers", std::size_t{0});
  return r;
}

std::string format_mean_std(double mean, double std) {
  char m[32], s[32];
  std::snprintf(m, sizeof m, "%.3f", mean);
  std::snprintf(s, sizeof s, "%.3f", std);
  std::string sd = s;
  if (sd.rfind("0.", 0) == 0) sd.erase(0, 1);
  return std::string(m) + " ± " + sd;
}

std::string render_table(const std::vector<TableCell>& cells, const std::string& corner) {
  std::vector<std::string> rows, cols;
  auto index_of = [](std::vector<std::string>& v, const std::string& s) {
    auto it = std::find(v.begin(), v.end(), s);
    if (it != v.end()) return static_cast<std::size_t>(it - v.begin());
    v.push_back(s);
    return v.size() - 1;
  };
  for (const auto& c : cells) {
    index_of(rows, c.row);
    index_of(cols, c.column);
  }
  std::vector<std::vector<std::string>> grid(rows.size(), std::vector<std::string>(cols.size(), "-"));
  for (const auto& c : cells) grid[index_of(rows, c.row)][index_of(cols, c.column)] = format_mean_std(c.mean, c.std);

  // "±" is two bytes but one column wide.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(cols.size() + 1, width(corner));
  for (std::size_t r = 0; r < rows.size(); ++r) widths[0] = std::max(widths[0], width(rows[r]));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    widths[c + 1] = std::max(widths[c + 1], width(cols[c]));
    for (std::size_t r = 0; r < rows.size(); ++r) widths[c + 1] = std::max(widths[c + 1], width(grid[r][c]));
  }
  auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w - width(s), ' '); };

  std::string out = pad(corner, widths[0]);
  for (std::size_t c = 0; c < cols.size(); ++c) out += " | " + pad(cols[c], widths[c + 1]);
  out += "\n" + std::string(widths[0], '-');
  for (std::size_t c = 0; c < cols.size(); ++c) out += "-+-" + std::string(widths[c + 1], '-');
  out += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += pad(rows[r], widths[0]);
    for (std::size_t c = 0; c < cols.size(); ++c) out += " | " + pad(grid[r][c], widths[c + 1]);
    out += "\n";
  }
  return out;
}

}  // namespace mia::stats
