#include "mia/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mia/errors.hpp"

namespace mia {

using nlohmann::json;

BenchmarkReport::BenchmarkReport(std::string dataset, bow::AuditResult bow_baseline)
    : dataset_(std::move(dataset)), bow_baseline_(std::move(bow_baseline)) {}

json to_json(const BenchmarkReport& r) {
  json j;
  j["version"] = kReportVersion;
  j["dataset"] = r.dataset();
  j["bow_baseline"] = bow::to_json(r.bow_baseline());
  j["attacks"] = json::array();
  for (const auto& a : r.attacks) j["attacks"].push_back(stats::to_json(a));
  j["doclevel"] = json::array();
  for (const auto& d : r.doclevel) j["doclevel"].push_back(doclevel::to_json(d));
  if (r.dedup) j["dedup"] = {{"preset", r.dedup->preset}, {"kept", r.dedup->kept}, {"removed", r.dedup->removed}};
  const auto& p = r.provenance;
  j["provenance"] = {{"config_hash", p.config_hash},     {"dataset_hash", p.dataset_hash},
                     {"protocol_version", p.protocol_version}, {"model_ids", p.model_ids},
                     {"seed", p.seed},                   {"started_at", p.started_at},
                     {"finished_at", p.finished_at}};
  return j;
}

BenchmarkReport report_from_json(const json& j) {
  if (!j.is_object() || !j.contains("bow_baseline") || j["bow_baseline"].is_null()) {
    throw ConfigError("report has no bow_baseline");
  }
  try {
    BenchmarkReport r(j.at("dataset").get<std::string>(), bow::audit_result_from_json(j["bow_baseline"]));
    for (const auto& a : j.value("attacks", json::array())) r.attacks.push_back(stats::eval_report_from_json(a));
    for (const auto& d : j.value("doclevel", json::array())) r.doclevel.push_back(doclevel::doclevel_report_from_json(d));
    if (j.contains("dedup")) {
      const auto& d = j["dedup"];
      r.dedup = DedupSummary{d.at("preset").get<std::string>(), d.at("kept").get<std::size_t>(),
                             d.at("removed").get<std::size_t>()};
    }
    if (j.contains("provenance")) {
      const auto& p = j["provenance"];
      r.provenance.config_hash = p.value("config_hash", "");
      r.provenance.dataset_hash = p.value("dataset_hash", "");
      r.provenance.protocol_version = p.value("protocol_version", 1);
      r.provenance.model_ids = p.value("model_ids", std::map<std::string, std::string>{});
      r.provenance.seed = p.value("seed", std::uint64_t{0});
      r.provenance.started_at = p.value("started_at", "");
      r.provenance.finished_at = p.value("finished_at", "");
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

BenchmarkReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report " + path.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

struct Auc {
  double mean = 0.0;
  double std = 0.0;
};

std::vector<std::pair<std::string, Auc>> auc_rows(const BenchmarkReport& r) {
  std::vector<std::pair<std::string, Auc>> rows;
  rows.emplace_back("bow", Auc{r.bow_baseline().auc_mean, r.bow_baseline().auc_std});
  for (const auto& a : r.attacks) rows.emplace_back(a.attack_id, Auc{a.auc_mean, a.auc_std});
  return rows;
}

}  // namespace

ReportDiff compare_reports(const BenchmarkReport& a, const BenchmarkReport& b) {
  if (a.provenance.dataset_hash != b.provenance.dataset_hash) {
    throw ConfigError("reports are over different datasets (" + a.provenance.dataset_hash + " vs " +
                      b.provenance.dataset_hash + ")");
  }
  auto ra = auc_rows(a);
  auto rb = auc_rows(b);
  ReportDiff diff;
  for (const auto& [name, x] : ra) {
    auto it = std::find_if(rb.begin(), rb.end(), [&](const auto& p) { return p.first == name; });
    if (it == rb.end()) {
      diff.deltas.push_back({name, x.mean, 0.0, 0.0, 0.0, false, true});
      continue;
    }
    const Auc& y = it->second;
    if (x.mean == y.mean) continue;
    AttackDelta d;
    d.attack = name;
    d.auc_a = x.mean;
    d.auc_b = y.mean;
    d.delta = y.mean - x.mean;
    d.combined_std = std::sqrt(x.std * x.std + y.std * y.std);
    d.notable = std::abs(d.delta) > 2.0 * d.combined_std;
    diff.deltas.push_back(d);
  }
  for (const auto& [name, y] : rb) {
    if (std::none_of(ra.begin(), ra.end(), [&](const auto& p) { return p.first == name; })) {
      diff.deltas.push_back({name, 0.0, y.mean, 0.0, 0.0, false, true});
    }
  }
  return diff;
}

json to_json(const ReportDiff& d) {
  json out = json::array();
  for (const auto& x : d.deltas) {
    json e{{"attack", x.attack}};
    if (x.missing) {
      e["missing"] = true;
    } else {
      e["auc_a"] = x.auc_a;
      e["auc_b"] = x.auc_b;
      e["delta"] = x.delta;
      e["combined_std"] = x.combined_std;
      e["notable"] = x.notable;
    }
    out.push_back(e);
  }
  return out;
}

std::string render_report_table(const std::vector<BenchmarkReport>& reports) {
  std::vector<stats::TableCell> cells;
  for (const auto& r : reports) {
    cells.push_back({kBowRowName, r.dataset(), r.bow_baseline().auc_mean, r.bow_baseline().auc_std});
  }
  for (const auto& r : reports) {
    for (const auto& a : r.attacks) cells.push_back({a.attack_id, r.dataset(), a.auc_mean, a.auc_std});
  }
  return stats::render_table(cells);
}

std::vector<BenchmarkReport> load_reports(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
  std::vector<fs::path> paths;
  if (fs::exists(dir / "report.json")) paths.push_back(dir / "report.json");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "report.json")) paths.push_back(entry.path() / "report.json");
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ConfigError("no report.json under " + dir.string());
  std::vector<BenchmarkReport> out;
  for (const auto& p : paths) out.push_back(load_report(p));
  return out;
}

}  // namespace mia
