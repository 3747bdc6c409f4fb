#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mia/config.hpp"
#include "mia/errors.hpp"
#include "mia/pipeline.hpp"
#include "mia/report.hpp"
#include "mia/synthetic.hpp"

using namespace mia;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// iid members/non-members plus a non-member shot pool, all from the same unigram model.
json toy_config(const fs::path& dir, double boost) {
  auto model = synthetic::UnigramModel::zipf(1000, 1.0);
  testing::write_docs(dir / "data.jsonl", synthetic::iid_corpus(model, 150, 150, 60, 21));
  auto shots = synthetic::iid_corpus(model, 0, 20, 30, 22);
  testing::write_docs(dir / "shots.jsonl", shots);
  json target{{"kind", "synthetic-boosted"}, {"model", "toy-target"}, {"vocab_size", 1000}, {"boost", boost}};
  json ref{{"kind", "synthetic-unigram"}, {"model", "toy-ref"}, {"vocab_size", 1000}};
  return json{{"seed", 5},
              {"dataset", {{"path", "data.jsonl"}, {"name", "toy"}}},
              {"sequences", {{"n_seq", 1}, {"words_per_seq", 50}}},
              {"providers", {{"target", target}, {"reference", ref}}},
              {"attacks", {"loss", "zlib", json{{"id", "mink"}, {"k_percent", 20}}, "ratio", "recall"}},
              {"shots", {{"nonmember_path", "shots.jsonl"}}},
              {"evaluation", {{"n_bootstrap", 100}}},
              {"bow", {{"n_runs", 2}, {"n_trees", 50}}},
              {"output_dir", "out"}};
}

bow::AuditResult baseline(double auc) {
  bow::AuditResult b;
  b.dataset = "d";
  b.auc_mean = auc;
  b.auc_std = 0.01;
  b.n_runs = 5;
  return b;
}

stats::EvalReport eval(std::string id, double mean, double std) {
  stats::EvalReport r;
  r.attack_id = std::move(id);
  r.dataset = "d";
  r.auc_mean = mean;
  r.auc_std = std;
  return r;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config parsing fills defaults and resolves paths") {
  auto dir = testing::temp_dir("cfg");
  auto j = toy_config(dir, 1.0);
  auto c = parse_run_config(j, dir);
  CHECK(c.seed == 5);
  CHECK(c.dataset.path == dir / "data.jsonl");
  CHECK(c.dataset.name == "toy");
  CHECK(c.attacks.size() == 5);
  CHECK(c.attacks[2].id == AttackId::mink);
  CHECK(c.attacks[2].k_percent == 20.0);
  CHECK(c.evaluation.n_bootstrap == 100);
  CHECK(c.evaluation.fpr_levels == std::vector<double>{0.01, 0.05});
  CHECK(c.bow.forest.n_trees == 50);
  CHECK(c.bow.forest.max_depth == 2);
  CHECK(c.providers.target->kind == ProviderKind::synthetic_boosted);
  CHECK(c.providers.target->boost == 1.0);
  CHECK(c.output_dir == dir / "out");
  CHECK_FALSE(c.dedup.has_value());
  fs::remove_all(dir);
}

TEST_CASE("config errors") {
  auto dir = testing::temp_dir("cfgerr");
  auto base = toy_config(dir, 1.0);

  auto j = base;
  j["colour"] = "blue";
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["bow"]["depth"] = 3;
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j.erase("seed");
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["providers"].erase("reference");
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j.erase("shots");
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["attacks"].push_back("neighborhood");
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["attacks"].push_back("samia");
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["attacks"].push_back("not_an_attack");
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["providers"]["target"] = {{"kind", "http"}};
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["dedup"] = {{"preset", "13"}};
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);
  j = base;
  j["evaluation"]["n_bootstrap"] = "many";
  CHECK_THROWS_AS(parse_run_config(j, dir), ConfigError);

  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("config file with comments loads") {
  auto dir = testing::temp_dir("cfgfile");
  auto j = toy_config(dir, 1.0);
  std::ofstream(dir / "run.json") << "// toy run\n" << j.dump(2);
  auto c = load_run_config(dir / "run.json");
  CHECK(c.hash() == parse_run_config(j, dir).hash());
  fs::remove_all(dir);
}

TEST_CASE("config hash covers semantics, not the output directory") {
  auto dir = testing::temp_dir("cfghash");
  auto j = toy_config(dir, 1.0);
  auto h = parse_run_config(j, dir).hash();
  CHECK(h.size() == 64);
  CHECK(parse_run_config(j, dir).hash() == h);
  auto k = j;
  k["output_dir"] = "elsewhere";
  CHECK(parse_run_config(k, dir).hash() == h);
  k = j;
  k["seed"] = 6;
  CHECK(parse_run_config(k, dir).hash() != h);
  k = j;
  k["attacks"][2]["k_percent"] = 10;
  CHECK(parse_run_config(k, dir).hash() != h);
  fs::remove_all(dir);
}

TEST_CASE("MIA_CACHE_DIR overrides provider cache directories") {
  auto dir = testing::temp_dir("cfgenv");
  auto j = toy_config(dir, 1.0);
  j["providers"]["target"]["cache_dir"] = "local-cache";
  CHECK(parse_run_config(j, dir).providers.target->cache_dir == dir / "local-cache");
  ::setenv("MIA_CACHE_DIR", "/tmp/mia-env-cache", 1);
  auto c = parse_run_config(j, dir);
  ::unsetenv("MIA_CACHE_DIR");
  CHECK(c.providers.target->cache_dir == fs::path("/tmp/mia-env-cache"));
  CHECK(c.providers.reference->cache_dir == fs::path("/tmp/mia-env-cache"));
  fs::remove_all(dir);
}

TEST_CASE("reports always carry the baseline") {
  BenchmarkReport r("d", baseline(0.52));
  r.attacks.push_back(eval("loss", 0.6, 0.01));
  r.provenance.dataset_hash = "abc";
  r.provenance.model_ids["target"] = "m";
  auto j = to_json(r);
  CHECK(j.contains("bow_baseline"));
  auto back = report_from_json(j);
  CHECK(back.bow_baseline().auc_mean == 0.52);
  CHECK(back.attacks.size() == 1);
  CHECK(back.provenance.model_ids.at("target") == "m");
  CHECK(to_json(back).dump() == j.dump());
  j.erase("bow_baseline");
  CHECK_THROWS_AS(report_from_json(j), ConfigError);
}

TEST_CASE("compare reports") {
  BenchmarkReport a("d", baseline(0.5));
  a.provenance.dataset_hash = "h";
  a.attacks.push_back(eval("loss", 0.60, 0.013));
  a.attacks.push_back(eval("zlib", 0.55, 0.013));
  CHECK(compare_reports(a, a).empty());

  BenchmarkReport b = a;
  b.attacks[0].auc_mean = 0.65;
  auto d = compare_reports(a, b);
  REQUIRE(d.deltas.size() == 1);
  CHECK(d.deltas[0].attack == "loss");
  CHECK(d.deltas[0].delta == doctest::Approx(0.05));
  CHECK(d.deltas[0].combined_std == doctest::Approx(std::sqrt(2.0) * 0.013));
  CHECK(d.deltas[0].notable);

  BenchmarkReport c = a;
  c.attacks[0].auc_mean = 0.61;
  CHECK_FALSE(compare_reports(a, c).deltas[0].notable);

  BenchmarkReport e("d", baseline(0.7));
  e.provenance.dataset_hash = "h";
  e.attacks = a.attacks;
  e.attacks.pop_back();
  auto de = compare_reports(a, e);
  bool saw_bow = false, saw_missing = false;
  for (const auto& x : de.deltas) {
    saw_bow |= x.attack == "bow";
    saw_missing |= x.attack == "zlib" && x.missing;
  }
  CHECK(saw_bow);
  CHECK(saw_missing);
  CHECK(to_json(de).size() == de.deltas.size());

  BenchmarkReport f = a;
  f.provenance.dataset_hash = "other";
  CHECK_THROWS_AS(compare_reports(a, f), ConfigError);
}

TEST_CASE("report table puts the baseline first") {
  BenchmarkReport a("wiki", baseline(0.98));
  a.attacks.push_back(eval("loss", 0.6, 0.01));
  auto t = render_report_table({a});
  CHECK(t.find(kBowRowName) != std::string::npos);
  CHECK(t.find(kBowRowName) < t.find("loss"));
  CHECK(t.find("0.980 ± .010") != std::string::npos);
}

TEST_CASE("pipeline on the boosted provider") {
  auto dir = testing::temp_dir("pipe");
  auto j = toy_config(dir, 1.0);
  auto c = parse_run_config(j, dir);
  std::ostringstream log;
  auto r = run_pipeline(c, {&log, true});

  CHECK(r.bow_baseline().auc_mean > 0.4);
  CHECK(r.bow_baseline().auc_mean < 0.6);
  REQUIRE(r.attacks.size() == 5);
  for (const auto& a : r.attacks) {
    INFO(a.attack_id);
    CHECK(a.auc > 0.9);
    CHECK(a.n_members == 150);
    CHECK(a.n_bootstrap == 100);
  }
  CHECK(r.attacks[2].attack_id == "mink(20%)");
  CHECK(r.provenance.config_hash == c.hash());
  CHECK(r.provenance.model_ids.at("target") == "toy-target");
  CHECK(log.str().find("[bow_audit]") != std::string::npos);

  auto out = dir / "out";
  CHECK(fs::exists(out / "report.json"));
  CHECK_FALSE(fs::exists(out / ".lock"));
  auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["status"] == "complete");
  CHECK(manifest["last_completed_stage"] == "report");
  auto saved = load_report(out / "report.json");
  CHECK(saved.attacks.size() == 5);
  CHECK(load_reports(dir).size() == 1);

  std::size_t lines = 0;
  std::ifstream scores(out / "scores.jsonl");
  for (std::string line; std::getline(scores, line);) {
    auto s = json::parse(line);
    CHECK(s.contains("value"));
    ++lines;
  }
  CHECK(lines == 5 * 300);

  // same config, fresh directory: identical apart from timestamps
  auto k = j;
  k["output_dir"] = "out2";
  run_pipeline(parse_run_config(k, dir), {nullptr, true});
  auto a = strip_volatile(json::parse(slurp(out / "report.json")));
  auto b = strip_volatile(json::parse(slurp(dir / "out2" / "report.json")));
  CHECK(a.dump() == b.dump());
  CHECK(slurp(out / "scores.jsonl") == slurp(dir / "out2" / "scores.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("pipeline with the boost off stays near chance") {
  auto dir = testing::temp_dir("pipe0");
  auto c = parse_run_config(toy_config(dir, 0.0), dir);
  auto r = run_pipeline(c, {nullptr, false});
  for (const auto& a : r.attacks) {
    INFO(a.attack_id);
    CHECK(a.auc > 0.4);
    CHECK(a.auc < 0.6);
  }
  CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("warm cache reproduces the cold run") {
  auto dir = testing::temp_dir("pipecache");
  auto j = toy_config(dir, 1.0);
  j["providers"]["target"]["cache_dir"] = "cache";
  j["attacks"] = {"loss", "zlib"};
  j.erase("shots");
  auto cold = run_pipeline(parse_run_config(j, dir), {nullptr, true});
  CHECK_FALSE(fs::is_empty(dir / "cache"));
  j["output_dir"] = "warm";
  auto warm = run_pipeline(parse_run_config(j, dir), {nullptr, true});
  CHECK(strip_volatile(to_json(cold)).dump() == strip_volatile(to_json(warm)).dump());
  fs::remove_all(dir);
}

TEST_CASE("pipeline with dedup and doclevel") {
  auto dir = testing::temp_dir("pipedl");
  auto model = synthetic::UnigramModel::zipf(1000, 1.0);
  testing::write_docs(dir / "data.jsonl", synthetic::iid_corpus(model, 40, 40, 250, 31));
  json j{{"seed", 3},
         {"dataset", {{"path", "data.jsonl"}}},
         {"sequences", {{"n_seq", 5}, {"words_per_seq", 50}}},
         {"providers", {{"target", {{"kind", "synthetic-boosted"}, {"vocab_size", 1000}, {"boost", 0.3}}}}},
         {"attacks", {"loss"}},
         {"evaluation", {{"n_bootstrap", 50}}},
         {"bow", {{"n_runs", 1}, {"n_trees", 20}}},
         {"dedup", {{"preset", "13_0.8"}}},
         {"doclevel",
          {{"train_docs", 40},
           {"eval_docs", 30},
           {"n_splits", 2},
           {"features", {{{"normalization", "MaxNormTF"}, {"aggregation", "HistFE"}, {"chunk_tokens", 100}}}}}},
         {"output_dir", "out"}};
  auto r = run_pipeline(parse_run_config(j, dir), {nullptr, true});
  REQUIRE(r.dedup.has_value());
  CHECK(r.dedup->preset == "13_0.8");
  CHECK(r.dedup->removed == 0);
  REQUIRE(r.doclevel.size() == 2);
  CHECK(r.doclevel[0].method == "threshold_vote");
  CHECK(r.doclevel[0].split_aucs.size() == 2);
  CHECK(r.doclevel[1].method == "meta_classifier");
  fs::remove_all(dir);
}

TEST_CASE("held lock refuses to run") {
  auto dir = testing::temp_dir("pipelock");
  auto c = parse_run_config(toy_config(dir, 1.0), dir);
  fs::create_directories(dir / "out");
  std::ofstream(dir / "out" / ".lock") << "123\n";
  CHECK_THROWS_AS(run_pipeline(c, {nullptr, true}), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("failing stage leaves a partial manifest") {
  auto dir = testing::temp_dir("pipefail");
  auto j = toy_config(dir, 1.0);
  j["providers"] = {{"target", {{"kind", "http"}, {"endpoint", "http://127.0.0.1:1"}, {"model", "gone"}}}};
  j["attacks"] = {"loss"};
  j.erase("shots");
  CHECK_THROWS_AS(run_pipeline(parse_run_config(j, dir), {nullptr, true}), ProviderError);
  auto manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["last_completed_stage"] == "sequences");
  CHECK(manifest["error"].get<std::string>().size() > 0);
  CHECK_FALSE(fs::exists(dir / "out" / ".lock"));
  CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("dataset hash depends on content and order") {
  std::vector<Document> a{{"1", "x", Label::member, "", std::nullopt}, {"2", "y", Label::non_member, "", std::nullopt}};
  auto b = a;
  std::swap(b[0], b[1]);
  CHECK(dataset_hash(a) == dataset_hash(a));
  CHECK(dataset_hash(a) != dataset_hash(b));
  CHECK(dataset_hash(a).size() == 64);
}

}
