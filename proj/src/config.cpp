#include "mia/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mia/cache.hpp"
#include "mia/errors.hpp"

namespace mia {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown key \"" + k + "\" in " + std::string(where));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

AttackConfig parse_attack_config(const json& j) {
  AttackConfig c;
  if (j.is_string()) {
    c.id = parse_attack_id(j.get<std::string>());
    c.validate();
    return c;
  }
  reject_unknown(j, {"id", "k_percent", "ref_model", "n_neighbors", "swap_fraction", "neighbor_top_k", "n_shots",
                     "n_augmentations", "aug_alpha", "k_max", "k_min", "surp_k", "entropy_threshold", "n_candidates",
                     "gen_top_k", "gen_temperature", "gen_max_tokens", "prefix_fraction", "samia_ngram"},
                 "attack");
  if (!j.contains("id")) throw ConfigError("attack entry without \"id\"");
  c.id = parse_attack_id(j.at("id").get<std::string>());
  read(j, "k_percent", c.k_percent);
  read(j, "ref_model", c.ref_model);
  read(j, "n_neighbors", c.n_neighbors);
  read(j, "swap_fraction", c.swap_fraction);
  read(j, "neighbor_top_k", c.neighbor_top_k);
  read(j, "n_shots", c.n_shots);
  read(j, "n_augmentations", c.n_augmentations);
  read(j, "aug_alpha", c.aug_alpha);
  read(j, "k_max", c.k_max);
  read(j, "k_min", c.k_min);
  read(j, "surp_k", c.surp_k);
  read(j, "entropy_threshold", c.entropy_threshold);
  read(j, "n_candidates", c.n_candidates);
  read(j, "gen_top_k", c.gen_top_k);
  read(j, "gen_temperature", c.gen_temperature);
  read(j, "gen_max_tokens", c.gen_max_tokens);
  read(j, "prefix_fraction", c.prefix_fraction);
  read(j, "samia_ngram", c.samia_ngram);
  c.validate();
  return c;
}

json to_json(const AttackConfig& c) {
  return {{"id", to_string(c.id)},
          {"k_percent", c.k_percent},
          {"ref_model", c.ref_model},
          {"n_neighbors", c.n_neighbors},
          {"swap_fraction", c.swap_fraction},
          {"neighbor_top_k", c.neighbor_top_k},
          {"n_shots", c.n_shots},
          {"n_augmentations", c.n_augmentations},
          {"aug_alpha", c.aug_alpha},
          {"k_max", c.k_max},
          {"k_min", c.k_min},
          {"surp_k", c.surp_k},
          {"entropy_threshold", c.entropy_threshold},
          {"n_candidates", c.n_candidates},
          {"gen_top_k", c.gen_top_k},
          {"gen_temperature", c.gen_temperature},
          {"gen_max_tokens", c.gen_max_tokens},
          {"prefix_fraction", c.prefix_fraction},
          {"samia_ngram", c.samia_ngram}};
}

ProviderHandle parse_provider_handle(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, {"kind", "endpoint", "model", "max_in_flight", "cache_dir", "vocab_size", "zipf_exponent", "boost"},
                 "provider");
  ProviderHandle h;
  h.kind = parse_provider_kind(j.value("kind", std::string("http")));
  if (j.contains("endpoint")) h.endpoint = j["endpoint"].get<std::string>();
  h.model_id = j.value("model", std::string(to_string(h.kind)));
  read(j, "max_in_flight", h.max_in_flight);
  if (j.contains("cache_dir")) h.cache_dir = resolve(base_dir, j["cache_dir"].get<std::string>());
  read(j, "vocab_size", h.vocab_size);
  read(j, "zipf_exponent", h.zipf_exponent);
  read(j, "boost", h.boost);
  if (h.kind == ProviderKind::http && (!h.endpoint || h.endpoint->empty())) {
    throw ConfigError("http provider " + h.model_id + " requires \"endpoint\"");
  }
  if (h.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  return h;
}

json to_json(const ProviderHandle& h) {
  json j{{"kind", to_string(h.kind)}, {"model", h.model_id}, {"max_in_flight", h.max_in_flight}};
  if (h.endpoint) j["endpoint"] = *h.endpoint;
  if (h.kind != ProviderKind::http) {
    j["vocab_size"] = h.vocab_size;
    j["zipf_exponent"] = h.zipf_exponent;
  }
  if (h.kind == ProviderKind::synthetic_boosted) j["boost"] = h.boost;
  return j;
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, {"seed", "dataset", "sequences", "providers", "attacks", "shots", "evaluation", "bow", "dedup",
                     "doclevel", "output_dir", "name"},
                 "config");
  RunConfig c;
  try {
    if (!j.contains("seed")) throw ConfigError("config must set \"seed\"");
    c.seed = j.at("seed").get<std::uint64_t>();

    const auto& ds = j.at("dataset");
    reject_unknown(ds, {"path", "format", "name", "max_docs_per_class"}, "dataset");
    c.dataset.path = resolve(base_dir, ds.at("path").get<std::string>());
    c.dataset.format = parse_dataset_format(ds.value("format", std::string("jsonl")));
    c.dataset.name = ds.value("name", c.dataset.path.stem().string());
    read(ds, "max_docs_per_class", c.dataset.max_docs_per_class);

    if (j.contains("sequences")) {
      const auto& s = j["sequences"];
      reject_unknown(s, {"n_seq", "words_per_seq"}, "sequences");
      read(s, "n_seq", c.sequences.n_seq);
      read(s, "words_per_seq", c.sequences.words_per_seq);
      if (c.sequences.n_seq == 0) throw ConfigError("sequences.n_seq must be >= 1");
    }

    if (j.contains("providers")) {
      const auto& p = j["providers"];
      reject_unknown(p, {"target", "reference", "mask", "generator"}, "providers");
      if (p.contains("target")) c.providers.target = parse_provider_handle(p["target"], base_dir);
      if (p.contains("reference")) c.providers.reference = parse_provider_handle(p["reference"], base_dir);
      if (p.contains("mask")) c.providers.mask = parse_provider_handle(p["mask"], base_dir);
      if (p.contains("generator")) c.providers.generator = parse_provider_handle(p["generator"], base_dir);
    }
    if (const char* env = std::getenv("MIA_CACHE_DIR"); env && *env) {
      for (auto* h : {&c.providers.target, &c.providers.reference, &c.providers.mask, &c.providers.generator}) {
        if (*h) (*h)->cache_dir = std::filesystem::path(env);
      }
    }

    for (const auto& a : j.value("attacks", json::array())) c.attacks.push_back(parse_attack_config(a));

    if (j.contains("shots")) {
      const auto& s = j["shots"];
      reject_unknown(s, {"nonmember_path", "member_path"}, "shots");
      if (s.contains("nonmember_path")) c.shots.nonmember_path = resolve(base_dir, s["nonmember_path"].get<std::string>());
      if (s.contains("member_path")) c.shots.member_path = resolve(base_dir, s["member_path"].get<std::string>());
    }

    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      reject_unknown(e, {"n_bootstrap", "fpr_levels"}, "evaluation");
      read(e, "n_bootstrap", c.evaluation.n_bootstrap);
      read(e, "fpr_levels", c.evaluation.fpr_levels);
    }

    if (j.contains("bow")) {
      const auto& b = j["bow"];
      reject_unknown(b, {"n_runs", "train_fraction", "min_doc_fraction", "n_trees", "max_depth", "min_samples_leaf", "top_words"},
                     "bow");
      read(b, "n_runs", c.bow.n_runs);
      read(b, "train_fraction", c.bow.train_fraction);
      read(b, "min_doc_fraction", c.bow.min_doc_fraction);
      read(b, "n_trees", c.bow.forest.n_trees);
      read(b, "max_depth", c.bow.forest.max_depth);
      read(b, "min_samples_leaf", c.bow.forest.min_samples_leaf);
      read(b, "top_words", c.bow.top_words);
    }

    if (j.contains("dedup")) {
      const auto& d = j["dedup"];
      reject_unknown(d, {"preset"}, "dedup");
      c.dedup = DedupConfig{overlap::parse_preset(d.at("preset").get<std::string>())};
    }

    if (j.contains("doclevel")) {
      const auto& d = j["doclevel"];
      reject_unknown(d, {"threshold_vote", "train_docs", "eval_docs", "n_splits", "features", "token_freq_path",
                         "token_vocab_size"},
                     "doclevel");
      DoclevelConfig dl;
      read(d, "threshold_vote", dl.threshold_vote);
      read(d, "train_docs", dl.protocol.train_docs);
      read(d, "eval_docs", dl.protocol.eval_docs);
      read(d, "n_splits", dl.protocol.n_splits);
      read(d, "token_vocab_size", dl.token_vocab_size);
      if (d.contains("token_freq_path")) dl.token_freq_path = resolve(base_dir, d["token_freq_path"].get<std::string>());
      for (const auto& f : d.value("features", json::array())) {
        reject_unknown(f, {"normalization", "aggregation", "chunk_tokens", "hist_bins", "hist_range"}, "doclevel.features");
        doclevel::DocFeatureConfig fc;
        fc.normalization = doclevel::parse_normalization(f.value("normalization", std::string("RatioNormTF")));
        fc.aggregation = doclevel::parse_aggregation(f.value("aggregation", std::string("AggFE")));
        read(f, "chunk_tokens", fc.chunk_tokens);
        read(f, "hist_bins", fc.hist_bins);
        read(f, "hist_range", fc.hist_range);
        fc.validate();
        dl.features.push_back(fc);
      }
      c.doclevel = std::move(dl);
    }

    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("mia-out")));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

void RunConfig::validate() const {
  if (!attacks.empty() && !providers.target) throw ConfigError("attacks configured but no target provider");
  for (const auto& a : attacks) {
    a.validate();
    switch (a.id) {
      case AttackId::ratio:
        if (!providers.reference) throw ConfigError("ratio requires providers.reference");
        break;
      case AttackId::neighborhood:
        if (!providers.mask) throw ConfigError("neighborhood requires providers.mask");
        break;
      case AttackId::samia:
      case AttackId::samia_zlib:
        if (!providers.generator) throw ConfigError(std::string(to_string(a.id)) + " requires providers.generator");
        break;
      case AttackId::recall:
      case AttackId::con_recall:
        if (!shots.nonmember_path) throw ConfigError(std::string(to_string(a.id)) + " requires shots.nonmember_path");
        break;
      default:
        break;
    }
  }
  if (bow.n_runs == 0) throw ConfigError("bow.n_runs must be >= 1");
  if (!(bow.train_fraction > 0.0 && bow.train_fraction < 1.0)) throw ConfigError("bow.train_fraction must be in (0, 1)");
  if (evaluation.n_bootstrap == 0) throw ConfigError("evaluation.n_bootstrap must be >= 1");
  if (doclevel && doclevel->features.empty() && !doclevel->threshold_vote) {
    throw ConfigError("doclevel block enables no method");
  }
  if (doclevel && doclevel->threshold_vote && attacks.empty()) {
    throw ConfigError("doclevel.threshold_vote needs at least one attack");
  }
}

json RunConfig::semantic_json() const {
  json j;
  j["seed"] = seed;
  j["dataset"] = {{"path", dataset.path.string()},
                  {"format", dataset.format == DatasetFormat::jsonl ? "jsonl" : "text_dir"},
                  {"name", dataset.name},
                  {"max_docs_per_class", dataset.max_docs_per_class}};
  j["sequences"] = {{"n_seq", sequences.n_seq}, {"words_per_seq", sequences.words_per_seq}};
  json providers_json = json::object();
  if (providers.target) providers_json["target"] = to_json(*providers.target);
  if (providers.reference) providers_json["reference"] = to_json(*providers.reference);
  if (providers.mask) providers_json["mask"] = to_json(*providers.mask);
  if (providers.generator) providers_json["generator"] = to_json(*providers.generator);
  j["providers"] = providers_json;
  j["attacks"] = json::array();
  for (const auto& a : attacks) j["attacks"].push_back(to_json(a));
  j["shots"] = json::object();
  if (shots.nonmember_path) j["shots"]["nonmember_path"] = shots.nonmember_path->string();
  if (shots.member_path) j["shots"]["member_path"] = shots.member_path->string();
  j["evaluation"] = {{"n_bootstrap", evaluation.n_bootstrap}, {"fpr_levels", evaluation.fpr_levels}};
  j["bow"] = {{"n_runs", bow.n_runs},
              {"train_fraction", bow.train_fraction},
              {"min_doc_fraction", bow.min_doc_fraction},
              {"n_trees", bow.forest.n_trees},
              {"max_depth", bow.forest.max_depth},
              {"min_samples_leaf", bow.forest.min_samples_leaf},
              {"top_words", bow.top_words}};
  if (dedup) j["dedup"] = {{"preset", dedup->preset.name}};
  if (doclevel) {
    json f = json::array();
    for (const auto& fc : doclevel->features) {
      f.push_back({{"normalization", doclevel::to_string(fc.normalization)},
                   {"aggregation", doclevel::to_string(fc.aggregation)},
                   {"chunk_tokens", fc.chunk_tokens},
                   {"hist_bins", fc.hist_bins},
                   {"hist_range", {fc.hist_range.first, fc.hist_range.second}}});
    }
    j["doclevel"] = {{"threshold_vote", doclevel->threshold_vote},
                     {"train_docs", doclevel->protocol.train_docs},
                     {"eval_docs", doclevel->protocol.eval_docs},
                     {"n_splits", doclevel->protocol.n_splits},
                     {"features", f},
                     {"token_vocab_size", doclevel->token_vocab_size}};
    if (doclevel->token_freq_path) j["doclevel"]["token_freq_path"] = doclevel->token_freq_path->string();
  }
  return j;
}

std::string RunConfig::hash() const { return sha256_hex(semantic_json().dump()); }

}  // namespace mia
