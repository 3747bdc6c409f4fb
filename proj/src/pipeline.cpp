#include "mia/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "mia/cache.hpp"
#include "mia/errors.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStreamDedup = 1;
constexpr std::uint64_t kStreamBow = 2;
constexpr std::uint64_t kStreamAttacks = 3;
constexpr std::uint64_t kStreamBootstrap = 4;
constexpr std::uint64_t kStreamDoclevel = 5;

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw ConfigError("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
    auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void write_file(const fs::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

class Manifest {
 public:
  Manifest(const RunConfig& config, const PipelineOptions& options)
      : options_(options), dir_(config.output_dir) {
    doc_["config_hash"] = config.hash();
    doc_["seed"] = config.seed;
    doc_["status"] = "running";
    doc_["last_completed_stage"] = nullptr;
    doc_["stages"] = json::array();
  }

  void stage_done(const std::string& stage, json counts) {
    doc_["last_completed_stage"] = stage;
    doc_["stages"].push_back({{"stage", stage}, {"counts", counts}});
    if (options_.log) *options_.log << "[" << stage << "] " << counts.dump() << "\n" << std::flush;
    flush();
  }

  void finish(const std::string& status, const std::string& error = "") {
    doc_["status"] = status;
    if (!error.empty()) doc_["error"] = error;
    flush();
  }

 private:
  void flush() {
    if (options_.write_outputs) write_file(dir_ / "manifest.json", doc_.dump(2) + "\n");
  }

  const PipelineOptions& options_;
  fs::path dir_;
  json doc_;
};

std::vector<Document> cap_per_class(std::vector<Document> docs, std::size_t cap) {
  if (cap == 0) return docs;
  std::size_t m = 0, n = 0;
  std::vector<Document> out;
  for (auto& d : docs) {
    std::size_t& c = d.label == Label::member ? m : n;
    if (c < cap) {
      ++c;
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<std::string> texts_of(const fs::path& path) {
  std::vector<std::string> out;
  for (auto& d : corpus::load_dataset(path, DatasetFormat::jsonl)) out.push_back(std::move(d.text));
  if (out.empty()) throw ConfigError("shot pool " + path.string() + " is empty");
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception wins.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i; !failed && (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
  }
  if (error) std::rethrow_exception(error);
}

std::vector<ScoredSequence> score_all(Provider& p, const std::vector<std::string>& texts, std::size_t max_in_flight) {
  std::vector<ScoreItem> items;
  items.reserve(texts.size());
  for (const auto& t : texts) items.push_back({t, std::nullopt});
  auto batch = batch_score(p, items, max_in_flight);
  if (!batch.failures.empty()) {
    const auto& f = batch.failures.front();
    throw ProviderError("scoring failed for item " + std::to_string(f.index) + ": " + f.message);
  }
  std::vector<ScoredSequence> out;
  out.reserve(texts.size());
  for (auto& r : batch.results) out.push_back(std::move(*r));
  return out;
}

std::string feature_name(const doclevel::DocFeatureConfig& f) {
  return std::string(doclevel::to_string(f.normalization)) + "+" + std::string(doclevel::to_string(f.aggregation));
}

}  // namespace

std::string dataset_hash(const std::vector<Document>& docs) {
  std::string all;
  for (const auto& d : docs) {
    all += corpus::to_jsonl_line(d);
    all += '\n';
  }
  return sha256_hex(all);
}

json strip_volatile(json j) {
  if (j.contains("provenance")) {
    j["provenance"].erase("started_at");
    j["provenance"].erase("finished_at");
  }
  return j;
}

BenchmarkReport run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  config.validate();
  std::optional<OutputLock> lock;
  if (options.write_outputs) lock.emplace(config.output_dir);
  Manifest manifest(config, options);
  const std::string started_at = utc_now();

  try {
    // load
    auto all_docs = corpus::load_dataset(config.dataset.path, config.dataset.format);
    std::vector<Document> docs;
    std::size_t unlabeled = 0;
    for (auto& d : all_docs) {
      if (d.label == Label::unlabeled) {
        ++unlabeled;
      } else {
        docs.push_back(std::move(d));
      }
    }
    docs = cap_per_class(std::move(docs), config.dataset.max_docs_per_class);
    auto count = [](const std::vector<Document>& ds, Label l) {
      return static_cast<std::size_t>(std::count_if(ds.begin(), ds.end(), [&](const Document& d) { return d.label == l; }));
    };
    const std::string ds_hash = dataset_hash(docs);
    manifest.stage_done("load", {{"members", count(docs, Label::member)},
                                 {"nonmembers", count(docs, Label::non_member)},
                                 {"unlabeled_dropped", unlabeled},
                                 {"dataset_hash", ds_hash}});
    if (count(docs, Label::member) == 0 || count(docs, Label::non_member) == 0) {
      throw DegenerateDataError("dataset needs both members and non-members");
    }

    // dedup
    std::optional<DedupSummary> dedup_summary;
    if (config.dedup) {
      std::vector<Document> members, nonmembers;
      for (auto& d : docs) (d.label == Label::member ? members : nonmembers).push_back(std::move(d));
      auto index = overlap::build_index(members, config.dedup->preset.n);
      auto result = overlap::dedup(nonmembers, index, config.dedup->preset);
      dedup_summary = DedupSummary{config.dedup->preset.name, result.kept.size(), result.removed.size()};
      docs = std::move(members);
      for (auto& d : result.kept) docs.push_back(std::move(d));
      manifest.stage_done("dedup", {{"preset", config.dedup->preset.name},
                                    {"kept", result.kept.size()},
                                    {"removed", result.removed.size()},
                                    {"index_grams", index.size()}});
      (void)kStreamDedup;
      if (result.kept.empty()) throw DegenerateDataError("dedup removed every non-member");
    }

    // bow_audit
    const std::uint64_t bow_seed = derive_seed(config.seed, kStreamBow);
    auto baseline = bow::audit(docs, config.bow, bow_seed, config.dataset.name);
    manifest.stage_done("bow_audit", {{"auc_mean", baseline.auc_mean},
                                      {"auc_std", baseline.auc_std},
                                      {"n_runs", baseline.n_runs},
                                      {"seed", bow_seed}});
    BenchmarkReport report(config.dataset.name, baseline);
    report.dedup = dedup_summary;
    report.provenance.config_hash = config.hash();
    report.provenance.dataset_hash = ds_hash;
    report.provenance.seed = config.seed;
    report.provenance.started_at = started_at;
    const auto& providers = config.providers;
    if (providers.target) report.provenance.model_ids["target"] = providers.target->model_id;
    if (providers.reference) report.provenance.model_ids["reference"] = providers.reference->model_id;
    if (providers.mask) report.provenance.model_ids["mask"] = providers.mask->model_id;
    if (providers.generator) report.provenance.model_ids["generator"] = providers.generator->model_id;

    if (!config.attacks.empty()) {
      // sequences
      std::vector<SequenceSample> seqs;
      std::vector<std::size_t> seq_doc;  // position in docs
      std::size_t too_short = 0;
      for (std::size_t di = 0; di < docs.size(); ++di) {
        const auto& d = docs[di];
        if (config.sequences.words_per_seq == 0) {
          auto words = text::count_words(d.text);
          if (words == 0) {
            ++too_short;
            continue;
          }
          seqs.push_back(SequenceSample{d.id, 0, 0, words, d.text, d.label});
          seq_doc.push_back(di);
          continue;
        }
        if (text::count_words(d.text) < config.sequences.n_seq * config.sequences.words_per_seq) {
          ++too_short;
          continue;
        }
        for (auto& s : corpus::extract_sequences(d, config.sequences.n_seq, config.sequences.words_per_seq)) {
          seqs.push_back(std::move(s));
          seq_doc.push_back(di);
        }
      }
      std::size_t seq_members = 0;
      for (const auto& s : seqs) seq_members += s.label == Label::member;
      manifest.stage_done("sequences", {{"sequences", seqs.size()},
                                        {"member_sequences", seq_members},
                                        {"docs_too_short", too_short}});
      if (seq_members == 0 || seq_members == seqs.size()) {
        throw DegenerateDataError("sequence extraction left only one class");
      }

      // score
      auto build = [&](const std::optional<ProviderHandle>& h) -> std::unique_ptr<Provider> {
        if (!h) return nullptr;
        ProviderHandle handle = *h;
        if (handle.kind == ProviderKind::synthetic_boosted) {
          for (const auto& s : seqs) {
            if (s.label == Label::member) handle.member_texts.push_back(s.text);
          }
        }
        return make_provider(handle);
      };
      auto target = build(providers.target);
      auto reference = build(providers.reference);
      auto mask = build(providers.mask);
      auto generator = build(providers.generator);

      AttackContext ctx;
      ctx.target = target.get();
      ctx.reference = reference.get();
      ctx.mask = mask.get();
      ctx.generator = generator.get();
      ctx.seed = derive_seed(config.seed, kStreamAttacks);
      if (config.shots.nonmember_path) ctx.nonmember_shots = texts_of(*config.shots.nonmember_path);
      if (config.shots.member_path) {
        ctx.member_shots = texts_of(*config.shots.member_path);
      } else {
        for (const auto& s : seqs) {
          if (s.label == Label::member) ctx.member_shots.push_back(s.text);
        }
      }
      std::set<std::string> vocab;
      for (const auto& s : seqs) {
        for (auto w : text::split_whitespace(s.text)) vocab.emplace(w);
      }
      ctx.vocabulary.assign(vocab.begin(), vocab.end());

      std::vector<std::vector<AttackScore>> per_seq(seqs.size());
      parallel_for(seqs.size(), providers.target->max_in_flight, [&](std::size_t i) {
        per_seq[i] = score_sequence(config.attacks, seqs[i].doc_id, seqs[i].index, seqs[i].text, i, ctx);
      });
      std::size_t n_flags = 0;
      std::string scores_jsonl;
      for (const auto& row : per_seq) {
        for (const auto& s : row) {
          n_flags += !s.flags.empty();
          json line{{"attack", to_string(s.attack)}, {"doc_id", s.doc_id}, {"seq_index", s.seq_index},
                    {"value", s.value}, {"flags", s.flags}};
          scores_jsonl += line.dump() + "\n";
        }
      }
      if (options.write_outputs) write_file(config.output_dir / "scores.jsonl", scores_jsonl);
      manifest.stage_done("score", {{"attacks", config.attacks.size()},
                                    {"sequences", seqs.size()},
                                    {"target_requests", target->request_count()},
                                    {"flagged_scores", n_flags},
                                    {"seed", ctx.seed}});

      // evaluate
      const std::uint64_t boot_seed = derive_seed(config.seed, kStreamBootstrap);
      std::vector<Label> labels;
      for (const auto& s : seqs) labels.push_back(s.label);
      std::set<std::string> seen;
      for (std::size_t a = 0; a < config.attacks.size(); ++a) {
        std::vector<double> values;
        values.reserve(seqs.size());
        for (const auto& row : per_seq) values.push_back(row[a].value);
        auto r = stats::bootstrap_eval(values, labels, config.evaluation.n_bootstrap, boot_seed,
                                       config.evaluation.fpr_levels);
        r.attack_id = std::string(to_string(config.attacks[a].id));
        if (config.attacks[a].id == AttackId::mink || config.attacks[a].id == AttackId::minkpp) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "(%g%%)", config.attacks[a].k_percent);
          r.attack_id += buf;
        }
        if (!seen.insert(r.attack_id).second) r.attack_id += "#" + std::to_string(a);
        r.dataset = config.dataset.name;
        report.attacks.push_back(std::move(r));
      }
      json aucs = json::object();
      for (const auto& r : report.attacks) aucs[r.attack_id] = r.auc_mean;
      manifest.stage_done("evaluate", {{"n_bootstrap", config.evaluation.n_bootstrap}, {"seed", boot_seed}, {"auc_mean", aucs}});

      // doclevel
      if (config.doclevel) {
        const auto& dl = *config.doclevel;
        const std::uint64_t dl_seed = derive_seed(config.seed, kStreamDoclevel);
        json counts{{"seed", dl_seed}};
        if (dl.threshold_vote) {
          for (std::size_t a = 0; a < config.attacks.size(); ++a) {
            std::vector<doclevel::DocSequences> by_doc;
            std::vector<std::ptrdiff_t> slot(docs.size(), -1);
            for (std::size_t i = 0; i < seqs.size(); ++i) {
              auto di = seq_doc[i];
              if (slot[di] < 0) {
                slot[di] = static_cast<std::ptrdiff_t>(by_doc.size());
                by_doc.push_back({docs[di].id, docs[di].label, {}});
              }
              by_doc[slot[di]].seq_scores.push_back(per_seq[i][a].value);
            }
            auto r = doclevel::evaluate_threshold_vote(by_doc, dl.protocol, dl_seed);
            r.name = report.attacks[a].attack_id;
            r.dataset = config.dataset.name;
            report.doclevel.push_back(std::move(r));
          }
        }
        if (!dl.features.empty()) {
          std::vector<Label> doc_labels;
          for (const auto& d : docs) doc_labels.push_back(d.label);
          for (const auto& fc : dl.features) {
            std::vector<std::vector<ScoredSequence>> chunks(docs.size());
            std::vector<ScoredSequence> all_chunks;
            for (std::size_t di = 0; di < docs.size(); ++di) {
              chunks[di] = score_all(*target, doclevel::chunk_words(docs[di].text, fc.chunk_tokens),
                                     providers.target->max_in_flight);
              all_chunks.insert(all_chunks.end(), chunks[di].begin(), chunks[di].end());
            }
            std::vector<ScoredSequence> freq_source;
            if (dl.token_freq_path) {
              std::vector<std::string> ref_chunks;
              for (const auto& t : texts_of(*dl.token_freq_path)) {
                for (auto& c : doclevel::chunk_words(t, fc.chunk_tokens)) ref_chunks.push_back(std::move(c));
              }
              freq_source = score_all(*target, ref_chunks, providers.target->max_in_flight);
            }
            auto freq = doclevel::TokenFrequency::from_sequences(dl.token_freq_path ? freq_source : all_chunks,
                                                                 dl.token_vocab_size);
            forest::FeatureMatrix features;
            for (std::size_t di = 0; di < docs.size(); ++di) {
              features.append_row(doclevel::doc_features(chunks[di], fc, freq));
            }
            auto r = doclevel::evaluate_meta_classifier(features, doc_labels, dl.protocol, dl_seed, config.bow.forest);
            r.name = feature_name(fc);
            r.dataset = config.dataset.name;
            report.doclevel.push_back(std::move(r));
          }
        }
        json dl_aucs = json::object();
        for (const auto& r : report.doclevel) dl_aucs[r.method + ":" + r.name] = r.auc_mean;
        counts["auc_mean"] = dl_aucs;
        manifest.stage_done("doclevel", counts);
      }
    }

    // report
    report.provenance.finished_at = utc_now();
    if (options.write_outputs) write_file(config.output_dir / "report.json", to_json(report).dump(2) + "\n");
    manifest.stage_done("report", {{"attacks", report.attacks.size()}, {"doclevel", report.doclevel.size()}});
    manifest.finish("complete");
    return report;
  } catch (const std::exception& e) {
    try {
      manifest.finish("failed", e.what());
    } catch (...) {
    }
    throw;
  }
}

}  // namespace mia
