// mia: membership-inference benchmark command line.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mia/bow.hpp"
#include "mia/config.hpp"
#include "mia/convert.hpp"
#include "mia/corpus.hpp"
#include "mia/errors.hpp"
#include "mia/overlap.hpp"
#include "mia/pipeline.hpp"
#include "mia/provider.hpp"
#include "mia/report.hpp"
#include "mia/synthetic.hpp"

using namespace mia;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_docs(const std::vector<Document>& docs, const std::string& out) {
  if (out.empty() || out == "-") {
    corpus::write_jsonl(std::cout, docs);
    return;
  }
  std::ofstream f(out);
  if (!f) throw ConfigError("cannot write " + out);
  corpus::write_jsonl(f, docs);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<Document> labeled(std::vector<Document> docs) {
  std::erase_if(docs, [](const Document& d) { return d.label == Label::unlabeled; });
  return docs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Membership inference benchmark harness"};
  app.require_subcommand(1);

  std::string format = "jsonl";
  std::uint64_t seed = 0;

  // audit
  auto* audit = app.add_subcommand("audit", "Bag-of-words audit of a labeled dataset");
  std::string audit_path;
  bow::AuditOptions audit_opts;
  audit->add_option("dataset", audit_path, "Dataset path")->required();
  audit->add_option("--format", format, "jsonl or text_dir");
  audit->add_option("--seed", seed);
  audit->add_option("--runs", audit_opts.n_runs);
  audit->add_option("--min-doc-fraction", audit_opts.min_doc_fraction);
  audit->add_option("--trees", audit_opts.forest.n_trees);

  // dedup
  auto* dedup = app.add_subcommand("dedup", "Remove non-members that overlap the member corpus");
  std::string dedup_path, dedup_preset, dedup_out;
  bool dedup_audit = false;
  dedup->add_option("dataset", dedup_path)->required();
  dedup->add_option("--preset", dedup_preset, "13_0.8, 7_0.2 or <n>_<max>")->required();
  dedup->add_option("--format", format);
  dedup->add_option("--out", dedup_out, "Write the deduplicated dataset as JSONL");
  dedup->add_flag("--audit", dedup_audit, "Audit before and after deduplication");
  dedup->add_option("--seed", seed);

  // run / doclevel
  auto* run = app.add_subcommand("run", "Run a benchmark config");
  std::string run_config;
  run->add_option("config", run_config)->required();
  auto* dl = app.add_subcommand("doclevel", "Run a config's document-level evaluation");
  std::string dl_config;
  dl->add_option("config", dl_config)->required();

  // rdd-sample
  auto* rdd = app.add_subcommand("rdd-sample", "Sample members/non-members around a cutoff month");
  std::string rdd_path, rdd_cutoff, rdd_out;
  int rdd_window = 0;
  corpus::RddOptions rdd_opts;
  rdd->add_option("corpus", rdd_path)->required();
  rdd->add_option("--cutoff", rdd_cutoff, "YYYY-MM")->required();
  rdd->add_option("--window", rdd_window, "Months on each side")->required()->check(CLI::PositiveNumber);
  rdd->add_option("--min-words", rdd_opts.min_words);
  rdd->add_option("--truncate", rdd_opts.truncate_to);
  rdd->add_option("--format", format);
  rdd->add_option("--out", rdd_out);

  // canary
  auto* canary = app.add_subcommand("canary", "Generate a canary member/non-member set");
  std::string canary_spec;
  canary->add_option("--spec", canary_spec, "JSON canary spec")->required();

  // report / compare
  auto* rep = app.add_subcommand("report", "Print reports under a directory");
  std::string rep_dir;
  bool rep_table = false;
  rep->add_option("dir", rep_dir)->required();
  rep->add_flag("--table", rep_table, "Attacks x datasets table");
  auto* cmp = app.add_subcommand("compare", "Per-attack AUC differences between two reports");
  std::string cmp_a, cmp_b;
  cmp->add_option("a", cmp_a)->required();
  cmp->add_option("b", cmp_b)->required();

  // convert
  auto* conv = app.add_subcommand("convert", "Convert a public release to the JSONL dataset format");
  std::string conv_kind, conv_out;
  std::vector<std::string> conv_in;
  conv->add_option("kind", conv_kind)->required()->check(CLI::IsMember({"wikimia", "bookmia", "mimir"}));
  conv->add_option("inputs", conv_in, "Input file(s); mimir takes members then non-members")->required();
  conv->add_option("--out", conv_out);

  // synth-corpus
  auto* synth = app.add_subcommand("synth-corpus", "I.i.d. unigram corpus (both classes from one generator)");
  std::size_t synth_m = 500, synth_n = 500, synth_words = 200, synth_vocab = 1000;
  double synth_exp = 1.0;
  std::string synth_out;
  synth->add_option("--members", synth_m);
  synth->add_option("--nonmembers", synth_n);
  synth->add_option("--words", synth_words);
  synth->add_option("--vocab", synth_vocab);
  synth->add_option("--zipf", synth_exp);
  synth->add_option("--seed", seed);
  synth->add_option("--out", synth_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors are config errors
  }

  try {
    if (*audit) {
      auto docs = labeled(corpus::load_dataset(audit_path, parse_dataset_format(format)));
      auto r = bow::audit(docs, audit_opts, seed, fs::path(audit_path).stem().string());
      std::cout << bow::to_json(r).dump(2) << "\n";
    } else if (*dedup) {
      auto preset = overlap::parse_preset(dedup_preset);
      auto docs = labeled(corpus::load_dataset(dedup_path, parse_dataset_format(format)));
      std::vector<Document> members, nonmembers;
      for (auto& d : docs) (d.label == Label::member ? members : nonmembers).push_back(std::move(d));
      json out;
      if (dedup_audit) {
        std::vector<overlap::DedupPreset> presets{preset};
        out["steps"] = json::array();
        for (const auto& s : overlap::shift_after_dedup(members, nonmembers, presets, {}, seed)) {
          out["steps"].push_back(overlap::to_json(s));
        }
      }
      auto index = overlap::build_index(members, preset.n);
      auto result = overlap::dedup(nonmembers, index, preset);
      out["preset"] = preset.name;
      out["kept"] = result.kept.size();
      out["removed"] = result.removed.size();
      std::cerr << out.dump(2) << "\n";
      if (!dedup_out.empty()) {
        for (auto& d : result.kept) members.push_back(std::move(d));
        write_docs(members, dedup_out);
      }
    } else if (*run || *dl) {
      auto config = load_run_config(*run ? run_config : dl_config);
      if (*dl && !config.doclevel) throw ConfigError("config has no doclevel block");
      PipelineOptions opts;
      opts.log = &std::cerr;
      auto report = run_pipeline(config, opts);
      if (*dl) {
        json out = json::array();
        for (const auto& r : report.doclevel) out.push_back(doclevel::to_json(r));
        std::cout << out.dump(2) << "\n";
      } else {
        std::cout << render_report_table({report});
      }
    } else if (*rdd) {
      auto docs = corpus::load_dataset(rdd_path, parse_dataset_format(format));
      auto sample = corpus::rdd_sample(docs, YearMonth::parse(rdd_cutoff), rdd_window, rdd_opts);
      write_docs(sample, rdd_out);
    } else if (*canary) {
      auto spec_json = read_json_file(canary_spec);
      auto base = fs::path(canary_spec).parent_path();
      corpus::CanarySpec spec;
      spec.length_tokens = spec_json.at("length_tokens").get<std::size_t>();
      spec.n_rep = spec_json.value("n_rep", std::size_t{1});
      spec.seed = spec_json.value("seed", std::uint64_t{0});
      spec.temperature = spec_json.value("temperature", 1.0);
      spec.top_k = spec_json.value("top_k", std::size_t{0});
      spec.max_attempts_per_canary = spec_json.value("max_attempts_per_canary", std::size_t{50});
      if (spec_json.contains("perplexity_band")) {
        auto band = spec_json["perplexity_band"].get<std::vector<double>>();
        if (band.size() != 2) throw ConfigError("perplexity_band must be [low, high]");
        spec.perplexity_band = std::make_pair(band[0], band[1]);
      }
      auto generator = make_provider(parse_provider_handle(spec_json.at("generator"), base));
      auto ds = corpus::build_canary_dataset(spec, *generator, spec_json.value("n_members", std::size_t{100}),
                                             spec_json.value("n_nonmembers", std::size_t{100}));
      fs::path out_dir = base / spec_json.value("out_dir", std::string("canaries"));
      fs::create_directories(out_dir);
      std::vector<Document> docs;
      for (std::size_t i = 0; i < ds.members.size(); ++i) {
        docs.push_back({"canary-m" + std::to_string(i), ds.members[i], Label::member, "canary", std::nullopt});
      }
      for (std::size_t i = 0; i < ds.non_members.size(); ++i) {
        docs.push_back({"canary-n" + std::to_string(i), ds.non_members[i], Label::non_member, "canary", std::nullopt});
      }
      write_docs(docs, (out_dir / "canaries.jsonl").string());
      std::ofstream inj(out_dir / "injection.txt");
      for (const auto& line : ds.injection_lines) inj << line << "\n";
      std::cerr << "wrote " << docs.size() << " canaries and " << ds.injection_lines.size()
                << " injection lines to " << out_dir.string() << "\n";
    } else if (*rep) {
      auto reports = load_reports(rep_dir);
      if (rep_table) {
        std::cout << render_report_table(reports);
      } else {
        json out = json::array();
        for (const auto& r : reports) out.push_back(to_json(r));
        std::cout << out.dump(2) << "\n";
      }
    } else if (*cmp) {
      auto diff = compare_reports(load_report(cmp_a), load_report(cmp_b));
      std::cout << to_json(diff).dump(2) << "\n";
    } else if (*conv) {
      std::vector<Document> docs;
      if (conv_kind == "mimir") {
        if (conv_in.size() != 2) throw ConfigError("mimir takes two inputs: members, non-members");
        docs = convert::mimir(conv_in[0], conv_in[1]);
      } else {
        if (conv_in.size() != 1) throw ConfigError(conv_kind + " takes one input");
        docs = conv_kind == "wikimia" ? convert::wikimia(conv_in[0]) : convert::bookmia(conv_in[0]);
      }
      write_docs(docs, conv_out);
    } else if (*synth) {
      auto model = synthetic::UnigramModel::zipf(synth_vocab, synth_exp);
      write_docs(synthetic::iid_corpus(model, synth_m, synth_n, synth_words, seed), synth_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateDataError& e) {
    std::cerr << "degenerate data: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
