#include "mia/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "mia/errors.hpp"
#include "mia/provider.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::member: return "member";
    case Label::non_member: return "non-member";
    case Label::unlabeled: return "unlabeled";
  }
  return "?";
}

Label parse_label(std::string_view s) {
  if (s == "member") return Label::member;
  if (s == "non-member") return Label::non_member;
  if (s == "unlabeled") return Label::unlabeled;
  throw ConfigError("unknown label \"" + std::string(s) + "\"");
}

DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "text_dir" || s == "text-dir") return DatasetFormat::text_dir;
  throw ConfigError("unknown dataset format: " + std::string(s));
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("bad " + std::string(what) + " in date: " + std::string(s));
  }
  return v;
}

}  // namespace

YearMonth YearMonth::parse(std::string_view s) {
  if (s.size() < 7 || s[4] != '-') throw ConfigError("date must be YYYY-MM: " + std::string(s));
  if (s.size() > 7 && s[7] != '-' && s[7] != 'T') throw ConfigError("date must be YYYY-MM: " + std::string(s));
  YearMonth ym{parse_int(s.substr(0, 4), "year"), parse_int(s.substr(5, 2), "month")};
  if (ym.month < 1 || ym.month > 12) throw ConfigError("month out of range: " + std::string(s));
  return ym;
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::plus_months(int delta) const {
  int total = year * 12 + (month - 1) + delta;
  int y = total >= 0 ? total / 12 : -((-total + 11) / 12);
  return YearMonth{y, total - y * 12 + 1};
}

namespace corpus {
namespace {

Document document_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("expected a JSON object");
  Document d;
  d.id = j.at("id").get<std::string>();
  d.text = j.at("text").get<std::string>();
  if (j.contains("label") && !j["label"].is_null()) d.label = parse_label(j["label"].get<std::string>());
  if (j.contains("source") && !j["source"].is_null()) d.source = j["source"].get<std::string>();
  if (j.contains("date") && !j["date"].is_null()) d.date = YearMonth::parse(j["date"].get<std::string>());
  if (d.id.empty()) throw ConfigError("empty id");
  if (text::trim(d.text).empty()) throw ConfigError("document " + d.id + " has empty text");
  return d;
}

void check_unique(const std::vector<Document>& docs) {
  std::unordered_set<std::string_view> ids;
  for (const auto& d : docs) {
    if (!ids.insert(d.id).second) throw ConfigError("duplicate id " + d.id);
  }
}

std::vector<Document> load_text_dir(const std::filesystem::path& dir) {
  auto manifest_path = dir / "labels.tsv";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw ConfigError("missing label manifest " + manifest_path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (text::trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() < 2) {
      throw ConfigError(manifest_path.string() + ":" + std::to_string(line_no) +
                        ": expected <file>\\t<label>[\\t<source>[\\t<date>]]");
    }
    try {
      std::ifstream in(dir / fields[0], std::ios::binary);
      if (!in) throw ConfigError("cannot open " + (dir / fields[0]).string());
      std::stringstream body;
      body << in.rdbuf();
      Document d;
      d.id = std::filesystem::path(fields[0]).stem().string();
      d.text = body.str();
      d.label = parse_label(fields[1]);
      if (fields.size() > 2) d.source = fields[2];
      if (fields.size() > 3 && !fields[3].empty()) d.date = YearMonth::parse(fields[3]);
      if (text::trim(d.text).empty()) throw ConfigError("document " + d.id + " has empty text");
      docs.push_back(std::move(d));
    } catch (const ConfigError& e) {
      throw ConfigError(manifest_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  check_unique(docs);
  return docs;
}

}  // namespace

std::vector<Document> read_jsonl(std::istream& in, std::string_view origin) {
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Document d;
    try {
      d = document_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": malformed line: " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(d.id).second) throw ConfigError("duplicate id " + d.id);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset not found: " + path.string());
  if (format == DatasetFormat::text_dir) return load_text_dir(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_jsonl(in, path.string());
}

std::string to_jsonl_line(const Document& doc) {
  json j{{"id", doc.id}, {"text", doc.text}, {"label", to_string(doc.label)}, {"source", doc.source}};
  if (doc.date) j["date"] = doc.date->str();
  return j.dump();
}

void write_jsonl(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& d : docs) out << to_jsonl_line(d) << '\n';
}

std::vector<SequenceSample> extract_sequences(const Document& doc, std::size_t n_seq,
                                              std::size_t words_per_seq) {
  if (n_seq == 0 || words_per_seq == 0) throw ConfigError("n_seq and words_per_seq must be > 0");
  auto words = text::split_whitespace(doc.text);
  const std::size_t required = n_seq * words_per_seq;
  if (words.size() < required) {
    throw DegenerateDataError("document " + doc.id + " has " + std::to_string(words.size()) +
                              " words; " + std::to_string(required) + " required");
  }
  std::vector<SequenceSample> out;
  out.reserve(n_seq);
  for (std::size_t i = 0; i < n_seq; ++i) {
    std::size_t start = i * words_per_seq;
    std::span<const std::string_view> slice(words.data() + start, words_per_seq);
    out.push_back(SequenceSample{doc.id, i, start, start + words_per_seq, text::join(slice), doc.label});
  }
  return out;
}

Document trim_edges(const Document& doc, double fraction) {
  if (!(fraction >= 0.0 && fraction < 0.5)) throw ConfigError("trim fraction must be in [0, 0.5)");
  auto words = text::split_whitespace(doc.text);
  auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(words.size())));
  Document out = doc;
  std::span<const std::string_view> middle(words.data() + cut, words.size() - 2 * cut);
  out.text = text::join(middle);
  return out;
}

Document truncate_words(const Document& doc, std::size_t max_words) {
  auto words = text::split_whitespace(doc.text);
  Document out = doc;
  std::span<const std::string_view> head(words.data(), std::min(max_words, words.size()));
  out.text = text::join(head);
  return out;
}

std::vector<Document> rdd_sample(const std::vector<Document>& corpus, YearMonth cutoff,
                                 int window_months, const RddOptions& options) {
  if (window_months < 1) throw ConfigError("RDD window must be >= 1 month");
  const YearMonth lo = cutoff.plus_months(-window_months);
  const YearMonth hi = cutoff.plus_months(window_months);
  std::vector<Document> out;
  std::size_t n_members = 0, n_nonmembers = 0;
  for (const auto& d : corpus) {
    if (!d.date) throw ConfigError("document " + d.id + " has no date");
    Label label;
    if (*d.date >= lo && *d.date < cutoff) {
      label = Label::member;
    } else if (*d.date >= cutoff && *d.date < hi) {
      label = Label::non_member;
    } else {
      continue;
    }
    if (text::count_words(d.text) < options.min_words) continue;
    Document kept = truncate_words(d, options.truncate_to);
    kept.label = label;
    (label == Label::member ? n_members : n_nonmembers)++;
    out.push_back(std::move(kept));
  }
  if (n_members == 0 || n_nonmembers == 0) {
    throw DegenerateDataError("RDD sample around " + cutoff.str() + " has " + std::to_string(n_members) +
                              " members and " + std::to_string(n_nonmembers) +
                              " non-members; use a wider window");
  }
  return out;
}

std::vector<CorpusSplit> make_splits(const std::vector<Document>& docs, double train_fraction,
                                     std::size_t n_runs, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
  std::vector<std::string> members, nonmembers;
  for (const auto& d : docs) {
    if (d.label == Label::member) members.push_back(d.id);
    if (d.label == Label::non_member) nonmembers.push_back(d.id);
  }
  if (members.empty() || nonmembers.empty()) {
    throw DegenerateDataError("splits need both classes (" + std::to_string(members.size()) + " members, " +
                              std::to_string(nonmembers.size()) + " non-members)");
  }
  const std::size_t per_class = std::min(members.size(), nonmembers.size());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(per_class)));
  if (n_train == 0 || n_train == per_class) {
    throw DegenerateDataError("balanced class size " + std::to_string(per_class) +
                              " too small for a non-empty train and eval side");
  }

  std::vector<CorpusSplit> splits;
  for (std::size_t run = 0; run < n_runs; ++run) {
    Rng rng = make_rng(seed, run);
    auto m = members;
    auto n = nonmembers;
    std::shuffle(m.begin(), m.end(), rng);
    std::shuffle(n.begin(), n.end(), rng);
    CorpusSplit split;
    split.run_index = run;
    for (std::size_t i = 0; i < per_class; ++i) {
      auto& side = i < n_train ? split.train_ids : split.eval_ids;
      side.push_back(m[i]);
      side.push_back(n[i]);
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

CanaryDataset build_canary_dataset(const CanarySpec& spec, Provider& generator, std::size_t n_members,
                                   std::size_t n_nonmembers) {
  if (spec.length_tokens == 0) throw ConfigError("canary length_tokens must be > 0");
  if (spec.n_rep < 1) throw ConfigError("canary n_rep must be >= 1");
  if (n_members == 0 || n_nonmembers == 0) throw ConfigError("canary counts must be > 0");
  if (spec.perplexity_band && !(spec.perplexity_band->first < spec.perplexity_band->second)) {
    throw ConfigError("perplexity band requires low < high");
  }

  std::vector<std::string> canaries;
  std::unordered_set<std::string> seen;
  const std::size_t total = n_members + n_nonmembers;
  for (std::size_t c = 0; c < total; ++c) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < spec.max_attempts_per_canary && !accepted; ++attempt) {
      GenerateRequest req;
      req.prompt = "";
      req.n_candidates = 1;
      req.top_k = spec.top_k;
      req.temperature = spec.temperature;
      req.max_new_tokens = spec.length_tokens;
      req.seed = derive_seed(spec.seed, c * spec.max_attempts_per_canary + attempt);
      auto candidates = generator.generate(req);
      if (candidates.empty()) continue;
      std::string canary(text::trim(candidates.front()));
      if (canary.empty() || seen.contains(canary)) continue;
      if (spec.perplexity_band) {
        double ppl = std::exp(sequence_loss(generator.score(canary)));
        if (ppl < spec.perplexity_band->first || ppl >= spec.perplexity_band->second) continue;
      }
      seen.insert(canary);
      canaries.push_back(std::move(canary));
      accepted = true;
    }
    if (!accepted) {
      throw DegenerateDataError("canary " + std::to_string(c) + ": retry budget of " +
                                std::to_string(spec.max_attempts_per_canary) + " exhausted");
    }
  }

  CanaryDataset out;
  out.members.assign(canaries.begin(), canaries.begin() + static_cast<std::ptrdiff_t>(n_members));
  out.non_members.assign(canaries.begin() + static_cast<std::ptrdiff_t>(n_members), canaries.end());
  out.injection_lines.reserve(spec.n_rep * n_members);
  for (std::size_t r = 0; r < spec.n_rep; ++r) {
    out.injection_lines.insert(out.injection_lines.end(), out.members.begin(), out.members.end());
  }
  return out;
}

}  // namespace corpus
}  // namespace mia
