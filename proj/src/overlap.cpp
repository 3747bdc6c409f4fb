#include "mia/overlap.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_set>

#include "mia/errors.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

namespace mia::overlap {
namespace {

constexpr char kMagic[4] = {'M', 'I', 'A', 'G'};
constexpr std::uint16_t kFormatVersion = 1;

std::string gram_text(std::span<const std::string> gram) {
  std::string s;
  for (std::size_t i = 0; i < gram.size(); ++i) {
    if (i) s.push_back(' ');
    s += gram[i];
  }
  return s;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ConfigError("truncated n-gram index file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::uint64_t fingerprint(std::span<const std::string> words) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& w : words) {
    for (unsigned char c : w) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1f;  // word separator
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

NGramIndex::NGramIndex(std::size_t n, std::vector<std::uint64_t> fingerprints, std::size_t source_doc_count)
    : n_(n), grams_(std::move(fingerprints)), source_doc_count_(source_doc_count) {
  if (n_ == 0) throw ConfigError("n-gram order must be >= 1");
  std::sort(grams_.begin(), grams_.end());
  grams_.erase(std::unique(grams_.begin(), grams_.end()), grams_.end());
}

bool NGramIndex::contains(std::uint64_t fp, std::span<const std::string> gram) const {
  if (!std::binary_search(grams_.begin(), grams_.end(), fp)) return false;
  if (!exact_) return true;
  auto it = exact_->find(fp);
  return it != exact_->end() && it->second == gram_text(gram);
}

void NGramIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic, 4);
  write_le<std::uint16_t>(out, kFormatVersion);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(n_));
  write_le<std::uint64_t>(out, grams_.size());
  for (auto g : grams_) write_le<std::uint64_t>(out, g);
}

NGramIndex NGramIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError(path.string() + ": not an n-gram index");
  auto version = read_le<std::uint16_t>(in);
  if (version != kFormatVersion) throw ConfigError(path.string() + ": unsupported index version " + std::to_string(version));
  auto n = read_le<std::uint16_t>(in);
  auto count = read_le<std::uint64_t>(in);
  std::vector<std::uint64_t> grams(count);
  for (auto& g : grams) g = read_le<std::uint64_t>(in);
  if (!std::is_sorted(grams.begin(), grams.end())) throw ConfigError(path.string() + ": fingerprints not sorted");
  return NGramIndex(n, std::move(grams), 0);
}

NGramIndex build_index(std::span<const Document> docs, std::size_t n, bool exact) {
  if (n == 0) throw ConfigError("n-gram order must be >= 1");
  std::size_t n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  n_threads = std::max<std::size_t>(1, std::min(n_threads, docs.size()));
  std::vector<std::vector<std::uint64_t>> shards(n_threads);
  auto fill = [&](std::size_t shard) {
    auto& out = shards[shard];
    for (std::size_t d = shard; d < docs.size(); d += n_threads) {
      auto words = text::lexical_words(docs[d].text);
      for (std::size_t i = 0; i + n <= words.size(); ++i) out.push_back(fingerprint(std::span(words).subspan(i, n)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  };
  if (n_threads == 1) {
    fill(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t s = 0; s < n_threads; ++s) pool.emplace_back(fill, s);
  }
  std::vector<std::uint64_t> merged;
  for (auto& s : shards) merged.insert(merged.end(), s.begin(), s.end());
  NGramIndex index(n, std::move(merged), docs.size());

  if (exact) {
    index.exact_.emplace();
    std::unordered_set<std::uint64_t> collided;
    for (const auto& d : docs) {
      auto words = text::lexical_words(d.text);
      for (std::size_t i = 0; i + n <= words.size(); ++i) {
        auto gram = std::span(words).subspan(i, n);
        auto fp = fingerprint(gram);
        auto txt = gram_text(gram);
        auto [it, inserted] = index.exact_->try_emplace(fp, txt);
        if (!inserted && it->second != txt) collided.insert(fp);
      }
    }
    index.collisions_ = collided.size();
  }
  return index;
}

OverlapResult overlap_fraction(std::string_view text, const NGramIndex& index) {
  OverlapResult r;
  auto words = text::lexical_words(text);
  const std::size_t n = index.n();
  if (words.size() < n) {
    r.too_short = true;
    return r;
  }
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    auto gram = std::span(words).subspan(i, n);
    auto fp = fingerprint(gram);
    if (!seen.insert(fp).second) continue;
    ++r.n_grams;
    if (index.contains(fp, gram)) ++r.n_hits;
  }
  r.fraction = static_cast<double>(r.n_hits) / static_cast<double>(r.n_grams);
  return r;
}

DedupPreset parse_preset(std::string_view name) {
  auto sep = name.find('_');
  if (sep == std::string_view::npos) throw ConfigError("dedup preset must look like <n>_<max overlap>: " + std::string(name));
  DedupPreset p;
  p.name = std::string(name);
  auto n_part = name.substr(0, sep);
  auto [ptr, ec] = std::from_chars(n_part.data(), n_part.data() + n_part.size(), p.n);
  if (ec != std::errc{} || ptr != n_part.data() + n_part.size() || p.n == 0) {
    throw ConfigError("bad n in dedup preset " + std::string(name));
  }
  try {
    std::size_t used = 0;
    std::string frac(name.substr(sep + 1));
    p.max_overlap = std::stod(frac, &used);
    if (used != frac.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("bad overlap threshold in dedup preset " + std::string(name));
  }
  if (!(p.max_overlap >= 0.0 && p.max_overlap <= 1.0)) throw ConfigError("dedup threshold must be in [0, 1]");
  return p;
}

const std::vector<DedupPreset>& builtin_presets() {
  static const std::vector<DedupPreset> presets{{"13_0.8", 13, 0.8}, {"7_0.2", 7, 0.2}};
  return presets;
}

DedupResult dedup(std::span<const Document> nonmembers, const NGramIndex& index, const DedupPreset& preset) {
  if (index.n() != preset.n) {
    throw ConfigError("index built with n=" + std::to_string(index.n()) + " but preset " + preset.name + " needs n=" +
                      std::to_string(preset.n));
  }
  DedupResult r;
  for (const auto& d : nonmembers) {
    (overlap_fraction(d.text, index).fraction > preset.max_overlap ? r.removed : r.kept).push_back(d);
  }
  return r;
}

std::vector<ShiftStep> shift_after_dedup(std::span<const Document> members, std::span<const Document> nonmembers,
                                         std::span<const DedupPreset> presets, const bow::AuditOptions& options,
                                         std::uint64_t seed) {
  auto run_audit = [&](ShiftStep& step, std::span<const Document> kept) {
    std::vector<Document> docs(members.begin(), members.end());
    docs.insert(docs.end(), kept.begin(), kept.end());
    try {
      step.audit = bow::audit(docs, options, seed, step.preset);
    } catch (const DegenerateDataError& e) {
      step.degenerate = e.what();
    }
  };

  std::vector<ShiftStep> steps;
  ShiftStep baseline{"none", nonmembers.size(), 0, std::nullopt, {}};
  run_audit(baseline, nonmembers);
  steps.push_back(std::move(baseline));

  std::map<std::size_t, NGramIndex> indexes;
  for (const auto& preset : presets) {
    auto it = indexes.find(preset.n);
    if (it == indexes.end()) it = indexes.emplace(preset.n, build_index(members, preset.n)).first;
    auto result = dedup(nonmembers, it->second, preset);
    ShiftStep step{preset.name, result.kept.size(), result.removed.size(), std::nullopt, {}};
    if (result.kept.empty()) {
      step.degenerate = "preset removed every non-member";
    } else {
      run_audit(step, result.kept);
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

nlohmann::json to_json(const ShiftStep& s) {
  nlohmann::json j{{"preset", s.preset}, {"kept", s.kept}, {"removed", s.removed}};
  if (s.audit) j["audit"] = bow::to_json(*s.audit);
  if (!s.degenerate.empty()) j["degenerate"] = s.degenerate;
  return j;
}

}  // namespace mia::overlap
