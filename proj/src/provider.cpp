#include "mia/provider.hpp"

#include <algorithm>
#include <mutex>
#include <thread>

#include "mia/cache.hpp"
#include "mia/errors.hpp"
#include "mia/http_provider.hpp"
#include "mia/synthetic.hpp"
#include "mia/text.hpp"

namespace mia {

double sequence_loss(const ScoredSequence& s) {
  if (s.tokens.empty()) throw DegenerateDataError("loss of a sequence with no tokens");
  double sum = 0.0;
  for (const auto& t : s.tokens) sum += t.logprob;
  return -sum / static_cast<double>(s.tokens.size());
}

class Provider::InFlightGuard {
 public:
  explicit InFlightGuard(Provider& p) : p_(p) {
    p_.requests_.fetch_add(1);
    std::size_t now = p_.in_flight_.fetch_add(1) + 1;
    std::size_t peak = p_.peak_in_flight_.load();
    while (now > peak && !p_.peak_in_flight_.compare_exchange_weak(peak, now)) {
    }
  }
  ~InFlightGuard() { p_.in_flight_.fetch_sub(1); }
  InFlightGuard(const InFlightGuard&) = delete;
  InFlightGuard& operator=(const InFlightGuard&) = delete;

 private:
  Provider& p_;
};

ScoredSequence Provider::score(std::string_view text, std::optional<std::string> prefix) {
  if (text::trim(text).empty()) throw ConfigError("score: text is empty");
  if (prefix && prefix->empty()) prefix.reset();
  InFlightGuard guard(*this);
  return do_score(text, prefix);
}

std::vector<std::string> Provider::generate(const GenerateRequest& request) {
  if (request.n_candidates == 0) throw ConfigError("generate: n_candidates must be >= 1");
  if (!(request.temperature > 0.0)) throw ConfigError("generate: temperature must be > 0");
  InFlightGuard guard(*this);
  return do_generate(request);
}

std::vector<std::string> Provider::fill_mask(const FillMaskRequest& request) {
  if (!(request.swap_fraction > 0.0 && request.swap_fraction <= 1.0)) {
    throw ConfigError("fill_mask: swap_fraction must be in (0, 1]");
  }
  if (request.n_neighbors == 0) return {};
  InFlightGuard guard(*this);
  return do_fill_mask(request);
}

std::vector<std::string> Provider::do_generate(const GenerateRequest&) {
  throw CapabilityError("model " + model_id() + " does not support sampling");
}

std::vector<std::string> Provider::do_fill_mask(const FillMaskRequest&) {
  throw CapabilityError("model " + model_id() + " does not support masked infilling");
}

BatchResult batch_score(Provider& provider, const std::vector<ScoreItem>& items,
                        std::size_t max_in_flight) {
  if (items.empty()) throw ConfigError("batch_score: no items");
  BatchResult out;
  out.results.resize(items.size());

  std::mutex failures_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
      try {
        out.results[i] = provider.score(items[i].text, items[i].prefix);
      } catch (const std::exception& e) {
        std::lock_guard lock(failures_mutex);
        out.failures.push_back({i, e.what()});
      }
    }
  };

  std::size_t n_workers = std::clamp<std::size_t>(max_in_flight, 1, items.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  std::sort(out.failures.begin(), out.failures.end(),
            [](const BatchFailure& a, const BatchFailure& b) { return a.index < b.index; });
  return out;
}

ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "http") return ProviderKind::http;
  if (s == "synthetic-unigram") return ProviderKind::synthetic_unigram;
  if (s == "synthetic-boosted") return ProviderKind::synthetic_boosted;
  throw ConfigError("unknown provider kind: " + std::string(s));
}

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::http: return "http";
    case ProviderKind::synthetic_unigram: return "synthetic-unigram";
    case ProviderKind::synthetic_boosted: return "synthetic-boosted";
  }
  return "?";
}

std::unique_ptr<Provider> make_provider(const ProviderHandle& handle) {
  if (handle.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  std::unique_ptr<Provider> backend;
  switch (handle.kind) {
    case ProviderKind::http:
      if (!handle.endpoint || handle.endpoint->empty()) {
        throw ConfigError("http provider " + handle.model_id + " requires an endpoint");
      }
      backend = std::make_unique<HttpProvider>(*handle.endpoint, handle.model_id);
      break;
    case ProviderKind::synthetic_unigram:
      backend = std::make_unique<synthetic::UnigramProvider>(
          handle.model_id, synthetic::UnigramModel::zipf(handle.vocab_size, handle.zipf_exponent));
      break;
    case ProviderKind::synthetic_boosted:
      backend = std::make_unique<synthetic::BoostedProvider>(
          handle.model_id, synthetic::UnigramModel::zipf(handle.vocab_size, handle.zipf_exponent),
          handle.boost, handle.member_texts);
      break;
  }
  if (handle.cache_dir) {
    return std::make_unique<CachingProvider>(std::move(backend), *handle.cache_dir);
  }
  return backend;
}

}  // namespace mia
