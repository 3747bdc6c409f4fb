#include "mia/wire.hpp"

#include "mia/errors.hpp"

namespace mia::wire {

using nlohmann::json;

json token_to_json(const TokenRecord& t) {
  return json{{"id", t.token_id},         {"text", t.token_text}, {"logprob", t.logprob},
              {"dist_mean", t.dist_mean}, {"dist_std", t.dist_std}, {"entropy", t.entropy}};
}

TokenRecord token_from_json(const json& j) {
  TokenRecord t;
  t.token_id = j.at("id").get<std::int64_t>();
  t.token_text = j.at("text").get<std::string>();
  t.logprob = j.at("logprob").get<double>();
  t.dist_mean = j.at("dist_mean").get<double>();
  t.dist_std = j.at("dist_std").get<double>();
  t.entropy = j.at("entropy").get<double>();
  if (t.logprob > 0.0 || t.dist_std < 0.0 || t.entropy < 0.0) {
    throw ProviderError("token record out of range (logprob <= 0, dist_std >= 0, entropy >= 0)");
  }
  return t;
}

json score_response(const std::vector<TokenRecord>& tokens) {
  json arr = json::array();
  for (const auto& t : tokens) arr.push_back(token_to_json(t));
  return json{{"tokens", std::move(arr)}};
}

std::vector<TokenRecord> parse_score_response(const json& j) {
  std::vector<TokenRecord> out;
  for (const auto& t : j.at("tokens")) out.push_back(token_from_json(t));
  return out;
}

json score_request(const std::string& model, const std::string& text,
                   const std::optional<std::string>& prefix) {
  json j{{"model", model}, {"text", text}};
  if (prefix) j["prefix"] = *prefix;
  return j;
}

json generate_request(const std::string& model, const GenerateRequest& r) {
  json j{{"model", model},
         {"prompt", r.prompt},
         {"n", r.n_candidates},
         {"top_k", r.top_k},
         {"temperature", r.temperature},
         {"max_new_tokens", r.max_new_tokens}};
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

json fill_mask_request(const std::string& model, const FillMaskRequest& r) {
  json j{{"model", model},
         {"text", r.text},
         {"n", r.n_neighbors},
         {"swap_fraction", r.swap_fraction},
         {"top_k", r.top_k}};
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

GenerateRequest parse_generate_request(const json& j) {
  GenerateRequest r;
  r.prompt = j.at("prompt").get<std::string>();
  r.n_candidates = j.at("n").get<std::size_t>();
  r.top_k = j.at("top_k").get<std::size_t>();
  r.temperature = j.at("temperature").get<double>();
  r.max_new_tokens = j.at("max_new_tokens").get<std::size_t>();
  if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::uint64_t>();
  return r;
}

FillMaskRequest parse_fill_mask_request(const json& j) {
  FillMaskRequest r;
  r.text = j.at("text").get<std::string>();
  r.n_neighbors = j.at("n").get<std::size_t>();
  r.swap_fraction = j.at("swap_fraction").get<double>();
  r.top_k = j.at("top_k").get<std::size_t>();
  if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::uint64_t>();
  return r;
}

json scored_to_json(const ScoredSequence& s) {
  json j = score_response(s.tokens);
  j["model"] = s.model_id;
  j["text"] = s.text;
  if (s.prefix) j["prefix"] = *s.prefix;
  return j;
}

ScoredSequence scored_from_json(const json& j) {
  ScoredSequence s;
  s.model_id = j.at("model").get<std::string>();
  s.text = j.at("text").get<std::string>();
  if (j.contains("prefix")) s.prefix = j["prefix"].get<std::string>();
  s.tokens = parse_score_response(j);
  return s;
}

}  // namespace mia::wire
