#include "mia/cache.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "mia/errors.hpp"
#include "mia/wire.hpp"

namespace mia {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(std::string_view endpoint, const json& request) {
  std::string material = "mia-cache/" + std::to_string(wire::kProtocolVersion);
  material.push_back('\0');
  material.append(endpoint);
  material.push_back('\0');
  material.append(request.dump());  // object keys are sorted, so this is canonical
  return sha256_hex(material);
}

std::optional<json> ResponseCache::get(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error&) {
    return std::nullopt;  // torn or foreign file: refetch and overwrite
  }
}

void ResponseCache::put(const std::string& key, const json& response) const {
  auto final_path = dir_ / (key + ".json");
  auto tmp_path = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache file " + tmp_path.string());
    out << response.dump();
  }
  std::filesystem::rename(tmp_path, final_path);
}

std::mutex& ResponseCache::lock_for(const std::string& key) const {
  return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
}

CachingProvider::CachingProvider(std::unique_ptr<Provider> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), cache_(std::move(dir)) {}

template <typename Fetch>
json CachingProvider::cached(std::string_view endpoint, const json& request, Fetch&& fetch) {
  std::string k = ResponseCache::key(endpoint, request);
  std::lock_guard lock(cache_.lock_for(k));
  if (auto hit = cache_.get(k)) {
    hits_.fetch_add(1);
    return *hit;
  }
  misses_.fetch_add(1);
  json response = fetch();
  cache_.put(k, response);
  return response;
}

ScoredSequence CachingProvider::do_score(std::string_view text,
                                         const std::optional<std::string>& prefix) {
  std::string t(text);
  json response = cached("/v1/score", wire::score_request(model_id(), t, prefix), [&] {
    return wire::score_response(inner_->score(t, prefix).tokens);
  });
  return ScoredSequence{model_id(), t, prefix, wire::parse_score_response(response)};
}

std::vector<std::string> CachingProvider::do_generate(const GenerateRequest& request) {
  json response = cached("/v1/generate", wire::generate_request(model_id(), request), [&] {
    return json{{"candidates", inner_->generate(request)}};
  });
  return response.at("candidates").get<std::vector<std::string>>();
}

std::vector<std::string> CachingProvider::do_fill_mask(const FillMaskRequest& request) {
  json response = cached("/v1/fill_mask", wire::fill_mask_request(model_id(), request), [&] {
    return json{{"neighbors", inner_->fill_mask(request)}};
  });
  return response.at("neighbors").get<std::vector<std::string>>();
}

}  // namespace mia
