#include "mia/http_provider.hpp"

#include <thread>

#include "httplib.h"
#include "mia/errors.hpp"
#include "mia/wire.hpp"

namespace mia {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be a URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    e.base_path = url.substr(path_start);
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  }
  return e;
}

std::string server_message(const httplib::Result& res) {
  try {
    auto j = json::parse(res->body);
    if (j.contains("error")) return j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump();
  } catch (const json::parse_error&) {
  }
  return res->body;
}

}  // namespace

HttpProvider::HttpProvider(std::string endpoint, std::string model_id, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), model_id_(std::move(model_id)), retry_(retry) {
  split_endpoint(endpoint_);
}

std::string HttpProvider::post(const std::string& path, const std::string& body) const {
  Endpoint ep = split_endpoint(endpoint_);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(600);
  httplib::Headers headers{{wire::kProtocolHeader, std::to_string(wire::kProtocolVersion)}};

  std::string last_error;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    auto res = client.Post(ep.base_path + path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      return res->body;
    } else if (res->status == 501) {
      throw CapabilityError(model_id_ + " " + path + ": " + server_message(res));
    } else if (res->status < 500) {
      throw ProviderError(model_id_ + " " + path + " -> HTTP " + std::to_string(res->status) +
                          ": " + server_message(res));
    } else {
      last_error = "HTTP " + std::to_string(res->status) + ": " + server_message(res);
    }
    if (attempt < retry_.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw ProviderError(model_id_ + " " + path + " failed after " + std::to_string(retry_.attempts) +
                      " attempts: " + last_error);
}

ScoredSequence HttpProvider::do_score(std::string_view text, const std::optional<std::string>& prefix) {
  std::string t(text);
  auto body = post("/v1/score", wire::score_request(model_id_, t, prefix).dump());
  try {
    return ScoredSequence{model_id_, t, prefix, wire::parse_score_response(json::parse(body))};
  } catch (const json::exception& e) {
    throw ProviderError("malformed /v1/score response: " + std::string(e.what()));
  }
}

std::vector<std::string> HttpProvider::do_generate(const GenerateRequest& request) {
  auto body = post("/v1/generate", wire::generate_request(model_id_, request).dump());
  try {
    return json::parse(body).at("candidates").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ProviderError("malformed /v1/generate response: " + std::string(e.what()));
  }
}

std::vector<std::string> HttpProvider::do_fill_mask(const FillMaskRequest& request) {
  auto body = post("/v1/fill_mask", wire::fill_mask_request(model_id_, request).dump());
  try {
    return json::parse(body).at("neighbors").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ProviderError("malformed /v1/fill_mask response: " + std::string(e.what()));
  }
}

}  // namespace mia
