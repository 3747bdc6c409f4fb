#pragma once

// JSON shapes of the provider HTTP protocol (X-MIA-Proto: 1) and of cache files.

#include <string>
#include <vector>

#include "json.hpp"
#include "mia/provider.hpp"

namespace mia::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kProtocolHeader = "X-MIA-Proto";

nlohmann::json token_to_json(const TokenRecord& t);
TokenRecord token_from_json(const nlohmann::json& j);

/// {"tokens": [...]} response body.
nlohmann::json score_response(const std::vector<TokenRecord>& tokens);
std::vector<TokenRecord> parse_score_response(const nlohmann::json& j);

nlohmann::json score_request(const std::string& model, const std::string& text,
                             const std::optional<std::string>& prefix);
nlohmann::json generate_request(const std::string& model, const GenerateRequest& r);
nlohmann::json fill_mask_request(const std::string& model, const FillMaskRequest& r);

GenerateRequest parse_generate_request(const nlohmann::json& j);
FillMaskRequest parse_fill_mask_request(const nlohmann::json& j);

/// Full ScoredSequence (cache files and reports).
nlohmann::json scored_to_json(const ScoredSequence& s);
ScoredSequence scored_from_json(const nlohmann::json& j);

}  // namespace mia::wire
