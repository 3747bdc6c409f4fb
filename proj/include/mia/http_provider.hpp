#pragma once

#include <chrono>
#include <string>

#include "mia/provider.hpp"

namespace mia {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
};

/// Client for the provider wire protocol: JSON over POST with `X-MIA-Proto: 1`.
/// Transport errors and 5xx responses are retried with exponential backoff;
/// 4xx responses fail immediately with the server's message, and 501 maps to
/// CapabilityError.
class HttpProvider : public Provider {
 public:
  HttpProvider(std::string endpoint, std::string model_id, RetryPolicy retry = {});

  const std::string& model_id() const override { return model_id_; }

 protected:
  ScoredSequence do_score(std::string_view text, const std::optional<std::string>& prefix) override;
  std::vector<std::string> do_generate(const GenerateRequest& request) override;
  std::vector<std::string> do_fill_mask(const FillMaskRequest& request) override;

 private:
  std::string post(const std::string& path, const std::string& body) const;

  std::string endpoint_;
  std::string model_id_;
  RetryPolicy retry_;
};

}  // namespace mia
