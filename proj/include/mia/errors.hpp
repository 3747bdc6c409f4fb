#pragma once

#include <stdexcept>
#include <string>

namespace mia {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, bad config values, violated preconditions on user input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Model access failed: transport, server-side refusal, missing capability.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Backend does not implement the requested endpoint (e.g. no sampling, no fill-mask).
class CapabilityError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// The data cannot support the requested computation (single class, too few words, ...).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mia
