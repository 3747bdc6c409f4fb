#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include "mia/corpus.hpp"
#include "mia/provider.hpp"

namespace testing {

inline mia::ScoredSequence seq_from_logprobs(const std::vector<double>& lps, std::string text = "t") {
  mia::ScoredSequence s;
  s.model_id = "test";
  s.text = std::move(text);
  for (std::size_t i = 0; i < lps.size(); ++i) {
    mia::TokenRecord t;
    t.token_id = static_cast<std::int64_t>(i);
    t.token_text = "x";
    t.logprob = lps[i];
    s.tokens.push_back(t);
  }
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mia_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_docs(const std::filesystem::path& path, const std::vector<mia::Document>& docs) {
  std::ofstream out(path);
  mia::corpus::write_jsonl(out, docs);
}

}  // namespace testing
