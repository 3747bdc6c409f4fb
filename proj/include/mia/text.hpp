#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mia::text {

/// Maximal runs of non-whitespace characters ("words" for sequence extraction).
std::vector<std::string_view> split_whitespace(std::string_view s);

std::size_t count_words(std::string_view s);

std::string join(std::span<const std::string_view> words, std::string_view sep = " ");
std::string join(std::span<const std::string> words, std::string_view sep = " ");

/// ASCII lowercase; non-ASCII bytes are passed through untouched.
std::string lowercase(std::string_view s);

/// Lexical words for count features and n-gram shingles: maximal runs of
/// alphanumeric characters, lowercased. Any non-ASCII byte counts as
/// alphanumeric so UTF-8 letters stay inside words. Apostrophes separate
/// words ("didn't" -> "didn", "t").
std::vector<std::string> lexical_words(std::string_view s);

std::string_view trim(std::string_view s);

}  // namespace mia::text
