#pragma once

// Converters from public benchmark release layouts to the JSONL dataset format.
//
//   wikimia   one JSON object per line: {"input": str, "label": 0|1}
//             -> id "wikimia-<n>", text = input, label 1 = member, source "wikimia"
//   bookmia   one JSON object per line: {"book_id", "book", "snippet_id", "snippet", "label": 0|1}
//             -> id "<book_id>-<snippet_id>", text = snippet, label 1 = member, source = book
//   mimir     two files (members, non-members), each either a JSON array of strings or
//             JSON lines holding a string or an object with "text"
//             -> ids "member-<n>" / "nonmember-<n>", source "mimir"
//
// Input lines are counted from 1 in error messages; blank lines are skipped.

#include <filesystem>
#include <string_view>
#include <vector>

#include "mia/corpus.hpp"

namespace mia::convert {

std::vector<Document> wikimia(const std::filesystem::path& path);
std::vector<Document> bookmia(const std::filesystem::path& path);
std::vector<Document> mimir(const std::filesystem::path& members, const std::filesystem::path& non_members);

}  // namespace mia::convert
