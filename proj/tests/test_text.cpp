#include <doctest.h>

#include <set>

#include "mia/compress.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

using namespace mia;

TEST_SUITE("text") {

TEST_CASE("whitespace words") {
  auto w = text::split_whitespace("  a\tb\n\nc  ");
  REQUIRE(w.size() == 3);
  CHECK(w[0] == "a");
  CHECK(w[2] == "c");
  CHECK(text::count_words("") == 0);
  CHECK(text::count_words("one two  three") == 3);
}

TEST_CASE("lexical words casefold and split on apostrophes") {
  auto w = text::lexical_words("The the THE, didn't wasn't 2023!");
  std::vector<std::string> expected{"the", "the", "the", "didn", "t", "wasn", "t", "2023"};
  CHECK(w == expected);
  CHECK(text::lexical_words("").empty());
  CHECK(text::lexical_words("...--").empty());
}

TEST_CASE("lexical words keep non-ascii bytes inside words") {
  auto w = text::lexical_words("caf\xc3\xa9 na\xc3\xafve");
  REQUIRE(w.size() == 2);
  CHECK(w[0] == "caf\xc3\xa9");
}

TEST_CASE("trim and join") {
  CHECK(text::trim("  x y \n") == "x y");
  std::vector<std::string> parts{"a", "b", "c"};
  CHECK(text::join(parts) == "a b c");
  CHECK(text::join(parts, ",") == "a,b,c");
}

TEST_CASE("zlib sizes match an independent compressor") {
  // sizes from Python's zlib.compress(data, -1)
  CHECK(zlib_compressed_size("hello world") == 19);
  CHECK(zlib_compressed_size("The quick brown fox jumps over the lazy dog") == 50);
  CHECK(zlib_compressed_size("a") == 9);
  std::string ab;
  for (int i = 0; i < 500; ++i) ab += "ab";
  CHECK(zlib_compressed_size(ab) == 18);
}

TEST_CASE("derived seeds are deterministic and distinct") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s) {
    for (std::uint64_t k = 0; k < 50; ++k) seen.insert(derive_seed(s, k));
  }
  CHECK(seen.size() == 2500);
  auto a = make_rng(9, 3);
  auto b = make_rng(9, 3);
  CHECK(a() == b());
}

}
