#include <doctest.h>

#include <map>
#include <random>

#include "mia/bow.hpp"
#include "mia/errors.hpp"
#include "mia/synthetic.hpp"

using namespace mia;

namespace {

Document doc(std::string id, std::string text, Label l = Label::member) {
  return Document{std::move(id), std::move(text), l, "", std::nullopt};
}

/// Straightforward second counter: lowercase, split on anything not [A-Za-z0-9] or >= 0x80.
std::map<std::string, std::uint32_t> naive_counts(const std::string& s) {
  std::map<std::string, std::uint32_t> out;
  std::string cur;
  for (char ch : s + " ") {
    unsigned char c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      cur += ch;
    } else if (c >= 'A' && c <= 'Z') {
      cur += static_cast<char>(c - 'A' + 'a');
    } else if (!cur.empty()) {
      ++out[cur];
      cur.clear();
    }
  }
  return out;
}

std::vector<Document> marker_corpus(std::size_t n, std::uint64_t seed) {
  auto model = synthetic::UnigramModel::zipf(300, 1.0);
  std::vector<Document> docs;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back(doc("m" + std::to_string(i), model.sample_text(rng, 40) + " In 2023", Label::member));
    docs.push_back(doc("n" + std::to_string(i), model.sample_text(rng, 40), Label::non_member));
  }
  return docs;
}

}  // namespace

TEST_SUITE("bow") {

TEST_CASE("ubiquitous words get document frequency one") {
  std::vector<Document> docs;
  for (int i = 0; i < 20; ++i) docs.push_back(doc(std::to_string(i), "the item " + std::to_string(i)));
  auto v = bow::build_vocabulary(docs);
  REQUIRE(v.index_of("the") >= 0);
  CHECK(v.doc_frequency[v.index_of("the")] == 1.0);
  CHECK(v.index_of("7") >= 0);  // 1 of 20 documents is exactly the 5% threshold
}

TEST_CASE("rare words fall under the threshold") {
  std::vector<Document> docs;
  for (int i = 0; i < 100; ++i) docs.push_back(doc(std::to_string(i), i == 0 ? "common rare" : "common"));
  auto v = bow::build_vocabulary(docs);
  CHECK(v.index_of("rare") < 0);
  CHECK(v.index_of("common") >= 0);
  for (double f : v.doc_frequency) CHECK(f >= 0.05);
}

TEST_CASE("casefolding merges variants and order is lexicographic") {
  std::vector<Document> docs{doc("a", "The zebra"), doc("b", "the Apple"), doc("c", "THE apple zebra")};
  auto v = bow::build_vocabulary(docs);
  std::vector<std::string> expected{"apple", "the", "zebra"};
  CHECK(v.words == expected);
  CHECK_THROWS_AS(bow::build_vocabulary(std::vector<Document>{doc("a", "x")}), DegenerateDataError);
  std::vector<Document> sparse;
  for (int i = 0; i < 100; ++i) sparse.push_back(doc(std::to_string(i), "u" + std::to_string(i)));
  CHECK_THROWS_AS(bow::build_vocabulary(sparse), DegenerateDataError);
}

TEST_CASE("featurize counts") {
  std::vector<Document> docs{doc("1", "a b c"), doc("2", "a b c")};
  auto v = bow::build_vocabulary(docs);
  auto f = bow::featurize("a a b", v);
  CHECK(f == std::vector<std::uint32_t>{2, 1, 0});
  CHECK(bow::featurize("", v) == std::vector<std::uint32_t>{0, 0, 0});
  CHECK(bow::featurize("zzz qqq", v) == std::vector<std::uint32_t>{0, 0, 0});
}

TEST_CASE("featurize agrees with an independent counter") {
  std::mt19937_64 g(12);
  const std::vector<std::string> pieces{"Alpha", "beta", "don't", "2023", "caf\xc3\xa9", "x-ray", "..", "\t", "\n", "GAMMA,", "beta."};
  std::vector<Document> docs;
  for (int i = 0; i < 100; ++i) {
    std::string s;
    int n = 5 + int(g() % 40);
    for (int k = 0; k < n; ++k) s += pieces[g() % pieces.size()] + (g() % 3 ? " " : "");
    docs.push_back(doc(std::to_string(i), s));
  }
  auto v = bow::build_vocabulary(docs, 0.0);
  for (const auto& d : docs) {
    auto f = bow::featurize(d.text, v);
    auto naive = naive_counts(d.text);
    for (std::size_t j = 0; j < v.size(); ++j) {
      auto it = naive.find(v.words[j]);
      CHECK(f[j] == (it == naive.end() ? 0u : it->second));
    }
  }
}

TEST_CASE("featurize is independent of document order") {
  auto docs = marker_corpus(20, 1);
  auto v = bow::build_vocabulary(docs);
  auto a = bow::featurize_all(docs, v);
  std::vector<std::size_t> perm(docs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(4));
  std::vector<Document> shuffled;
  for (auto i : perm) shuffled.push_back(docs[i]);
  auto b = bow::featurize_all(shuffled, v);
  for (std::size_t r = 0; r < perm.size(); ++r) {
    for (std::size_t c = 0; c < v.size(); ++c) CHECK(b.at(r, c) == a.at(perm[r], c));
  }
}

TEST_CASE("vocabulary ignores documents outside the training set") {
  auto docs = marker_corpus(30, 2);
  std::vector<Document> train(docs.begin(), docs.begin() + 40);
  auto before = bow::build_vocabulary(train);
  auto v = bow::featurize_all(docs, before);  // featurizing eval docs must not touch the vocabulary
  (void)v;
  auto after = bow::build_vocabulary(train);
  CHECK(before.words == after.words);
  CHECK(before.doc_frequency == after.doc_frequency);
}

TEST_CASE("marker corpus audit is perfect and names the marker") {
  auto docs = marker_corpus(100, 3);
  bow::AuditOptions o;
  o.forest.n_trees = 100;
  auto r = bow::audit(docs, o, 1, "marker");
  CHECK(r.auc_mean == 1.0);
  CHECK(r.auc_std == 0.0);
  CHECK(r.n_runs == 5);
  CHECK(r.run_aucs.size() == 5);
  REQUIRE(!r.top_words.empty());
  CHECK((r.top_words[0].first == "2023" || r.top_words[0].first == "in"));
  bool has_year = false;
  for (std::size_t i = 0; i < std::min<std::size_t>(2, r.top_words.size()); ++i) has_year |= r.top_words[i].first == "2023";
  CHECK(has_year);
}

TEST_CASE("train and predict") {
  auto docs = marker_corpus(60, 5);
  auto v = bow::build_vocabulary(docs);
  auto x = bow::featurize_all(docs, v);
  std::vector<Label> y;
  for (const auto& d : docs) y.push_back(d.label);
  forest::ForestParams p;
  p.n_trees = 50;
  auto model = bow::train(v, x, y, 3, p);
  auto idx = model.vocabulary.index_of("2023");
  REQUIRE(idx >= 0);
  const auto& imp = model.forest.feature_importance();
  CHECK(std::max_element(imp.begin(), imp.end()) - imp.begin() == idx);
  CHECK(bow::predict(model, bow::featurize("w1 w2 in 2023", v)) > 0.5);
  CHECK(bow::predict(model, bow::featurize("w1 w2", v)) < 0.5);
  CHECK_THROWS_AS(bow::predict(model, std::vector<std::uint32_t>{1, 2}), ConfigError);
}

TEST_CASE("audit report JSON") {
  bow::AuditResult r;
  r.dataset = "wiki";
  r.auc_mean = 0.75;
  r.auc_std = 0.01;
  r.n_runs = 5;
  r.top_words = {{"2014", 0.3}, {"2023", 0.2}};
  r.run_aucs = {0.74, 0.76, 0.75, 0.75, 0.75};
  auto j = bow::to_json(r);
  CHECK(j["dataset"] == "wiki");
  CHECK(j["top_words"][0][0] == "2014");
  CHECK(j["top_words"][0][1] == 0.3);
  auto back = bow::audit_result_from_json(j);
  CHECK(back.top_words == r.top_words);
  CHECK(back.auc_mean == r.auc_mean);
  CHECK(back.n_runs == 5);
}

TEST_CASE("audit needs both classes") {
  std::vector<Document> docs{doc("a", "x y"), doc("b", "x z")};
  CHECK_THROWS_AS(bow::audit(docs, {}, 1), DegenerateDataError);
}

}
