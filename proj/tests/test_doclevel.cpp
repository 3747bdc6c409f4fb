#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "mia/doclevel.hpp"
#include "mia/errors.hpp"
#include "mia/rng.hpp"
#include "mia/stats.hpp"

using namespace mia;

namespace {

constexpr auto M = Label::member;
constexpr auto N = Label::non_member;

double brute_bacc(const std::vector<double>& s, const std::vector<Label>& l, double t) {
  double tp = 0, tn = 0, m = 0, n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] == M) {
      ++m;
      if (s[i] >= t) ++tp;
    } else {
      ++n;
      if (s[i] < t) ++tn;
    }
  }
  return 0.5 * (tp / m + tn / n);
}

/// Scans every candidate in increasing order; returns (best accuracy, first tau reaching it).
std::pair<double, double> exhaustive_scan(const std::vector<double>& s, const std::vector<Label>& l) {
  std::vector<double> v = s;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<double> cands{v.front()};
  for (std::size_t i = 0; i + 1 < v.size(); ++i) cands.push_back(0.5 * (v[i] + v[i + 1]));
  cands.push_back(std::numeric_limits<double>::infinity());
  double best = -1, best_tau = 0;
  for (double t : cands) {
    double a = brute_bacc(s, l, t);
    if (a > best + 1e-12) {
      best = a;
      best_tau = t;
    }
  }
  return {best, best_tau};
}

void random_instance(Rng& rng, std::size_t n, std::vector<double>& s, std::vector<Label>& l, bool ties) {
  s.clear();
  l.clear();
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 6);
  for (std::size_t i = 0; i < n; ++i) {
    Label lab = i % 2 == 0 ? M : N;
    double shift = lab == M ? 0.5 : 0.0;
    s.push_back(ties ? coarse(rng) + (lab == M ? 1 : 0) : g(rng) + shift);
    l.push_back(lab);
  }
}

}  // namespace

TEST_SUITE("doclevel") {

TEST_CASE("fit_threshold on a separable instance") {
  std::vector<double> s{0.9, 0.8, 0.1, 0.2};
  std::vector<Label> l{M, M, N, N};
  auto fit = doclevel::fit_threshold(s, l);
  CHECK(fit.tau == doctest::Approx(0.5));
  CHECK(fit.balanced_accuracy == 1.0);
}

TEST_CASE("fit_threshold with all scores equal") {
  std::vector<double> s(6, 0.3);
  std::vector<Label> l{M, N, M, N, M, N};
  auto fit = doclevel::fit_threshold(s, l);
  CHECK(fit.tau == 0.3);
  CHECK(fit.balanced_accuracy == 0.5);
}

TEST_CASE("fit_threshold errors") {
  std::vector<double> s{1, 2};
  std::vector<Label> same{M, M};
  CHECK_THROWS_AS(doclevel::fit_threshold(s, same), DegenerateDataError);
  std::vector<Label> short_l{M};
  CHECK_THROWS_AS(doclevel::fit_threshold(s, short_l), ConfigError);
}

TEST_CASE("fit_threshold matches an exhaustive scan") {
  Rng rng(1);
  std::vector<double> s;
  std::vector<Label> l;
  for (int rep = 0; rep < 300; ++rep) {
    std::size_t n = 2 + rng() % 200;
    random_instance(rng, n, s, l, rep % 2 == 1);
    auto fit = doclevel::fit_threshold(s, l);
    auto [best, tau] = exhaustive_scan(s, l);
    CHECK(fit.balanced_accuracy == doctest::Approx(best).epsilon(1e-12));
    CHECK(doclevel::balanced_accuracy(s, l, fit.tau) == doctest::Approx(best).epsilon(1e-12));
    CHECK(fit.tau == tau);
  }
  random_instance(rng, 10000, s, l, false);
  auto fit = doclevel::fit_threshold(s, l);
  CHECK(fit.balanced_accuracy == doctest::Approx(exhaustive_scan(s, l).first).epsilon(1e-12));
}

TEST_CASE("threshold_vote counts") {
  std::vector<double> all(25, 1.0);
  CHECK(doclevel::threshold_vote(all, 0.5) == 1.0);
  std::vector<double> five(25, 0.0);
  std::fill(five.begin(), five.begin() + 5, 1.0);
  CHECK(doclevel::threshold_vote(five, 0.5) == doctest::Approx(0.2));
  CHECK(doclevel::threshold_vote(std::vector<double>{0.5}, 0.5) == 1.0);
  CHECK_THROWS_AS(doclevel::threshold_vote(std::vector<double>{}, 0.0), DegenerateDataError);
}

TEST_CASE("threshold_vote values lie on the 1/k grid and survive monotone transforms") {
  Rng rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> s(25);
    for (auto& x : s) x = g(rng);
    double tau = g(rng);
    double v = doclevel::threshold_vote(s, tau);
    double k = v * 25.0;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
    std::vector<double> t;
    for (double x : s) t.push_back(std::exp(3.0 * x) + 1.0);
    CHECK(doclevel::threshold_vote(t, std::exp(3.0 * tau) + 1.0) == v);
  }
}

TEST_CASE("percentile matches a sort oracle") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = u(rng);
  std::sort(v.begin(), v.end());
  for (double q : {0.0, 5.0, 25.0, 50.0, 75.0, 95.0, 100.0, 33.3}) {
    double pos = q / 100.0 * 999.0;
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min<std::size_t>(lo + 1, 999);
    double expect = v[lo] + (pos - lo) * (v[hi] - v[lo]);
    CHECK(doclevel::percentile(v, q) == doctest::Approx(expect).epsilon(1e-12));
  }
  std::vector<double> one{4.0};
  CHECK(doclevel::percentile(one, 50) == 4.0);
}

TEST_CASE("AggFE of a constant vector") {
  // every token: logprob -2, single-token reference table -> constant v
  auto chunk = testing::seq_from_logprobs({-2, -2, -2, -2});
  for (auto& t : chunk.tokens) t.token_id = 7;
  doclevel::TokenFrequency freq({{7, 10}}, 1);
  doclevel::DocFeatureConfig cfg;
  cfg.normalization = doclevel::Normalization::max_norm_tf;
  std::vector<ScoredSequence> chunks{chunk, chunk};
  auto f = doclevel::doc_features(chunks, cfg, freq);
  REQUIRE(f.size() == 9);
  double c = -2.0 - freq.max_log_freq();
  std::vector<double> expect{c, c, c, 0, c, c, c, c, c};
  for (std::size_t i = 0; i < 9; ++i) CHECK(f[i] == doctest::Approx(expect[i]));
}

TEST_CASE("token frequency smoothing") {
  doclevel::TokenFrequency freq({{1, 3}, {2, 1}}, 10);
  // N = 4, V = 10
  CHECK(freq.log_freq(1) == doctest::Approx(std::log(4.0 / 14.0)));
  CHECK(freq.log_freq(99) == doctest::Approx(std::log(1.0 / 14.0)));
  CHECK(freq.max_log_freq() == doctest::Approx(std::log(4.0 / 14.0)));
  CHECK_THROWS_AS(doclevel::TokenFrequency({{1, 1}, {2, 1}}, 1), ConfigError);
}

TEST_CASE("RatioNormTF subtracts the per-token log frequency") {
  auto chunk = testing::seq_from_logprobs({-1.0, -3.0});
  chunk.tokens[0].token_id = 1;
  chunk.tokens[1].token_id = 2;
  doclevel::TokenFrequency freq({{1, 3}, {2, 1}}, 10);
  doclevel::DocFeatureConfig cfg;
  std::vector<ScoredSequence> chunks{chunk};
  auto f = doclevel::doc_features(chunks, cfg, freq);
  double v1 = -1.0 - std::log(4.0 / 14.0), v2 = -3.0 - std::log(2.0 / 14.0);
  CHECK(f[0] == doctest::Approx(std::min(v1, v2)));
  CHECK(f[1] == doctest::Approx(std::max(v1, v2)));
  CHECK(f[2] == doctest::Approx((v1 + v2) / 2));
  CHECK(f[3] == doctest::Approx(std::abs(v1 - v2) / 2));
}

TEST_CASE("HistFE sums to one and clamps") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(-40.0, 5.0);
  std::vector<double> lps(500);
  for (auto& x : lps) x = std::min(0.0, u(rng));
  auto chunk = testing::seq_from_logprobs(lps);
  doclevel::TokenFrequency freq({}, 100);
  doclevel::DocFeatureConfig cfg;
  cfg.aggregation = doclevel::Aggregation::hist_fe;
  cfg.normalization = doclevel::Normalization::max_norm_tf;
  std::vector<ScoredSequence> chunks{chunk};
  auto f = doclevel::doc_features(chunks, cfg, freq);
  REQUIRE(f.size() == 50);
  double sum = 0;
  for (double x : f) {
    CHECK(x >= 0.0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK_THROWS_AS(doclevel::doc_features(std::vector<ScoredSequence>{}, cfg, freq), DegenerateDataError);
}

TEST_CASE("feature config validation and names") {
  doclevel::DocFeatureConfig cfg;
  cfg.hist_bins = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.hist_bins = 50;
  cfg.chunk_tokens = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(doclevel::parse_normalization(doclevel::to_string(doclevel::Normalization::max_norm_tf)) ==
        doclevel::Normalization::max_norm_tf);
  CHECK(doclevel::parse_aggregation(doclevel::to_string(doclevel::Aggregation::hist_fe)) ==
        doclevel::Aggregation::hist_fe);
  CHECK_THROWS_AS(doclevel::parse_aggregation("mean"), ConfigError);
}

TEST_CASE("chunk_words") {
  auto c = doclevel::chunk_words("a b c d e", 2);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == "a b");
  CHECK(c[2] == "e");
  CHECK(doclevel::chunk_words("", 3).empty());
}

TEST_CASE("meta-classifier: leaked label gives AUC 1, random features stay near 0.5") {
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  auto make = [&](std::size_t n, bool leak, forest::FeatureMatrix& x, std::vector<Label>& y) {
    for (std::size_t i = 0; i < n; ++i) {
      Label lab = i % 2 == 0 ? M : N;
      std::vector<double> row{g(rng), g(rng), g(rng), g(rng)};
      if (leak) row[2] = lab == M ? 1.0 : 0.0;
      x.append_row(row);
      y.push_back(lab);
    }
  };
  forest::ForestParams p;
  p.n_trees = 100;
  {
    forest::FeatureMatrix tx, ex;
    std::vector<Label> ty, ey;
    make(200, true, tx, ty);
    make(200, true, ex, ey);
    CHECK(stats::auc(doclevel::meta_classify(tx, ty, ex, 1, p), ey) == 1.0);
  }
  {
    forest::FeatureMatrix tx, ex;
    std::vector<Label> ty, ey;
    make(400, false, tx, ty);
    make(400, false, ex, ey);
    double a = stats::auc(doclevel::meta_classify(tx, ty, ex, 1, p), ey);
    CHECK(a >= 0.4);
    CHECK(a <= 0.6);
  }
}

TEST_CASE("doc splits are stratified and disjoint") {
  std::vector<Label> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 3 == 0 ? M : N);
  doclevel::Protocol p{16, 8, 3};
  auto splits = doclevel::make_doc_splits(labels, p, 9);
  REQUIRE(splits.size() == 3);
  for (const auto& s : splits) {
    CHECK(s.train.size() == 16);
    CHECK(s.eval.size() == 8);
    std::size_t tm = 0;
    for (auto i : s.train) tm += labels[i] == M;
    CHECK(tm == 8);
    for (auto i : s.eval) CHECK(std::find(s.train.begin(), s.train.end(), i) == s.train.end());
  }
  CHECK(doclevel::make_doc_splits(labels, p, 9)[1].eval == splits[1].eval);

  doclevel::Protocol big;
  try {
    doclevel::make_doc_splits(labels, big, 1);
    FAIL("expected an error");
  } catch (const DegenerateDataError& e) {
    CHECK(std::string(e.what()).find("1000") != std::string::npos);
  }
}

TEST_CASE("threshold vote evaluation on separated documents") {
  Rng rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<doclevel::DocSequences> docs;
  for (int d = 0; d < 80; ++d) {
    doclevel::DocSequences ds;
    ds.doc_id = std::to_string(d);
    ds.label = d % 2 == 0 ? M : N;
    for (int k = 0; k < 25; ++k) ds.seq_scores.push_back(g(rng) + (ds.label == M ? 0.8 : 0.0));
    docs.push_back(ds);
  }
  auto r = doclevel::evaluate_threshold_vote(docs, {40, 40, 3}, 11);
  CHECK(r.split_aucs.size() == 3);
  CHECK(r.taus.size() == 3);
  CHECK(r.auc_mean > 0.95);
  auto back = doclevel::doclevel_report_from_json(doclevel::to_json(r));
  CHECK(back.split_aucs == r.split_aucs);
  CHECK(back.taus == r.taus);
  CHECK(back.protocol.eval_docs == 40);
  CHECK(back.method == "threshold_vote");
}

}
