#include <doctest.h>

#include <numeric>
#include <random>

#include "mia/errors.hpp"
#include "mia/forest.hpp"
#include "mia/stats.hpp"

using namespace mia;
using forest::DecisionTree;
using forest::FeatureMatrix;
using forest::ForestParams;
using forest::RandomForest;
using forest::TreeNode;

namespace {

struct Data {
  FeatureMatrix x;
  std::vector<Label> y;
};

/// Feature 0 = label marker, the rest noise.
Data marker_data(std::size_t n_per_class, std::size_t n_noise, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::poisson_distribution<int> pois(3.0);
  Data d;
  d.x = FeatureMatrix(0, n_noise + 1);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    bool member = i % 2 == 0;
    std::vector<double> row{member ? 1.0 + pois(g) : 0.0};
    for (std::size_t j = 0; j < n_noise; ++j) row.push_back(pois(g));
    d.x.append_row(row);
    d.y.push_back(member ? Label::member : Label::non_member);
  }
  return d;
}

Data noise_data(std::size_t n_per_class, std::size_t n_features, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::poisson_distribution<int> pois(2.0);
  Data d;
  d.x = FeatureMatrix(0, n_features);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < n_features; ++j) row.push_back(pois(g));
    d.x.append_row(row);
    d.y.push_back(i < n_per_class ? Label::member : Label::non_member);
  }
  std::shuffle(d.y.begin(), d.y.end(), g);
  return d;
}

TreeNode leaf(double p, std::size_t n, std::size_t depth = 0) {
  TreeNode t;
  t.member_probability = p;
  t.n_samples = n;
  t.depth = depth;
  return t;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("defaults") {
  ForestParams p;
  CHECK(p.n_trees == 500);
  CHECK(p.max_depth == 2);
  CHECK(p.min_samples_leaf == 10);
  CHECK_FALSE(p.max_features.has_value());
}

TEST_CASE("perfect marker feature dominates and separates held-out data") {
  auto train = marker_data(150, 15, 1);
  auto test = marker_data(100, 15, 2);
  auto rf = RandomForest::train(train.x, train.y, {}, 7);
  CHECK(rf.trees().size() == 500);
  const auto& imp = rf.feature_importance();
  auto top = std::max_element(imp.begin(), imp.end()) - imp.begin();
  CHECK(top == 0);
  for (std::size_t j = 1; j < imp.size(); ++j) CHECK(imp[0] > imp[j]);
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0));
  auto scores = rf.predict(test.x);
  CHECK(stats::auc(scores, test.y) == 1.0);
}

TEST_CASE("structural constraints hold for every tree") {
  auto d = marker_data(100, 10, 3);
  for (std::size_t depth : {1, 2, 3}) {
    ForestParams p;
    p.n_trees = 60;
    p.max_depth = depth;
    auto rf = RandomForest::train(d.x, d.y, p, 11);
    for (const auto& t : rf.trees()) {
      CHECK(t.depth() <= depth);
      for (const auto& node : t.nodes()) {
        if (node.is_leaf()) CHECK(node.n_samples >= 10);
        CHECK(node.member_probability >= 0.0);
        CHECK(node.member_probability <= 1.0);
      }
    }
  }
}

TEST_CASE("same seed gives identical forests") {
  auto d = noise_data(60, 8, 4);
  ForestParams p;
  p.n_trees = 50;
  auto a = RandomForest::train(d.x, d.y, p, 5);
  auto b = RandomForest::train(d.x, d.y, p, 5);
  REQUIRE(a.trees().size() == b.trees().size());
  for (std::size_t i = 0; i < a.trees().size(); ++i) CHECK(a.trees()[i] == b.trees()[i]);
  CHECK(a.feature_importance() == b.feature_importance());
  auto c = RandomForest::train(d.x, d.y, p, 6);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.trees().size(); ++i) any_diff |= !(a.trees()[i] == c.trees()[i]);
  CHECK(any_diff);
}

TEST_CASE("shuffled labels give near-chance held-out AUC") {
  auto train = noise_data(200, 20, 8);
  auto test = noise_data(200, 20, 9);
  auto rf = RandomForest::train(train.x, train.y, {}, 10);
  double a = stats::auc(rf.predict(test.x), test.y);
  CHECK(a >= 0.40);
  CHECK(a <= 0.60);
}

TEST_CASE("prediction of hand-built forests") {
  // unanimous trees voting 1
  std::vector<DecisionTree> ones(5, DecisionTree({leaf(1.0, 20)}));
  auto f1 = RandomForest::from_trees(ones, 2);
  CHECK(f1.predict(std::vector<double>{0, 0}) == 1.0);
  // stumps with the class prior
  std::vector<DecisionTree> prior(3, DecisionTree({leaf(0.3, 100)}));
  CHECK(RandomForest::from_trees(prior, 2).predict(std::vector<double>{5, 5}) == doctest::Approx(0.3));
  // a single depth-1 tree traced by hand: x0 <= 1.5 -> 0.2, else 0.9
  TreeNode root;
  root.feature = 0;
  root.threshold = 1.5;
  root.left = 1;
  root.right = 2;
  root.n_samples = 40;
  DecisionTree t({root, leaf(0.2, 20, 1), leaf(0.9, 20, 1)});
  auto f = RandomForest::from_trees({t}, 1);
  CHECK(f.predict(std::vector<double>{1.0}) == 0.2);
  CHECK(f.predict(std::vector<double>{1.5}) == 0.2);
  CHECK(f.predict(std::vector<double>{2.0}) == 0.9);
  CHECK(t.depth() == 1);
  CHECK_THROWS_AS(f.predict(std::vector<double>{1.0, 2.0}), ConfigError);
  for (double v : f.feature_importance()) CHECK(v == 0.0);
}

TEST_CASE("training preconditions") {
  FeatureMatrix x(0, 2);
  for (int i = 0; i < 30; ++i) x.append_row(std::vector<double>{double(i), 1.0});
  std::vector<Label> one_class(30, Label::member);
  CHECK_THROWS_AS(RandomForest::train(x, one_class, {}, 1), DegenerateDataError);
  std::vector<Label> short_labels(10, Label::member);
  CHECK_THROWS_AS(RandomForest::train(x, short_labels, {}, 1), ConfigError);
  CHECK_THROWS_AS(x.append_row(std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("constant features produce no splits and zero importances") {
  FeatureMatrix x(0, 3);
  std::vector<Label> y;
  for (int i = 0; i < 40; ++i) {
    x.append_row(std::vector<double>{1.0, 2.0, 3.0});
    y.push_back(i % 2 ? Label::member : Label::non_member);
  }
  ForestParams p;
  p.n_trees = 20;
  auto rf = RandomForest::train(x, y, p, 3);
  for (const auto& t : rf.trees()) CHECK(t.nodes().size() == 1);
  for (double v : rf.feature_importance()) CHECK(v == 0.0);
}

}
