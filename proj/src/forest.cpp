#include "mia/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "mia/errors.hpp"
#include "mia/rng.hpp"

namespace mia::forest {

void FeatureMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw ConfigError("feature row length mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

double DecisionTree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].member_probability;
}

std::size_t DecisionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

bool DecisionTree::operator==(const DecisionTree& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
        a.member_probability != b.member_probability || a.n_samples != b.n_samples) {
      return false;
    }
  }
  return true;
}

namespace {

double gini(double members, double total) {
  if (total <= 0.0) return 0.0;
  double p = members / total;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

struct Split {
  std::int32_t feature = TreeNode::kLeaf;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const std::uint8_t> y, const ForestParams& params,
              std::size_t max_features, Rng& rng, std::vector<double>& importance)
      : x_(x), y_(y), params_(params), max_features_(max_features), rng_(rng), importance_(importance) {}

  std::vector<TreeNode> build(std::vector<std::size_t> sample) {
    grow(std::move(sample), 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t> sample, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    std::size_t members = 0;
    for (auto i : sample) members += y_[i];
    {
      auto& node = nodes_.back();
      node.n_samples = sample.size();
      node.depth = depth;
      node.member_probability = sample.empty() ? 0.0 : static_cast<double>(members) / static_cast<double>(sample.size());
    }
    if (depth >= params_.max_depth || sample.size() < 2 * params_.min_samples_leaf || members == 0 ||
        members == sample.size()) {
      return id;
    }
    Split best = find_split(sample, members);
    if (best.feature == TreeNode::kLeaf) return id;

    importance_[static_cast<std::size_t>(best.feature)] += best.decrease;
    std::vector<std::size_t> left, right;
    for (auto i : sample) {
      (x_.at(i, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(i);
    }
    sample.clear();
    sample.shrink_to_fit();
    std::int32_t l = grow(std::move(left), depth + 1);
    std::int32_t r = grow(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& sample, std::size_t members) {
    const std::size_t n_features = x_.cols();
    const double n = static_cast<double>(sample.size());
    const double parent = n * gini(static_cast<double>(members), n);
    std::vector<std::size_t> features(n_features);
    std::iota(features.begin(), features.end(), std::size_t{0});

    Split best;
    std::vector<std::pair<double, std::uint8_t>> column(sample.size());
    std::size_t visited = 0;
    for (std::size_t k = 0; k < n_features && visited < max_features_; ++k) {
      std::size_t pick = std::uniform_int_distribution<std::size_t>(k, n_features - 1)(rng_);
      std::swap(features[k], features[pick]);
      const std::size_t f = features[k];

      for (std::size_t i = 0; i < sample.size(); ++i) column[i] = {x_.at(sample[i], f), y_[sample[i]]};
      auto [lo, hi] = std::minmax_element(column.begin(), column.end());
      if (lo->first == hi->first) continue;  // constant on this node; does not count toward max_features
      ++visited;
      std::sort(column.begin(), column.end());

      double left_members = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_members += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        if (nl < static_cast<double>(params_.min_samples_leaf) || nr < static_cast<double>(params_.min_samples_leaf)) {
          continue;
        }
        const double right_members = static_cast<double>(members) - left_members;
        const double decrease = parent - nl * gini(left_members, nl) - nr * gini(right_members, nr);
        if (decrease > best.decrease + 1e-12) {
          best.feature = static_cast<std::int32_t>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          best.decrease = decrease;
        }
      }
    }
    return best;
  }

  const FeatureMatrix& x_;
  std::span<const std::uint8_t> y_;
  const ForestParams& params_;
  std::size_t max_features_;
  Rng& rng_;
  std::vector<double>& importance_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RandomForest RandomForest::train(const FeatureMatrix& features, std::span<const Label> labels,
                                 const ForestParams& params, std::uint64_t seed) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  if (labels.size() != n) throw ConfigError("forest: label count does not match feature rows");
  if (n == 0 || f == 0) throw DegenerateDataError("forest: empty feature matrix");
  if (params.n_trees == 0) throw ConfigError("forest: n_trees must be >= 1");
  if (params.min_samples_leaf == 0) throw ConfigError("forest: min_samples_leaf must be >= 1");

  std::vector<std::uint8_t> y(n);
  std::size_t members = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == Label::unlabeled) throw ConfigError("forest: training labels must be member or non-member");
    y[i] = labels[i] == Label::member;
    members += y[i];
  }
  if (members == 0 || members == n) throw DegenerateDataError("forest: training data has a single class");

  const std::size_t max_features = std::clamp<std::size_t>(
      params.max_features.value_or(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(f))))), 1, f);

  std::vector<std::optional<DecisionTree>> trees(params.n_trees);
  std::vector<std::vector<double>> per_tree_importance(params.n_trees);
  auto grow_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      Rng rng = make_rng(seed, t);
      std::vector<std::size_t> sample(n);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& s : sample) s = pick(rng);
      std::vector<double> importance(f, 0.0);
      TreeBuilder builder(features, y, params, max_features, rng, importance);
      trees[t].emplace(builder.build(std::move(sample)));
      per_tree_importance[t] = std::move(importance);
    }
  };

  std::size_t n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  n_threads = std::min(n_threads, params.n_trees);
  if (n_threads <= 1) {
    grow_range(0, params.n_trees);
  } else {
    std::vector<std::jthread> pool;
    std::size_t chunk = (params.n_trees + n_threads - 1) / n_threads;
    for (std::size_t b = 0; b < params.n_trees; b += chunk) {
      pool.emplace_back(grow_range, b, std::min(params.n_trees, b + chunk));
    }
  }

  RandomForest forest;
  forest.n_features_ = f;
  forest.importance_.assign(f, 0.0);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    forest.trees_.push_back(std::move(*trees[t]));
    const auto& imp = per_tree_importance[t];
    double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0) {
      for (std::size_t j = 0; j < f; ++j) forest.importance_[j] += imp[j] / total;
    }
  }
  double total = std::accumulate(forest.importance_.begin(), forest.importance_.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : forest.importance_) v /= total;
  }
  return forest;
}

RandomForest RandomForest::from_trees(std::vector<DecisionTree> trees, std::size_t n_features) {
  if (trees.empty()) throw ConfigError("forest: no trees");
  RandomForest forest;
  forest.trees_ = std::move(trees);
  forest.n_features_ = n_features;
  forest.importance_.assign(n_features, 0.0);
  return forest;
}

double RandomForest::predict(std::span<const double> row) const {
  if (row.size() != n_features_) {
    throw ConfigError("forest: feature vector has " + std::to_string(row.size()) + " entries, model expects " +
                      std::to_string(n_features_));
  }
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(row);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::predict(const FeatureMatrix& features) const {
  std::vector<double> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) out[i] = predict(features.row(i));
  return out;
}

}  // namespace mia::forest
