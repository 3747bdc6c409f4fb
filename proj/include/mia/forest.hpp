#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mia/corpus.hpp"

namespace mia::forest {

/// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void append_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ForestParams {
  std::size_t n_trees = 500;
  std::size_t max_depth = 2;
  std::size_t min_samples_leaf = 10;
  std::optional<std::size_t> max_features;  // default ceil(sqrt(F))
};

struct TreeNode {
  static constexpr std::int32_t kLeaf = -1;

  std::int32_t feature = kLeaf;
  double threshold = 0.0;  // rows with value <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double member_probability = 0.0;  // fraction of members among training samples reaching the node
  std::size_t n_samples = 0;
  std::size_t depth = 0;

  bool is_leaf() const { return feature == kLeaf; }
};

class DecisionTree {
 public:
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> row) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const;

  bool operator==(const DecisionTree&) const;

 private:
  std::vector<TreeNode> nodes_;
};

/// Random forest of Gini-impurity classification trees. Each tree is grown on
/// a bootstrap sample (with multiplicity) and searches, at each node, a
/// random subset of max_features features that are not constant on the node;
/// thresholds are midpoints between adjacent distinct values.
class RandomForest {
 public:
  static RandomForest train(const FeatureMatrix& features, std::span<const Label> labels,
                            const ForestParams& params, std::uint64_t seed);

  /// Assembles a forest from already-built trees (importances all zero).
  static RandomForest from_trees(std::vector<DecisionTree> trees, std::size_t n_features);

  /// Mean of the trees' leaf member-probabilities.
  double predict(std::span<const double> row) const;
  std::vector<double> predict(const FeatureMatrix& features) const;

  /// Mean decrease in impurity, normalized per tree, averaged, and normalized
  /// to sum to 1 (all zero when no tree split).
  const std::vector<double>& feature_importance() const { return importance_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }

 private:
  std::vector<DecisionTree> trees_;
  std::vector<double> importance_;
  std::size_t n_features_ = 0;
};

}  // namespace mia::forest
