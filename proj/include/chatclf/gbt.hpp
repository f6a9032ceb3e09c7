#pragma once

#include <cstdint>
#include <vector>

#include "chatclf/types.hpp"

namespace chatclf {

// Logistic-loss gradient boosting with second-order (Newton) leaf weights and
// histogram split finding. Defaults follow the usual XGBoost settings.
struct GBTConfig {
  int rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double lambda = 1.0;            // L2 penalty on leaf weights
  double gamma = 0.0;             // minimum loss reduction to split
  double min_child_weight = 1.0;  // minimum hessian sum per child
  int max_bin = 256;

  void validate() const;
};

struct TreeNode {
  // Internal node when feature >= 0: rows with x[feature] < threshold go left.
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
  double gain = 0.0;   // loss reduction of this split
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const double* row) const;
};

class GradientBoostedTrees {
 public:
  GradientBoostedTrees() = default;
  GradientBoostedTrees(std::size_t dim, std::vector<RegressionTree> trees)
      : dim_(dim), trees_(std::move(trees)) {}

  static GradientBoostedTrees fit(const Matrix& x, const Labels& y, const GBTConfig& config);

  Vector margin(const Matrix& x) const;
  Vector predict_proba(const Matrix& x) const;

  // Total split gain per feature, summed over every tree.
  std::vector<double> gain_importance() const;
  // Number of splits per feature.
  std::vector<std::size_t> split_counts() const;

  // Mean training log-loss before the first round and after each round.
  const std::vector<double>& training_loss() const { return training_loss_; }

  std::size_t dim() const { return dim_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

 private:
  std::size_t dim_ = 0;
  std::vector<RegressionTree> trees_;
  std::vector<double> training_loss_;
};

}  // namespace chatclf
