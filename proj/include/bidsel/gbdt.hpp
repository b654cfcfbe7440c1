#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace bidsel {

enum class Objective { binary_logistic, squared_error };

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& s);

struct Hyperparameters {
  double learning_rate = 0.1;
  int max_depth = 4;
  int n_rounds = 100;
  double gamma = 0.0;          // minimum gain to accept a split, loss units
  double subsample = 1.0;      // row-sampling fraction per round, (0,1]
  double lambda = 1.0;         // leaf L2 regularization
  double min_child_weight = 1.0;
  // Initial prediction. NaN means the objective default: probability 0.5
  // (margin 0) for logistic, the label mean for squared error.
  double base_score = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;

  void validate(Objective objective) const;
  nlohmann::json to_json() const;
  static Hyperparameters from_json(const nlohmann::json& j);
};

// Regression-tree node: internal nodes route x[feature] < threshold to the
// left child and record the split gain; leaves carry an unscaled weight
// (the learning rate is applied at prediction time).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::unique_ptr<TreeNode> left;
  std::unique_ptr<TreeNode> right;
  double leaf_weight = 0.0;

  bool is_leaf() const { return left == nullptr; }
  double value(std::span<const double> row) const;
};

struct GbdtModel {
  Objective objective = Objective::binary_logistic;
  Hyperparameters params;
  std::vector<std::string> feature_names;
  double base_margin = 0.0;
  std::vector<std::unique_ptr<TreeNode>> trees;

  std::size_t n_features() const { return feature_names.size(); }
  double predict_margin(std::span<const double> row) const;
  // Probability in (0,1) for logistic, raw value for squared error.
  double predict_row(std::span<const double> row) const;
  std::vector<double> predict(const std::vector<std::vector<double>>& X) const;

  // Total recorded split gain per feature; never-split features get 0.
  std::vector<double> gain_importance() const;

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);
};

// Exact greedy gradient boosting. Split candidates are midpoints between
// consecutive distinct sorted feature values; a split is accepted only if
// its gain is >= gamma and both children reach min_child_weight hessian sum.
GbdtModel fit_gbdt(const std::vector<std::vector<double>>& X,
                   const std::vector<double>& y, const Hyperparameters& params,
                   Objective objective,
                   std::vector<std::string> feature_names = {});

}  // namespace bidsel
