#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bidsel/features.hpp"
#include "bidsel/gbdt.hpp"
#include "bidsel/policy.hpp"

#include "json.hpp"

namespace bidsel {

// Additive attribution of one prediction: base_value plus the per-feature
// contributions reconstructs the prediction (local accuracy). For logistic
// models everything is on the probability scale.
struct ShapExplanation {
  double base_value = 0.0;
  std::vector<double> contributions;  // aligned to model feature order
  double prediction = 0.0;

  nlohmann::json to_json(const std::vector<std::string>& names,
                         std::span<const double> row) const;
};

constexpr std::size_t kMaxExactShapleyFeatures = 20;
constexpr std::size_t kDefaultShapleyBackground = 256;

// Exact Shapley values by enumeration over all feature subsets, with the
// interventional value function: v(S) averages the model over background
// rows whose features in S are replaced by the explained row's values.
// Cost is O(2^m * background); refuses m > 20.
ShapExplanation shapley_explain(const GbdtModel& model, std::span<const double> row,
                                const FeatureMatrix& background,
                                std::size_t max_background = kDefaultShapleyBackground,
                                std::uint64_t seed = 0);

struct ShapSummary {
  std::vector<std::string> features;          // model feature order
  std::vector<double> mean_abs_contribution;  // aligned to features
  std::vector<std::size_t> ranking;           // feature indices, descending
  std::vector<std::vector<double>> contributions;  // n_rows x n_features
  std::vector<std::vector<double>> values;         // raw feature values
};

ShapSummary shapley_summary(const GbdtModel& model, const FeatureMatrix& rows,
                            const FeatureMatrix& background,
                            std::size_t max_background = kDefaultShapleyBackground,
                            std::uint64_t seed = 0);

struct GainsStep {
  std::string removed;  // empty on the first step
  std::vector<std::string> remaining;
  double accuracy = 0.0;
  double delta_realistic = 0.0;
};

// One evaluation per feature-set size, from the full set down to a single
// feature; each step drops the lowest-gain feature of the previous fit.
struct GainsTrace {
  std::vector<GainsStep> steps;
  std::size_t selected_step = 0;  // max accuracy, ties -> fewer features

  const std::vector<std::string>& selected_features() const {
    return steps[selected_step].remaining;
  }
};

GainsTrace gains_loop(const FeatureMatrix& train, const FeatureMatrix& test,
                      const Hyperparameters& params, Objective objective,
                      const DecisionPolicy& metric_policy,
                      Decision fallback = Decision::stochastic);

}  // namespace bidsel
