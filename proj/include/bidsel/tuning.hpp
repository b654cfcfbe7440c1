#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bidsel/features.hpp"
#include "bidsel/gbdt.hpp"
#include "bidsel/policy.hpp"

namespace bidsel {

// Sampling ranges for the randomized search. Defaults bracket the values any
// reasonable configuration of this model family lands in; learning_rate is
// drawn log-uniformly, the integer parameters uniformly.
struct SearchSpace {
  double learning_rate_min = 0.01;
  double learning_rate_max = 0.3;
  int max_depth_min = 2;
  int max_depth_max = 8;
  int n_rounds_min = 50;
  int n_rounds_max = 500;
  double gamma_min = 0.0;
  double gamma_max = 10.0;
  double subsample_min = 0.5;
  double subsample_max = 1.0;

  void validate() const;
};

struct Trial {
  Hyperparameters params;
  std::vector<double> fold_scores;
  // Mean fold score; empty when the trial failed to fit.
  std::optional<double> mean_score;
};

struct TuneResult {
  std::vector<Trial> trials;
  std::size_t best_index = 0;  // max mean score, ties -> earliest trial

  const Hyperparameters& best() const { return trials[best_index].params; }
};

// Seeded partition into k folds whose sizes differ by at most one. Each fold
// acts as the validation set once while the other k-1 folds train.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k,
                                                  std::uint64_t seed);

// Score is mean fold accuracy at threshold 0.5 for classification and
// negative MSE for regression.
TuneResult random_search(const FeatureMatrix& train, const SearchSpace& space,
                         int n_iter, int k, Objective objective,
                         std::uint64_t seed);

struct BootstrapStats {
  double a_mean = 0.0;
  double a_std = 0.0;      // sample std over resamples
  double delta_mean = 0.0;
  double delta_std = 0.0;
};

// B seeded resamples with replacement of the test days; accuracy and
// realistic gap per resample.
BootstrapStats bootstrap_eval(std::span<const Decision> decisions,
                              std::span<const int> best,
                              std::span<const double> beta_det,
                              std::span<const double> beta_stoch, int B,
                              std::uint64_t seed,
                              Decision fallback = Decision::stochastic);

}  // namespace bidsel
