#include "bidsel/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

void SearchSpace::validate() const {
  if (!(learning_rate_min > 0.0 && learning_rate_min <= learning_rate_max &&
        learning_rate_max <= 1.0)) {
    throw ValidationError("invalid learning_rate range");
  }
  if (!(max_depth_min >= 1 && max_depth_min <= max_depth_max)) {
    throw ValidationError("invalid max_depth range");
  }
  if (!(n_rounds_min >= 1 && n_rounds_min <= n_rounds_max)) {
    throw ValidationError("invalid n_rounds range");
  }
  if (!(gamma_min >= 0.0 && gamma_min <= gamma_max)) {
    throw ValidationError("invalid gamma range");
  }
  if (!(subsample_min > 0.0 && subsample_min <= subsample_max &&
        subsample_max <= 1.0)) {
    throw ValidationError("invalid subsample range");
  }
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k,
                                                  std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  if (static_cast<std::size_t>(k) > n) {
    throw ValidationError("k-fold needs at least k rows (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<long>(pos),
                    idx.begin() + static_cast<long>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

namespace {

Hyperparameters draw_params(const SearchSpace& space, std::mt19937_64& rng,
                            std::uint64_t fit_seed) {
  Hyperparameters p;
  std::uniform_real_distribution<double> log_lr(std::log(space.learning_rate_min),
                                                std::log(space.learning_rate_max));
  std::uniform_int_distribution<int> depth(space.max_depth_min, space.max_depth_max);
  std::uniform_int_distribution<int> rounds(space.n_rounds_min, space.n_rounds_max);
  std::uniform_real_distribution<double> gamma(space.gamma_min, space.gamma_max);
  std::uniform_real_distribution<double> subsample(space.subsample_min,
                                                   space.subsample_max);
  p.learning_rate = std::exp(log_lr(rng));
  p.max_depth = depth(rng);
  p.n_rounds = rounds(rng);
  p.gamma = gamma(rng);
  p.subsample = subsample(rng);
  p.seed = fit_seed;
  return p;
}

double fold_score(const FeatureMatrix& fit_part, const FeatureMatrix& val_part,
                  const Hyperparameters& params, Objective objective) {
  const std::vector<double> y = [&] {
    std::vector<double> out(fit_part.n_rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = objective == Objective::binary_logistic
                   ? static_cast<double>(fit_part.best[i])
                   : fit_part.strategy_gap[i];
    }
    return out;
  }();
  GbdtModel model = fit_gbdt(fit_part.rows, y, params, objective, fit_part.spec.names);
  std::vector<double> outputs = model.predict(val_part.rows);
  if (objective == Objective::binary_logistic) {
    auto decisions = decide_all(outputs, DecisionPolicy::threshold(0.5));
    return accuracy(decisions, val_part.best);
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double e = outputs[i] - val_part.strategy_gap[i];
    mse += e * e;
  }
  return -mse / static_cast<double>(outputs.size());
}

}  // namespace

TuneResult random_search(const FeatureMatrix& train, const SearchSpace& space,
                         int n_iter, int k, Objective objective,
                         std::uint64_t seed) {
  space.validate();
  if (n_iter < 1) throw ValidationError("random_search needs n_iter >= 1");
  train.validate();

  const auto folds = kfold_split(train.n_rows(), k, derive_seed(seed, 0));
  std::vector<FeatureMatrix> val_parts, fit_parts;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g == f) continue;
      rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(rest.begin(), rest.end());
    val_parts.push_back(train.select_rows(folds[f]));
    fit_parts.push_back(train.select_rows(rest));
  }

  TuneResult result;
  std::mt19937_64 rng(derive_seed(seed, 1));
  double best_score = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (int t = 0; t < n_iter; ++t) {
    Trial trial;
    trial.params =
        draw_params(space, rng, derive_seed(seed, 2 + static_cast<std::uint64_t>(t)));
    try {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        trial.fold_scores.push_back(
            fold_score(fit_parts[f], val_parts[f], trial.params, objective));
      }
      trial.mean_score = mean(trial.fold_scores);
    } catch (const std::exception&) {
      trial.fold_scores.clear();
      trial.mean_score.reset();  // failing trial recorded, skipped for best
    }
    if (trial.mean_score && (!have_best || *trial.mean_score > best_score)) {
      best_score = *trial.mean_score;
      result.best_index = static_cast<std::size_t>(t);
      have_best = true;
    }
    result.trials.push_back(std::move(trial));
  }
  if (!have_best) throw ValidationError("every search trial failed to fit");
  return result;
}

BootstrapStats bootstrap_eval(std::span<const Decision> decisions,
                              std::span<const int> best,
                              std::span<const double> beta_det,
                              std::span<const double> beta_stoch, int B,
                              std::uint64_t seed, Decision fallback) {
  const std::size_t n = decisions.size();
  if (n == 0) throw ValidationError("bootstrap_eval needs a non-empty test set");
  if (B < 2) throw ValidationError("bootstrap_eval needs B >= 2");
  if (best.size() != n || beta_det.size() != n || beta_stoch.size() != n) {
    throw ValidationError("bootstrap_eval inputs are misaligned");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> accs, deltas;
  accs.reserve(static_cast<std::size_t>(B));
  deltas.reserve(static_cast<std::size_t>(B));
  std::vector<Decision> d(n);
  std::vector<int> b(n);
  std::vector<double> bd(n), bs(n);
  for (int r = 0; r < B; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      d[i] = decisions[j];
      b[i] = best[j];
      bd[i] = beta_det[j];
      bs[i] = beta_stoch[j];
    }
    accs.push_back(accuracy(d, b));
    deltas.push_back(realistic_gap(d, bd, bs, fallback));
  }
  BootstrapStats stats;
  stats.a_mean = mean(accs);
  stats.a_std = sample_std(accs);
  stats.delta_mean = mean(deltas);
  stats.delta_std = sample_std(deltas);
  return stats;
}

}  // namespace bidsel
