#include "bidsel/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

nlohmann::json ShapExplanation::to_json(const std::vector<std::string>& names,
                                        std::span<const double> row) const {
  nlohmann::json j;
  j["base_value"] = base_value;
  j["prediction"] = prediction;
  nlohmann::json feats = nlohmann::json::array();
  for (std::size_t i = 0; i < contributions.size(); ++i) {
    feats.push_back({{"name", names[i]},
                     {"value", row[i]},
                     {"contribution", contributions[i]}});
  }
  j["features"] = feats;
  return j;
}

namespace {

std::vector<std::size_t> background_rows(const FeatureMatrix& background,
                                         std::size_t max_background,
                                         std::uint64_t seed) {
  if (background.n_rows() == 0) {
    throw ValidationError("shapley background set is empty");
  }
  std::vector<std::size_t> idx(background.n_rows());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > max_background) {
    std::mt19937_64 rng(derive_seed(seed, 0x5aa));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_background);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// Shapley kernel weight for a coalition of size s out of m players:
// s! (m-1-s)! / m! = 1 / (m * C(m-1, s)).
std::vector<double> shapley_weights(std::size_t m) {
  std::vector<double> binom(m, 1.0);  // C(m-1, s)
  for (std::size_t s = 1; s < m; ++s) {
    binom[s] = binom[s - 1] * static_cast<double>(m - s) / static_cast<double>(s);
  }
  std::vector<double> w(m);
  for (std::size_t s = 0; s < m; ++s) {
    w[s] = 1.0 / (static_cast<double>(m) * binom[s]);
  }
  return w;
}

}  // namespace

ShapExplanation shapley_explain(const GbdtModel& model, std::span<const double> row,
                                const FeatureMatrix& background,
                                std::size_t max_background, std::uint64_t seed) {
  const std::size_t m = model.n_features();
  if (m > kMaxExactShapleyFeatures) {
    throw ValidationError(
        "exact Shapley enumeration is limited to " +
        std::to_string(kMaxExactShapleyFeatures) +
        " features (model has " + std::to_string(m) +
        "); explain a GAINS-reduced model instead");
  }
  if (row.size() != m) {
    throw ValidationError("explained row does not match the model's feature count");
  }
  if (background.n_features() != m || background.spec.names != model.feature_names) {
    throw ValidationError("background matrix columns do not match the model");
  }
  const std::vector<std::size_t> bg = background_rows(background, max_background, seed);

  // Mean model output per coalition. Gray-code order flips one feature per
  // step so the hybrid row is updated in O(1) per mask.
  const std::size_t n_masks = std::size_t{1} << m;
  std::vector<double> value(n_masks, 0.0);
  std::vector<double> hybrid(m);
  for (std::size_t b : bg) {
    std::copy(background.rows[b].begin(), background.rows[b].end(), hybrid.begin());
    std::size_t prev_gray = 0;
    value[0] += model.predict_row(hybrid);
    for (std::size_t k = 1; k < n_masks; ++k) {
      const std::size_t gray = k ^ (k >> 1);
      const std::size_t flipped_bit = gray ^ prev_gray;
      const auto i = static_cast<std::size_t>(std::countr_zero(flipped_bit));
      hybrid[i] = (gray & flipped_bit) ? row[i] : background.rows[b][i];
      value[gray] += model.predict_row(hybrid);
      prev_gray = gray;
    }
  }
  const double inv_b = 1.0 / static_cast<double>(bg.size());
  for (double& v : value) v *= inv_b;

  const std::vector<double> w = shapley_weights(m);
  ShapExplanation out;
  out.base_value = value[0];
  out.prediction = model.predict_row(row);
  out.contributions.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double c = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      c += w[static_cast<std::size_t>(std::popcount(mask))] *
           (value[mask | bit] - value[mask]);
    }
    out.contributions[i] = c;
  }
  return out;
}

ShapSummary shapley_summary(const GbdtModel& model, const FeatureMatrix& rows,
                            const FeatureMatrix& background,
                            std::size_t max_background, std::uint64_t seed) {
  rows.validate();
  if (rows.spec.names != model.feature_names) {
    throw ValidationError("rows matrix columns do not match the model");
  }
  ShapSummary summary;
  summary.features = model.feature_names;
  const std::size_t m = model.n_features();
  summary.mean_abs_contribution.assign(m, 0.0);
  for (std::size_t r = 0; r < rows.n_rows(); ++r) {
    ShapExplanation e =
        shapley_explain(model, rows.rows[r], background, max_background, seed);
    for (std::size_t i = 0; i < m; ++i) {
      summary.mean_abs_contribution[i] += std::abs(e.contributions[i]);
    }
    summary.contributions.push_back(std::move(e.contributions));
    summary.values.push_back(rows.rows[r]);
  }
  if (!rows.rows.empty()) {
    for (double& v : summary.mean_abs_contribution) {
      v /= static_cast<double>(rows.n_rows());
    }
  }
  summary.ranking.resize(m);
  std::iota(summary.ranking.begin(), summary.ranking.end(), 0);
  std::stable_sort(summary.ranking.begin(), summary.ranking.end(),
                   [&](std::size_t a, std::size_t b) {
                     return summary.mean_abs_contribution[a] >
                            summary.mean_abs_contribution[b];
                   });
  return summary;
}

GainsTrace gains_loop(const FeatureMatrix& train, const FeatureMatrix& test,
                      const Hyperparameters& params, Objective objective,
                      const DecisionPolicy& metric_policy, Decision fallback) {
  train.validate();
  test.validate();
  if (train.spec.names != test.spec.names) {
    throw ValidationError("train and test matrices have different columns");
  }
  if (train.n_features() < 2) {
    throw ValidationError("gains_loop needs at least 2 features");
  }

  GainsTrace trace;
  std::vector<std::string> current = train.spec.names;
  std::string last_removed;
  while (true) {
    FeatureMatrix tr = train.select_features(current);
    FeatureMatrix te = test.select_features(current);
    std::vector<double> y(tr.n_rows());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = objective == Objective::binary_logistic
                 ? static_cast<double>(tr.best[i])
                 : tr.strategy_gap[i];
    }
    GbdtModel model = fit_gbdt(tr.rows, y, params, objective, current);
    std::vector<double> outputs = model.predict(te.rows);
    std::vector<Decision> decisions = decide_all(outputs, metric_policy);

    GainsStep step;
    step.removed = last_removed;
    step.remaining = current;
    step.accuracy = accuracy(decisions, te.best);
    step.delta_realistic =
        realistic_gap(decisions, te.beta_det, te.beta_stoch, fallback);
    trace.steps.push_back(std::move(step));
    if (current.size() == 1) break;

    // Drop the lowest-gain feature; ties resolve to the earliest column,
    // which removes zero-gain features in column order first.
    const std::vector<double> importance = model.gain_importance();
    std::size_t worst = 0;
    for (std::size_t i = 1; i < importance.size(); ++i) {
      if (importance[i] < importance[worst]) worst = i;
    }
    last_removed = current[worst];
    current.erase(current.begin() + static_cast<long>(worst));
  }

  trace.selected_step = 0;
  for (std::size_t s = 1; s < trace.steps.size(); ++s) {
    // Later steps have fewer features, so >= prefers fewer features on ties.
    if (trace.steps[s].accuracy >= trace.steps[trace.selected_step].accuracy) {
      trace.selected_step = s;
    }
  }
  return trace;
}

}  // namespace bidsel
