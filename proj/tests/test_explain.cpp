#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "bidsel/error.hpp"
#include "bidsel/explain.hpp"

using namespace bidsel;

namespace {

std::unique_ptr<TreeNode> leaf(double w) {
  auto n = std::make_unique<TreeNode>();
  n->leaf_weight = w;
  return n;
}

std::unique_ptr<TreeNode> stump(int feature, double threshold, double left,
                                double right, double gain = 1.0) {
  auto n = std::make_unique<TreeNode>();
  n->feature = feature;
  n->threshold = threshold;
  n->gain = gain;
  n->left = leaf(left);
  n->right = leaf(right);
  return n;
}

FeatureMatrix matrix_of(std::vector<std::vector<double>> rows,
                        std::vector<std::string> names) {
  FeatureMatrix m;
  m.spec.kind = SetKind::custom;
  m.spec.names = std::move(names);
  Date d{2018, 1, 2};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.rows.push_back(std::move(rows[i]));
    m.value_dates.push_back(d.plus_days(static_cast<int>(i)));
    m.best.push_back(0);
    m.strategy_gap.push_back(0.0);
    m.beta_det.push_back(1.0);
    m.beta_stoch.push_back(2.0);
  }
  return m;
}

GbdtModel regression_model(std::vector<std::unique_ptr<TreeNode>> trees,
                           std::vector<std::string> names) {
  GbdtModel m;
  m.objective = Objective::squared_error;
  m.params.learning_rate = 1.0;
  m.base_margin = 0.0;
  m.feature_names = std::move(names);
  m.trees = std::move(trees);
  return m;
}

// Noisy two-feature classification problem for the fitted-model cases.
FeatureMatrix training_matrix(std::size_t n, std::size_t n_features,
                              unsigned seed = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::normal_distribution<double> noise(0.0, 0.6);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n_features; ++c) names.push_back("x" + std::to_string(c));
  FeatureMatrix m;
  m.spec.kind = SetKind::custom;
  m.spec.names = names;
  Date d{2017, 1, 2};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n_features);
    for (double& v : row) v = u(rng);
    const double latent = row[0] - 0.8 * row[1 % n_features] + noise(rng);
    m.rows.push_back(row);
    m.value_dates.push_back(d.plus_days(static_cast<int>(i)));
    m.best.push_back(latent > 0 ? 1 : 0);
    m.strategy_gap.push_back(50.0 * latent);
    m.beta_det.push_back(latent > 0 ? 5.0 : 5.0 - 50.0 * latent);
    m.beta_stoch.push_back(latent > 0 ? 5.0 + 50.0 * latent : 5.0);
  }
  return m;
}

}  // namespace

TEST_CASE("single-feature model routes everything through that feature") {
  std::vector<std::unique_ptr<TreeNode>> trees;
  trees.push_back(stump(0, 0.0, -5.0, 7.0));
  GbdtModel m = regression_model(std::move(trees), {"a", "b"});
  FeatureMatrix bg = matrix_of({{-1.0, 10.0}, {1.0, -10.0}, {2.0, 0.0}}, {"a", "b"});
  const std::vector<double> row = {-1.0, 3.0};
  ShapExplanation e = shapley_explain(m, row, bg);
  CHECK(e.prediction == doctest::Approx(-5.0));
  CHECK(e.contributions[0] ==
        doctest::Approx(e.prediction - e.base_value).epsilon(1e-12));
  CHECK(e.contributions[1] == 0.0);  // null player, exactly zero
}

TEST_CASE("additive models decompose feature by feature") {
  // f(x) = g(x_a) + h(x_b) with two single-feature stumps.
  std::vector<std::unique_ptr<TreeNode>> trees;
  trees.push_back(stump(0, 0.0, -3.0, 3.0));
  trees.push_back(stump(1, 1.0, 10.0, 20.0));
  GbdtModel m = regression_model(std::move(trees), {"a", "b"});
  FeatureMatrix bg =
      matrix_of({{-2.0, 0.0}, {1.0, 2.0}, {0.5, 0.5}, {-1.0, 3.0}}, {"a", "b"});
  const std::vector<double> row = {0.7, 0.2};

  auto g = [](double a) { return a < 0.0 ? -3.0 : 3.0; };
  auto h = [](double b) { return b < 1.0 ? 10.0 : 20.0; };
  double g_mean = 0.0, h_mean = 0.0;
  for (const auto& r : bg.rows) {
    g_mean += g(r[0]);
    h_mean += h(r[1]);
  }
  g_mean /= 4.0;
  h_mean /= 4.0;

  ShapExplanation e = shapley_explain(m, row, bg);
  CHECK(e.contributions[0] == doctest::Approx(g(row[0]) - g_mean).epsilon(1e-12));
  CHECK(e.contributions[1] == doctest::Approx(h(row[1]) - h_mean).epsilon(1e-12));
  CHECK(e.base_value == doctest::Approx(g_mean + h_mean).epsilon(1e-12));
}

TEST_CASE("local accuracy reconstructs a regression prediction") {
  // Base value -32 with a prediction of -224.45: the contributions must sum
  // to the -192.45 difference.
  std::vector<std::unique_ptr<TreeNode>> trees;
  trees.push_back(stump(0, 0.5, -224.45, -32.0));
  GbdtModel m = regression_model(std::move(trees), {"x"});
  FeatureMatrix bg = matrix_of({{1.0}, {2.0}, {3.0}}, {"x"});  // all predict -32
  const std::vector<double> row = {0.0};
  ShapExplanation e = shapley_explain(m, row, bg);
  CHECK(e.base_value == doctest::Approx(-32.0));
  CHECK(e.prediction == doctest::Approx(-224.45));
  const double sum =
      std::accumulate(e.contributions.begin(), e.contributions.end(), 0.0);
  CHECK(sum == doctest::Approx(-192.45).epsilon(1e-9));
  CHECK(std::abs(e.base_value + sum - e.prediction) < 1e-6);
}

TEST_CASE("local accuracy holds for fitted probability models") {
  FeatureMatrix train = training_matrix(120, 6);
  std::vector<double> y(train.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.best[i];
  Hyperparameters p;
  p.n_rounds = 25;
  p.max_depth = 3;
  p.subsample = 0.9;
  p.seed = 3;
  GbdtModel model =
      fit_gbdt(train.rows, y, p, Objective::binary_logistic, train.spec.names);
  for (std::size_t r = 0; r < 20; ++r) {
    ShapExplanation e = shapley_explain(model, train.rows[r], train);
    const double sum =
        std::accumulate(e.contributions.begin(), e.contributions.end(), 0.0);
    CHECK(std::abs(e.base_value + sum - e.prediction) < 1e-6);
    CHECK(e.prediction == doctest::Approx(model.predict_row(train.rows[r])));
  }
}

TEST_CASE("symmetric features receive equal contributions") {
  // Two stumps, one per feature, identical shape; explained row and
  // background have identical columns, so the players are interchangeable.
  std::vector<std::unique_ptr<TreeNode>> trees;
  trees.push_back(stump(0, 0.0, -1.0, 1.0));
  trees.push_back(stump(1, 0.0, -1.0, 1.0));
  GbdtModel m = regression_model(std::move(trees), {"a", "b"});
  FeatureMatrix bg = matrix_of({{-1.0, -1.0}, {0.5, 0.5}, {2.0, 2.0}}, {"a", "b"});
  const std::vector<double> row = {1.5, 1.5};
  ShapExplanation e = shapley_explain(m, row, bg);
  CHECK(std::abs(e.contributions[0] - e.contributions[1]) < 1e-9);
}

TEST_CASE("feature-count bound is enforced") {
  FeatureMatrix train = training_matrix(30, 21);
  std::vector<double> y(train.n_rows(), 0.0);
  Hyperparameters p;
  p.n_rounds = 1;
  GbdtModel model =
      fit_gbdt(train.rows, y, p, Objective::squared_error, train.spec.names);
  CHECK_THROWS_WITH_AS(shapley_explain(model, train.rows[0], train),
                       doctest::Contains("GAINS"), ValidationError);
}

TEST_CASE("summary of a constant model is all zeros") {
  std::vector<std::unique_ptr<TreeNode>> trees;
  trees.push_back(leaf(4.2));
  GbdtModel m = regression_model(std::move(trees), {"a", "b"});
  FeatureMatrix rows = matrix_of({{1.0, 2.0}, {3.0, 4.0}}, {"a", "b"});
  ShapSummary s = shapley_summary(m, rows, rows);
  CHECK(s.mean_abs_contribution == std::vector<double>{0.0, 0.0});
}

TEST_CASE("summary ranking ignores row order") {
  FeatureMatrix train = training_matrix(60, 4);
  std::vector<double> y(train.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.strategy_gap[i];
  Hyperparameters p;
  p.n_rounds = 12;
  p.max_depth = 3;
  GbdtModel model =
      fit_gbdt(train.rows, y, p, Objective::squared_error, train.spec.names);

  std::vector<std::size_t> order(train.n_rows());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(8);
  std::shuffle(order.begin(), order.end(), rng);
  FeatureMatrix shuffled = train.select_rows(order);

  ShapSummary a = shapley_summary(model, train, train);
  ShapSummary b = shapley_summary(model, shuffled, train);
  CHECK(a.ranking == b.ranking);
  for (std::size_t i = 0; i < a.mean_abs_contribution.size(); ++i) {
    CHECK(a.mean_abs_contribution[i] ==
          doctest::Approx(b.mean_abs_contribution[i]).epsilon(1e-9));
  }
}

TEST_CASE("gains trace walks from the full set down to one feature") {
  FeatureMatrix data = training_matrix(160, 5);
  FeatureMatrix train = data.select_rows([&] {
    std::vector<std::size_t> idx(120);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }());
  FeatureMatrix test = data.select_rows([&] {
    std::vector<std::size_t> idx(40);
    std::iota(idx.begin(), idx.end(), 120);
    return idx;
  }());
  Hyperparameters p;
  p.n_rounds = 20;
  p.max_depth = 3;
  p.seed = 11;
  GainsTrace trace = gains_loop(train, test, p, Objective::binary_logistic,
                                DecisionPolicy::threshold(0.5));
  REQUIRE(trace.steps.size() == 5);  // one evaluation per set size
  CHECK(trace.steps[0].removed.empty());
  CHECK(trace.steps[0].remaining.size() == 5);
  CHECK(trace.steps[4].remaining.size() == 1);
  for (std::size_t s = 1; s < trace.steps.size(); ++s) {
    const auto& prev = trace.steps[s - 1].remaining;
    const auto& cur = trace.steps[s].remaining;
    CHECK(cur.size() + 1 == prev.size());
    // Nested: every remaining feature was in the previous set.
    for (const auto& name : cur) {
      CHECK(std::find(prev.begin(), prev.end(), name) != prev.end());
    }
    CHECK(std::find(prev.begin(), prev.end(), trace.steps[s].removed) != prev.end());
    CHECK(std::find(cur.begin(), cur.end(), trace.steps[s].removed) == cur.end());
  }
  // The selected step attains the maximum accuracy with the fewest features.
  for (const auto& step : trace.steps) {
    CHECK(trace.steps[trace.selected_step].accuracy >= step.accuracy);
  }
}

TEST_CASE("dropping a never-split feature leaves predictions identical") {
  FeatureMatrix train = training_matrix(100, 3);
  std::vector<double> constant(train.n_rows(), 3.14);
  train.append_feature("constant_col", constant);
  std::vector<double> y(train.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.best[i];

  Hyperparameters p;
  p.n_rounds = 15;
  p.max_depth = 3;
  p.seed = 2;
  GbdtModel full =
      fit_gbdt(train.rows, y, p, Objective::binary_logistic, train.spec.names);
  CHECK(full.gain_importance()[3] == 0.0);

  FeatureMatrix reduced = train.select_features({"x0", "x1", "x2"});
  GbdtModel smaller =
      fit_gbdt(reduced.rows, y, p, Objective::binary_logistic, reduced.spec.names);
  for (std::size_t i = 0; i < train.n_rows(); ++i) {
    CHECK(full.predict_row(train.rows[i]) ==
          doctest::Approx(smaller.predict_row(reduced.rows[i])).epsilon(1e-12));
  }
}

TEST_CASE("planted noise features are eliminated before signal features") {
  // Strong two-feature signal plus pure-noise columns: the loop should drop
  // the noise first, keeping the signal features to the end.
  FeatureMatrix data = training_matrix(240, 2, 6);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    std::vector<double> col(data.n_rows());
    for (double& v : col) v = n01(rng);
    data.append_feature("noise" + std::to_string(k), col);
  }
  std::vector<std::size_t> train_idx(180), test_idx(60);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::iota(test_idx.begin(), test_idx.end(), 180);
  Hyperparameters p;
  p.n_rounds = 40;
  p.max_depth = 3;
  p.gamma = 0.5;
  p.seed = 23;
  GainsTrace trace =
      gains_loop(data.select_rows(train_idx), data.select_rows(test_idx), p,
                 Objective::binary_logistic, DecisionPolicy::threshold(0.5));
  // The last two surviving features are the planted ones.
  const auto& last_two = trace.steps[trace.steps.size() - 2].remaining;
  REQUIRE(last_two.size() == 2);
  CHECK(((last_two[0] == "x0" && last_two[1] == "x1") ||
         (last_two[0] == "x1" && last_two[1] == "x0")));
}
