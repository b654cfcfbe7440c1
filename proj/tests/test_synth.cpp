#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"

#include "bidsel/error.hpp"
#include "bidsel/explain.hpp"
#include "bidsel/features.hpp"
#include "bidsel/gbdt.hpp"
#include "bidsel/synth.hpp"

using namespace bidsel;

TEST_CASE("a fixed seed reproduces the dataset bit for bit") {
  SynthConfig config;
  config.n_days = 40;
  config.seed = 123;
  SynthData a = generate(config);
  SynthData b = generate(config);
  REQUIRE(a.days.size() == 40);
  for (std::size_t i = 0; i < a.days.size(); ++i) {
    CHECK(a.days[i].beta_det == b.days[i].beta_det);
    CHECK(a.days[i].beta_stoch == b.days[i].beta_stoch);
    CHECK(a.days[i].hourly_prices == b.days[i].hourly_prices);
    CHECK(a.days[i].water_value == b.days[i].water_value);
  }
  const auto& curves_a = a.curves.at(a.days[7].issue_date).at(13);
  const auto& curves_b = b.curves.at(b.days[7].issue_date).at(13);
  REQUIRE(curves_a.bid.points.size() == curves_b.bid.points.size());
  for (std::size_t i = 0; i < curves_a.bid.points.size(); ++i) {
    CHECK(curves_a.bid.points[i].price == curves_b.bid.points[i].price);
    CHECK(curves_a.bid.points[i].volume == curves_b.bid.points[i].volume);
  }

  SynthConfig other = config;
  other.seed = 124;
  SynthData c = generate(other);
  CHECK(c.days[0].beta_det != a.days[0].beta_det);
}

TEST_CASE("records validate and betas stay non-negative") {
  SynthConfig config;
  config.n_days = 200;
  config.seed = 5;
  SynthData data = generate(config);
  for (const auto& rec : data.days) {
    CHECK_NOTHROW(rec.validate());
    CHECK(rec.beta_det >= 0.0);
    CHECK(rec.beta_stoch >= 0.0);
  }
}

TEST_CASE("generated curves cross at the generated hourly price") {
  SynthConfig config;
  config.n_days = 30;
  config.seed = 77;
  SynthData data = generate(config);
  for (int day : {0, 7, 19, 29}) {
    const DailyRecord& rec = data.days[static_cast<std::size_t>(day)];
    const auto& hours = data.curves.at(rec.issue_date);
    for (int h = 1; h <= 24; ++h) {
      Crossing c =
          crossing_price(densify(hours.at(h).bid), densify(hours.at(h).ask));
      CHECK(std::abs(c.price - rec.hourly_prices[h - 1]) <= 0.05);
    }
  }
}

TEST_CASE("curve features are computable for every generated day") {
  SynthConfig config;
  config.n_days = 30;
  config.seed = 3;
  SynthData data = generate(config);
  auto features = compute_curve_features(data.curves);
  CHECK(features.size() == data.curves.size());
  for (const auto& [date, f] : features) {
    for (const auto& s : f.sensitivities) {
      CHECK(s.up >= 0.0);
      CHECK(s.down <= 0.0);
    }
  }
}

TEST_CASE("realized stochastic share hits the target") {
  SynthConfig config;
  config.n_days = 1000;
  config.seed = 11;
  config.stochastic_share = 0.58;
  SynthData data = generate(config);
  auto days = label_days(data.days);
  const auto stoch = static_cast<double>(
      std::count_if(days.begin(), days.end(),
                    [](const LabeledDay& d) { return d.best == 0; }));
  CHECK(std::abs(stoch / 1000.0 - 0.58) <= 0.05);
}

TEST_CASE("price statistics are consistent with the hourly panels") {
  SynthConfig config;
  config.n_days = 60;
  config.seed = 9;
  SynthData data = generate(config);
  const DailyRecord& rec = data.days[10];
  double m = 0.0;
  for (double p : rec.hourly_prices) m += p;
  m /= 24.0;
  CHECK(rec.average_price == doctest::Approx(m).epsilon(1e-12));
  double var = 0.0;
  for (double p : rec.hourly_prices) var += (p - m) * (p - m);
  CHECK(rec.price_volatility == doctest::Approx(std::sqrt(var / 24.0)).epsilon(1e-12));
}

TEST_CASE("noise-free labels are learnable to near-perfect accuracy") {
  SynthConfig config;
  config.n_days = 1500;
  config.seed = 21;
  config.noise_std = 0.0;
  SynthData data = generate(config);
  auto days = label_days(data.days);
  FeatureMatrix m = build_simple(days);

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    (i % 3 == 2 ? test_idx : train_idx).push_back(i);
  }
  FeatureMatrix train = m.select_rows(train_idx);
  FeatureMatrix test = m.select_rows(test_idx);
  std::vector<double> y(train.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.best[i];
  Hyperparameters p;
  p.n_rounds = 300;
  p.max_depth = 6;
  p.learning_rate = 0.15;
  GbdtModel model =
      fit_gbdt(train.rows, y, p, Objective::binary_logistic, train.spec.names);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    const int guess = model.predict_row(test.rows[i]) > 0.5 ? 1 : 0;
    if (guess == test.best[i]) ++correct;
  }
  const double acc =
      static_cast<double>(correct) / static_cast<double>(test.n_rows());
  CHECK(acc >= 0.95);
}

TEST_CASE("gain importance recovers the planted top three") {
  SynthConfig config;
  config.n_days = 1200;
  config.seed = 31;
  config.signal_strength = 0.85;
  SynthData data = generate(config);
  auto days = label_days(data.days);
  FeatureMatrix m = build_simple(days);
  std::vector<double> y(m.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = m.best[i];
  Hyperparameters p;
  p.n_rounds = 120;
  p.max_depth = 4;
  p.gamma = 1.0;
  GbdtModel model = fit_gbdt(m.rows, y, p, Objective::binary_logistic, m.spec.names);
  std::vector<double> imp = model.gain_importance();
  std::vector<std::size_t> order(imp.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
  std::set<std::string> top3 = {m.spec.names[order[0]], m.spec.names[order[1]],
                                m.spec.names[order[2]]};
  std::set<std::string> planted(data.truth.planted_features.begin(),
                                data.truth.planted_features.end());
  CHECK(top3 == planted);
}

TEST_CASE("shapley summary ranks the strongest planted feature first") {
  SynthConfig config;
  config.n_days = 500;
  config.seed = 41;
  config.signal_strength = 0.9;
  SynthData data = generate(config);
  auto days = label_days(data.days);
  FeatureMatrix m = build_simple(days);
  std::vector<double> y(m.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = m.best[i];
  Hyperparameters p;
  p.n_rounds = 80;
  p.max_depth = 4;
  p.gamma = 1.0;
  GbdtModel model = fit_gbdt(m.rows, y, p, Objective::binary_logistic, m.spec.names);

  std::vector<std::size_t> rows(48);
  std::iota(rows.begin(), rows.end(), 60);
  ShapSummary summary = shapley_summary(model, m.select_rows(rows), m);
  CHECK(summary.features[summary.ranking[0]] == data.truth.planted_features[0]);
}

TEST_CASE("infeasible configurations are rejected") {
  SynthConfig config;
  config.n_days = 10;
  CHECK_THROWS_AS(generate(config), ValidationError);
  config = SynthConfig{};
  config.stochastic_share = 1.0;
  CHECK_THROWS_WITH_AS(generate(config), doctest::Contains("infeasible"),
                       ValidationError);
  config = SynthConfig{};
  config.signal_strength = 1.4;
  CHECK_THROWS_AS(generate(config), ValidationError);
  config = SynthConfig{};
  config.noise_std = -1.0;
  CHECK_THROWS_AS(generate(config), ValidationError);
}
