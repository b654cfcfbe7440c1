#include <algorithm>
#include <random>

#include "doctest.h"

#include "bidsel/error.hpp"
#include "bidsel/policy.hpp"

using namespace bidsel;

namespace {

const std::vector<double> kTable1Det = {69.2, 16.5, 31.1};
const std::vector<double> kTable1Stoch = {137.9, 65.1, 29.9};
const std::vector<int> kTable1Best = {1, 1, 0};

}  // namespace

TEST_CASE("threshold decisions with the stochastic boundary rule") {
  const DecisionPolicy p = DecisionPolicy::threshold(0.5);
  CHECK(decide(0.7, p) == Decision::deterministic);
  CHECK(decide(0.5, p) == Decision::stochastic);  // boundary -> stochastic
  CHECK(decide(0.2, p) == Decision::stochastic);
  CHECK_THROWS_AS(decide(1.2, p), ValidationError);
  CHECK_THROWS_AS(decide(-0.1, p), ValidationError);
}

TEST_CASE("band decisions abstain between the thresholds") {
  const DecisionPolicy p = DecisionPolicy::band(0.4, 0.6);
  CHECK(decide(0.55, p) == Decision::unclassified);
  CHECK(decide(0.61, p) == Decision::deterministic);
  CHECK(decide(0.39, p) == Decision::stochastic);
  CHECK(decide(0.4, p) == Decision::unclassified);  // boundaries abstain
  CHECK_THROWS_AS(DecisionPolicy::band(0.6, 0.4), ValidationError);
}

TEST_CASE("regression sign decisions") {
  const DecisionPolicy p = DecisionPolicy::sign();
  CHECK(decide(120.0, p) == Decision::deterministic);
  CHECK(decide(0.0, p) == Decision::stochastic);
  CHECK(decide(-3.0, p) == Decision::stochastic);
  // Only the sign matters: positive rescaling never changes decisions.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 100; ++i) {
    const double v = u(rng);
    CHECK(decide(v, p) == decide(17.3 * v, p));
  }
}

TEST_CASE("accuracy counts classified days only") {
  std::vector<int> best = {1, 1, 0};
  std::vector<Decision> two_of_three = {Decision::deterministic,
                                        Decision::stochastic,
                                        Decision::stochastic};
  CHECK(accuracy(two_of_three, best) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  std::vector<Decision> perfect = {Decision::deterministic, Decision::deterministic,
                                   Decision::stochastic};
  CHECK(accuracy(perfect, best) == 1.0);

  std::vector<Decision> with_abstention = {Decision::deterministic,
                                           Decision::unclassified,
                                           Decision::unclassified};
  CHECK(accuracy(with_abstention, best) == 1.0);

  std::vector<Decision> none(3, Decision::unclassified);
  CHECK_THROWS_AS(accuracy(none, best), ValidationError);
}

TEST_CASE("realistic gap on the worked three days") {
  std::vector<Decision> always_det(3, Decision::deterministic);
  const double delta = realistic_gap(always_det, kTable1Det, kTable1Stoch);
  // mean chosen (69.2+16.5+31.1)/3 vs optimal (69.2+16.5+29.9)/3.
  CHECK(delta == doctest::Approx(1.2 / 115.6).epsilon(1e-9));

  // Choosing the argmin strategy every day reaches the optimum.
  std::vector<Decision> oracle = {Decision::deterministic, Decision::deterministic,
                                  Decision::stochastic};
  CHECK(realistic_gap(oracle, kTable1Det, kTable1Stoch) == doctest::Approx(0.0));
}

TEST_CASE("realistic gap arithmetic and degenerate optimum") {
  std::vector<Decision> det = {Decision::deterministic};
  const std::vector<double> bd = {120.0}, bs = {100.0};
  CHECK(realistic_gap(det, bd, bs) == doctest::Approx(0.2));
  const std::vector<double> zero = {0.0};
  CHECK_THROWS_AS(realistic_gap(det, zero, zero), ValidationError);
}

TEST_CASE("unclassified days use the fallback strategy") {
  std::vector<Decision> abstain = {Decision::unclassified, Decision::unclassified,
                                   Decision::unclassified};
  const double delta_stoch =
      realistic_gap(abstain, kTable1Det, kTable1Stoch, Decision::stochastic);
  std::vector<Decision> always_stoch(3, Decision::stochastic);
  CHECK(delta_stoch ==
        doctest::Approx(realistic_gap(always_stoch, kTable1Det, kTable1Stoch)));
}

TEST_CASE("delta is never negative and metrics are permutation invariant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gap(0.0, 200.0);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<double> bd, bs;
  std::vector<int> best;
  std::vector<Decision> decisions;
  for (int i = 0; i < 300; ++i) {
    bd.push_back(gap(rng) + 0.5);
    bs.push_back(gap(rng) + 0.5);
    best.push_back(bd.back() < bs.back() ? 1 : 0);
    decisions.push_back(coin(rng) ? Decision::deterministic : Decision::stochastic);
  }
  const double delta = realistic_gap(decisions, bd, bs);
  CHECK(delta >= 0.0);
  const double acc = accuracy(decisions, best);

  std::vector<std::size_t> perm(best.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> bd2, bs2;
  std::vector<int> best2;
  std::vector<Decision> dec2;
  for (std::size_t i : perm) {
    bd2.push_back(bd[i]);
    bs2.push_back(bs[i]);
    best2.push_back(best[i]);
    dec2.push_back(decisions[i]);
  }
  CHECK(accuracy(dec2, best2) == doctest::Approx(acc).epsilon(1e-12));
  CHECK(realistic_gap(dec2, bd2, bs2) == doctest::Approx(delta).epsilon(1e-12));
}

TEST_CASE("baselines on data where stochastic always wins") {
  std::vector<int> best(50, 0);
  std::vector<double> bd(50, 30.0), bs(50, 10.0);
  BaselinesResult r = baselines(best, bd, bs, 0.5, 7);
  CHECK(r.always_stochastic.accuracy == 1.0);
  CHECK(r.always_stochastic.delta_realistic == doctest::Approx(0.0));
  CHECK(r.always_deterministic.accuracy == 0.0);
  CHECK(r.always_deterministic.delta_realistic == doctest::Approx(2.0));
}

TEST_CASE("binomial baseline accuracy matches its expectation within 3 sigma") {
  // With stochastic share q and draw probability p the expected accuracy is
  // p*q + (1-p)*(1-q).
  const std::size_t n = 1000;
  const double q = 0.58;
  std::mt19937_64 rng(21);
  std::bernoulli_distribution is_stoch(q);
  std::vector<int> best;
  std::vector<double> bd, bs;
  for (std::size_t i = 0; i < n; ++i) {
    const bool stoch_best = is_stoch(rng);
    best.push_back(stoch_best ? 0 : 1);
    bd.push_back(stoch_best ? 20.0 : 10.0);
    bs.push_back(stoch_best ? 10.0 : 20.0);
  }
  const double realized_q =
      static_cast<double>(std::count(best.begin(), best.end(), 0)) /
      static_cast<double>(n);
  const double p = 0.58;
  BaselinesResult r = baselines(best, bd, bs, p, 77);
  const double expected = p * realized_q + (1.0 - p) * (1.0 - realized_q);
  const double sigma = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
  CHECK(std::abs(r.binomial.accuracy - expected) <= 3.0 * sigma);
}

TEST_CASE("tighter bands never lower accuracy for center-concentrated errors") {
  // Deterministic construction: outputs on a grid, with label errors only
  // near 0.5 (error rate non-increasing in |p - 0.5|).
  std::vector<double> outputs;
  std::vector<int> best;
  const std::vector<double> centers = {0.05, 0.15, 0.25, 0.35, 0.45,
                                       0.55, 0.65, 0.75, 0.85, 0.95};
  for (double c : centers) {
    const double dist = std::abs(c - 0.5);
    const int errors = static_cast<int>(std::floor((0.5 - dist) * 20.0));  // 1..9
    for (int i = 0; i < 20; ++i) {
      outputs.push_back(c);
      const int true_label = c > 0.5 ? 1 : 0;
      best.push_back(i < errors ? 1 - true_label : true_label);
    }
  }
  double prev = 0.0;
  for (double width : {0.0, 0.1, 0.2, 0.3, 0.4}) {
    const DecisionPolicy p = width == 0.0
                                 ? DecisionPolicy::threshold(0.5)
                                 : DecisionPolicy::band(0.5 - width, 0.5 + width);
    const auto decisions = decide_all(outputs, p);
    const double acc = accuracy(decisions, best);
    CHECK(acc >= prev - 1e-12);
    prev = acc;
  }
}

TEST_CASE("evaluate assembles the full report") {
  std::vector<double> outputs = {0.9, 0.45, 0.55, 0.1};
  std::vector<int> best = {1, 0, 0, 0};
  std::vector<double> bd = {10.0, 50.0, 40.0, 70.0};
  std::vector<double> bs = {30.0, 20.0, 30.0, 25.0};
  EvaluationReport r = evaluate(outputs, best, bd, bs, DecisionPolicy::band(0.4, 0.6));
  CHECK(r.classified_fraction == doctest::Approx(0.5));
  CHECK(r.accuracy == 1.0);  // 0.9 -> det (best), 0.1 -> stoch (best)
  CHECK(r.mean_gap_optimal == doctest::Approx((10.0 + 20.0 + 30.0 + 25.0) / 4.0));
  // Unclassified days fall back to stochastic.
  CHECK(r.mean_gap_chosen == doctest::Approx((10.0 + 20.0 + 30.0 + 25.0) / 4.0));
  CHECK(r.delta_realistic == doctest::Approx(0.0));

  const nlohmann::json j = report_to_json(
      r, std::vector<Date>{{2018, 1, 2}, {2018, 1, 3}, {2018, 1, 4}, {2018, 1, 5}},
      best, bd, bs);
  CHECK(j.at("decisions").size() == 4);
  CHECK(j.at("decisions")[0].at("decision") == "deterministic");
  CHECK(j.at("accuracy").get<double>() == 1.0);
}
