#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bidsel/date.hpp"

#include "json.hpp"

namespace bidsel {

enum class Decision { stochastic, deterministic, unclassified };

std::string decision_name(Decision d);

enum class PolicyKind { classification_threshold, band, regression_sign };

// Turns a model output into a strategy choice. Probability policies require
// outputs in [0,1]; outputs exactly at a threshold classify as stochastic,
// the risk-averse default.
struct DecisionPolicy {
  PolicyKind kind = PolicyKind::classification_threshold;
  double lower = 0.5;
  double upper = 0.5;  // band only

  static DecisionPolicy threshold(double t);
  static DecisionPolicy band(double lo, double hi);
  static DecisionPolicy sign();
  void validate() const;
  std::string to_string() const;
};

Decision decide(double output, const DecisionPolicy& policy);
std::vector<Decision> decide_all(std::span<const double> outputs,
                                 const DecisionPolicy& policy);

// Correct classified days / total classified days. Unclassified days are
// excluded from both sides; zero classified days is an error.
double accuracy(std::span<const Decision> decisions, std::span<const int> best);

// Relative excess of the realized mean gap over the mean gap of the per-day
// optimal choice. Unclassified days fall back to `fallback`.
double realistic_gap(std::span<const Decision> decisions,
                     std::span<const double> beta_det,
                     std::span<const double> beta_stoch,
                     Decision fallback = Decision::stochastic);

struct BaselineScore {
  double accuracy = 0.0;
  double delta_realistic = 0.0;
};

struct BaselinesResult {
  BaselineScore always_stochastic;
  BaselineScore always_deterministic;
  BaselineScore binomial;
  double binomial_p = 0.0;
};

// Static and random baselines. The binomial baseline draws stochastic with
// probability p per day (seeded).
BaselinesResult baselines(std::span<const int> best,
                          std::span<const double> beta_det,
                          std::span<const double> beta_stoch, double p,
                          std::uint64_t seed);

struct EvaluationReport {
  double accuracy = 0.0;
  double delta_realistic = 0.0;
  double classified_fraction = 0.0;
  double mean_gap_chosen = 0.0;
  double mean_gap_optimal = 0.0;
  std::vector<double> outputs;
  std::vector<Decision> decisions;
};

EvaluationReport evaluate(std::span<const double> outputs,
                          std::span<const int> best,
                          std::span<const double> beta_det,
                          std::span<const double> beta_stoch,
                          const DecisionPolicy& policy,
                          Decision fallback = Decision::stochastic);

nlohmann::json report_to_json(const EvaluationReport& report,
                              std::span<const Date> value_dates,
                              std::span<const int> best,
                              std::span<const double> beta_det,
                              std::span<const double> beta_stoch);

}  // namespace bidsel
