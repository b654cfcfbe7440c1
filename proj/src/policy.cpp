#include "bidsel/policy.hpp"

#include <cmath>
#include <random>

#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

std::string decision_name(Decision d) {
  switch (d) {
    case Decision::stochastic: return "stochastic";
    case Decision::deterministic: return "deterministic";
    case Decision::unclassified: return "unclassified";
  }
  return "unclassified";
}

DecisionPolicy DecisionPolicy::threshold(double t) {
  DecisionPolicy p;
  p.kind = PolicyKind::classification_threshold;
  p.lower = p.upper = t;
  p.validate();
  return p;
}

DecisionPolicy DecisionPolicy::band(double lo, double hi) {
  DecisionPolicy p;
  p.kind = PolicyKind::band;
  p.lower = lo;
  p.upper = hi;
  p.validate();
  return p;
}

DecisionPolicy DecisionPolicy::sign() {
  DecisionPolicy p;
  p.kind = PolicyKind::regression_sign;
  p.lower = p.upper = 0.0;
  return p;
}

void DecisionPolicy::validate() const {
  if (kind == PolicyKind::regression_sign) return;
  if (!(lower >= 0.0 && lower <= upper && upper <= 1.0)) {
    throw ValidationError("probability policy needs 0 <= lower <= upper <= 1");
  }
}

std::string DecisionPolicy::to_string() const {
  switch (kind) {
    case PolicyKind::classification_threshold:
      return "threshold:" + format_double(lower);
    case PolicyKind::band:
      return "band:" + format_double(lower) + "," + format_double(upper);
    case PolicyKind::regression_sign:
      return "sign";
  }
  return "sign";
}

Decision decide(double output, const DecisionPolicy& policy) {
  if (policy.kind == PolicyKind::regression_sign) {
    return output > 0.0 ? Decision::deterministic : Decision::stochastic;
  }
  if (!(output >= 0.0 && output <= 1.0)) {
    throw ValidationError("probability output out of [0,1]: " +
                          format_double(output));
  }
  if (policy.kind == PolicyKind::classification_threshold) {
    return output > policy.lower ? Decision::deterministic : Decision::stochastic;
  }
  if (output > policy.upper) return Decision::deterministic;
  if (output < policy.lower) return Decision::stochastic;
  return Decision::unclassified;
}

std::vector<Decision> decide_all(std::span<const double> outputs,
                                 const DecisionPolicy& policy) {
  std::vector<Decision> out;
  out.reserve(outputs.size());
  for (double o : outputs) out.push_back(decide(o, policy));
  return out;
}

double accuracy(std::span<const Decision> decisions, std::span<const int> best) {
  if (decisions.size() != best.size()) {
    throw ValidationError("decisions and labels are misaligned");
  }
  std::size_t classified = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] == Decision::unclassified) continue;
    ++classified;
    const int chosen = decisions[i] == Decision::deterministic ? 1 : 0;
    if (chosen == best[i]) ++correct;
  }
  if (classified == 0) {
    throw ValidationError("accuracy undefined: no classified days");
  }
  return static_cast<double>(correct) / static_cast<double>(classified);
}

double realistic_gap(std::span<const Decision> decisions,
                     std::span<const double> beta_det,
                     std::span<const double> beta_stoch, Decision fallback) {
  const std::size_t n = decisions.size();
  if (n == 0) throw ValidationError("realistic_gap needs at least one day");
  if (beta_det.size() != n || beta_stoch.size() != n) {
    throw ValidationError("decisions and gaps are misaligned");
  }
  if (fallback == Decision::unclassified) {
    throw ValidationError("fallback must choose a strategy");
  }
  double chosen_sum = 0.0;
  double optimal_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Decision d = decisions[i] == Decision::unclassified ? fallback : decisions[i];
    chosen_sum += d == Decision::deterministic ? beta_det[i] : beta_stoch[i];
    optimal_sum += std::min(beta_det[i], beta_stoch[i]);
  }
  const double dn = static_cast<double>(n);
  const double mean_opt = optimal_sum / dn;
  if (mean_opt == 0.0) {
    throw ValidationError("realistic_gap undefined: optimal mean gap is zero");
  }
  return (chosen_sum / dn - mean_opt) / mean_opt;
}

BaselinesResult baselines(std::span<const int> best,
                          std::span<const double> beta_det,
                          std::span<const double> beta_stoch, double p,
                          std::uint64_t seed) {
  const std::size_t n = best.size();
  if (n == 0) throw ValidationError("baselines need at least one day");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("binomial probability must be in [0,1]");
  }
  BaselinesResult out;
  out.binomial_p = p;
  std::vector<Decision> stoch(n, Decision::stochastic);
  std::vector<Decision> det(n, Decision::deterministic);
  std::vector<Decision> coin(n);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick_stochastic(p);
  for (std::size_t i = 0; i < n; ++i) {
    coin[i] = pick_stochastic(rng) ? Decision::stochastic : Decision::deterministic;
  }
  out.always_stochastic = {accuracy(stoch, best),
                           realistic_gap(stoch, beta_det, beta_stoch)};
  out.always_deterministic = {accuracy(det, best),
                              realistic_gap(det, beta_det, beta_stoch)};
  out.binomial = {accuracy(coin, best), realistic_gap(coin, beta_det, beta_stoch)};
  return out;
}

EvaluationReport evaluate(std::span<const double> outputs,
                          std::span<const int> best,
                          std::span<const double> beta_det,
                          std::span<const double> beta_stoch,
                          const DecisionPolicy& policy, Decision fallback) {
  policy.validate();
  EvaluationReport report;
  report.outputs.assign(outputs.begin(), outputs.end());
  report.decisions = decide_all(outputs, policy);
  report.accuracy = accuracy(report.decisions, best);
  report.delta_realistic =
      realistic_gap(report.decisions, beta_det, beta_stoch, fallback);
  std::size_t classified = 0;
  double chosen_sum = 0.0;
  double optimal_sum = 0.0;
  for (std::size_t i = 0; i < report.decisions.size(); ++i) {
    Decision d = report.decisions[i];
    if (d != Decision::unclassified) ++classified;
    if (d == Decision::unclassified) d = fallback;
    chosen_sum += d == Decision::deterministic ? beta_det[i] : beta_stoch[i];
    optimal_sum += std::min(beta_det[i], beta_stoch[i]);
  }
  const double dn = static_cast<double>(report.decisions.size());
  report.classified_fraction = static_cast<double>(classified) / dn;
  report.mean_gap_chosen = chosen_sum / dn;
  report.mean_gap_optimal = optimal_sum / dn;
  return report;
}

nlohmann::json report_to_json(const EvaluationReport& report,
                              std::span<const Date> value_dates,
                              std::span<const int> best,
                              std::span<const double> beta_det,
                              std::span<const double> beta_stoch) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["delta_realistic"] = report.delta_realistic;
  j["classified_fraction"] = report.classified_fraction;
  j["mean_gap_chosen"] = report.mean_gap_chosen;
  j["mean_gap_optimal"] = report.mean_gap_optimal;
  nlohmann::json days = nlohmann::json::array();
  for (std::size_t i = 0; i < report.decisions.size(); ++i) {
    nlohmann::json d;
    d["value_date"] = value_dates[i].to_string();
    d["output"] = report.outputs[i];
    d["decision"] = decision_name(report.decisions[i]);
    d["best"] = best[i];
    d["beta_det"] = beta_det[i];
    d["beta_stoch"] = beta_stoch[i];
    days.push_back(d);
  }
  j["decisions"] = days;
  return j;
}

}  // namespace bidsel
