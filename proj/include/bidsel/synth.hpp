#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bidsel/curves.hpp"
#include "bidsel/dataset.hpp"

#include "json.hpp"

namespace bidsel {

// Generator parameters. signal_strength is the fraction of the strategy-gap
// latent variance carried by the planted features; noise_std scales the
// non-signal component in EUR/day (0 makes the labels a deterministic
// function of the planted features). stochastic_share is hit exactly by
// thresholding the latent at its matching order statistic.
struct SynthConfig {
  int n_days = 365;
  std::uint64_t seed = 0;
  double signal_strength = 0.9;
  double noise_std = 40.0;        // EUR/day
  double stochastic_share = 0.55; // fraction of days where stochastic wins
  double supply_slope_min = 20.0; // MW per EUR/MWh
  double supply_slope_max = 60.0;
  double demand_level_min = 800.0;  // MW
  double demand_level_max = 2200.0;

  void validate() const;
};

struct GroundTruth {
  // Planted features, strongest first, with their standardized coefficients.
  std::vector<std::string> planted_features;
  std::vector<double> coefficients;
  double stochastic_share_target = 0.0;
  double signal_strength = 0.0;
  double gap_scale = 0.0;  // EUR/day scale of the strategy gap
  std::string rule;

  nlohmann::json to_json() const;
};

struct SynthData {
  std::vector<DailyRecord> days;
  CurveBook curves;  // one bid/ask pair per issue date and hour
  GroundTruth truth;
};

// Seasonal hydrology and price series, hourly curves whose crossing equals
// the generated hourly price, and beta values built so that
// strategy_gap = f(water_value, inflow_deviation, reservoir_filling_2) + noise
// with gap magnitudes inflated during the flood season.
SynthData generate(const SynthConfig& config);

}  // namespace bidsel
