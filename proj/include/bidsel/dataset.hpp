#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "bidsel/date.hpp"

namespace bidsel {

// One issue/value-date pair with the raw market, hydrology and per-strategy
// performance-gap observations. beta_det / beta_stoch are the losses of each
// bidding strategy against the perfect-foresight optimum for the value date,
// in EUR/day; they are never negative.
struct DailyRecord {
  Date issue_date;
  Date value_date;  // always issue_date + 1 day
  double inflow_deviation = 0.0;    // ratio vs historic normal
  double reservoir_filling_1 = 0.0; // fraction in [0,1]
  double reservoir_filling_2 = 0.0; // fraction in [0,1]
  double price_volatility = 0.0;    // EUR/MWh, std of issue-date hourly prices
  double prognosis_volatility = 0.0;
  double water_value = 0.0;         // EUR/MWh
  double average_price = 0.0;
  double average_price_prognosis = 0.0;
  std::array<double, 24> hourly_prices{};    // issue date
  std::array<double, 24> hourly_prognosis{}; // value-date forecast
  double beta_det = 0.0;   // EUR/day, >= 0
  double beta_stoch = 0.0; // EUR/day, >= 0

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// A record with its derived labels. strategy_gap > 0 means the deterministic
// strategy had the smaller loss for that day.
struct LabeledDay {
  DailyRecord record;
  double strategy_gap = 0.0;  // beta_stoch - beta_det
  int best = 0;               // 1 = deterministic, 0 = stochastic; ties -> 0
  double min_gap = 0.0;       // min(beta_det, beta_stoch)
};

enum class SplitKind { random, sequential };

struct SplitPlan {
  SplitKind kind = SplitKind::random;
  double train_fraction = 0.67;  // random only
  std::uint64_t seed = 0;        // random only
  std::vector<int> train_years;  // sequential only
  std::vector<int> test_years;   // sequential only
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

LabeledDay label_day(const DailyRecord& record);
std::vector<LabeledDay> label_days(const std::vector<DailyRecord>& records);

// Partitions by index so the same plan can be applied to day lists and to
// feature-matrix rows. Both sides are returned in chronological (input)
// order; the random kind draws a seeded uniform partition.
SplitIndices split_indices(const std::vector<Date>& value_dates,
                           const SplitPlan& plan);

std::pair<std::vector<LabeledDay>, std::vector<LabeledDay>> split(
    const std::vector<LabeledDay>& days, const SplitPlan& plan);

// days.csv schema (header mandatory):
//   issue_date,value_date,inflow_deviation,reservoir_filling_1,
//   reservoir_filling_2,price_volatility,prognosis_volatility,water_value,
//   average_price,average_price_prognosis,p_1..p_24,p_prog1..p_prog24,
//   beta_det,beta_stoch
std::vector<DailyRecord> load_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path,
                   const std::vector<DailyRecord>& records,
                   const std::string& provenance = "");

}  // namespace bidsel
