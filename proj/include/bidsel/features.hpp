#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bidsel/curves.hpp"
#include "bidsel/dataset.hpp"

#include "json.hpp"

namespace bidsel {

enum class SetKind { simple, complex, custom };

struct FeatureSpec {
  std::vector<std::string> names;
  SetKind kind = SetKind::custom;

  void validate() const;  // unique names; simple has 8, complex has 113
};

// The eight base variables: the seven market/hydrology variables plus the
// reservoir filling split over both reservoirs.
FeatureSpec simple_spec();

// 113 columns: 8 simple + 24 issue-date hourly prices + 24 prognosis prices
// + 24 up-shift sensitivities + 24 down-shift sensitivities + vol_roll_1/2
// + month/year/day_of_week + similar_weekday_perf + delta_1
// + reservoir_filling_rate + price_minus_water_value.
FeatureSpec complex_spec();

// Named, label-aligned numeric feature rows. Labels are carried alongside so
// metric computations never lose their day alignment.
struct FeatureMatrix {
  FeatureSpec spec;
  std::vector<std::vector<double>> rows;
  std::vector<Date> value_dates;
  std::vector<int> best;
  std::vector<double> strategy_gap;
  std::vector<double> beta_det;
  std::vector<double> beta_stoch;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_features() const { return spec.names.size(); }
  // Index of a named column; throws ValidationError if absent.
  std::size_t column(std::string_view name) const;

  FeatureMatrix select_rows(const std::vector<std::size_t>& indices) const;
  FeatureMatrix select_features(const std::vector<std::string>& names) const;
  void append_feature(const std::string& name, const std::vector<double>& values);

  void validate() const;  // shape + finiteness
};

FeatureMatrix build_simple(const std::vector<LabeledDay>& days);

// Requires days in strictly increasing value_date order. Rows whose lag
// context (previous day, two days of curve history, four previous same
// weekdays) is incomplete are dropped; a retained row with missing curve
// features is an error.
FeatureMatrix build_complex(const std::vector<LabeledDay>& days,
                            const std::map<Date, DayCurveFeatures>& curve_features);

enum class ScalingMode { per_year, rolling_365, global };

struct FeatureScale {
  double mean = 0.0;
  double std = 1.0;
};

// Standardization statistics. Zero-variance features are dropped (by name)
// rather than silently kept; rolling stats for a day use only strictly
// earlier days within the trailing 365-day window.
struct ScalingStats {
  ScalingMode mode = ScalingMode::global;
  std::vector<std::string> features;  // the set the stats were fitted on
  std::vector<std::string> kept;
  std::vector<std::string> dropped;
  std::vector<FeatureScale> global_scale;          // aligned to `kept`
  std::map<int, std::vector<FeatureScale>> per_year;
  std::map<Date, std::vector<FeatureScale>> per_day;
  std::vector<Date> unscaled_dates;  // rolling: days without enough history

  nlohmann::json to_json() const;
  static ScalingStats from_json(const nlohmann::json& j);
};

ScalingStats fit_scaling(const FeatureMatrix& train, ScalingMode mode);

// x -> (x - mean) / std per feature per group. Labels are untouched. Dropped
// features are removed from the output; under rolling_365, rows without
// history are removed as well.
FeatureMatrix apply_scaling(const FeatureMatrix& matrix, const ScalingStats& stats);

// CSV with header value_date,best,strategy_gap,beta_det,beta_stoch,<names...>
void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m,
                  const std::string& provenance = "");
FeatureMatrix load_matrix(const std::filesystem::path& path);

}  // namespace bidsel
