#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "bidsel/date.hpp"

namespace bidsel {

enum class CurveSide { bid, ask };

struct CurvePoint {
  double price = 0.0;   // EUR/MWh
  double volume = 0.0;  // MW
};

// Aggregated hourly market curve: prices strictly increasing, volume
// non-increasing for bids (demand) and non-decreasing for asks (supply).
struct MarketCurve {
  CurveSide side = CurveSide::bid;
  std::vector<CurvePoint> points;

  void validate() const;  // throws ValidationError
};

// Curve resampled on a 0.1 EUR/MWh price grid. The final grid point is
// clamped to the source curve's last price so both endpoints are exact even
// when the price span is not a multiple of the step.
struct DenseCurve {
  CurveSide side = CurveSide::bid;
  double grid_start = 0.0;
  double grid_step = 0.1;
  double grid_end = 0.0;
  std::vector<double> volumes;

  std::size_t size() const { return volumes.size(); }
  double price_at(std::size_t i) const {
    return i + 1 == volumes.size() ? grid_end
                                   : grid_start + static_cast<double>(i) * grid_step;
  }
  bool same_grid(const DenseCurve& other) const;
};

struct Crossing {
  double price = 0.0;   // EUR/MWh
  double volume = 0.0;  // MW
};

// Price differences induced by translating the bid curve +/-1000 MW.
struct SensitivityPair {
  double up = 0.0;    // >= 0 for monotone curves
  double down = 0.0;  // <= 0
};

constexpr double kDenseGridStep = 0.1;     // EUR/MWh
constexpr double kLoadShiftMw = 1000.0;    // MW

DenseCurve densify(const MarketCurve& curve);

// Grid price where bid volume minus ask volume first changes sign, refined
// linearly between the bracketing grid points.
Crossing crossing_price(const DenseCurve& bid, const DenseCurve& ask);

// Volume translation of a bid curve, clipped at zero volume.
DenseCurve shift_volume(const DenseCurve& bid, double shift_mw);

// crossing(shifted bid, ask).price - crossing(bid, ask).price.
double shift_sensitivity(const DenseCurve& bid, const DenseCurve& ask,
                         double shift_mw);

// Population std over the 48 pooled values (24 up, 24 down) of one day.
double rolling_volatility(std::span<const SensitivityPair> pairs);

struct HourlyCurves {
  MarketCurve bid;
  MarketCurve ask;
};

// hour index 1..24
using CurveBook = std::map<Date, std::map<int, HourlyCurves>>;

// Everything the feature builder needs from one day's curves.
struct DayCurveFeatures {
  std::array<SensitivityPair, 24> sensitivities{};
  double volatility = 0.0;  // rolling_volatility of this day's pairs
};

DayCurveFeatures compute_day_curve_features(const std::map<int, HourlyCurves>& hours,
                                            double shift_mw = kLoadShiftMw);
std::map<Date, DayCurveFeatures> compute_curve_features(const CurveBook& book,
                                                        double shift_mw = kLoadShiftMw);

// curves.csv schema: date,hour(1-24),side(bid|ask),price,volume
CurveBook load_curves(const std::filesystem::path& path);
void write_curves(const std::filesystem::path& path, const CurveBook& book,
                  const std::string& provenance = "");

}  // namespace bidsel
