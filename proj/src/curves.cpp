#include "bidsel/curves.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bidsel/csv.hpp"
#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

namespace {

const char* side_name(CurveSide s) { return s == CurveSide::bid ? "bid" : "ask"; }

}  // namespace

void MarketCurve::validate() const {
  if (points.size() < 2) {
    throw ValidationError(std::string(side_name(side)) +
                          " curve needs at least 2 points");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].price) || !std::isfinite(points[i].volume)) {
      throw ValidationError(std::string(side_name(side)) +
                            " curve has a non-finite point");
    }
    if (i == 0) continue;
    if (!(points[i].price > points[i - 1].price)) {
      throw ValidationError(std::string(side_name(side)) +
                            " curve prices must be strictly increasing (point " +
                            std::to_string(i) + " at price " +
                            format_double(points[i].price) + ")");
    }
    const double dv = points[i].volume - points[i - 1].volume;
    if (side == CurveSide::bid && dv > 0.0) {
      throw ValidationError("bid volume must be non-increasing in price (point " +
                            std::to_string(i) + ")");
    }
    if (side == CurveSide::ask && dv < 0.0) {
      throw ValidationError("ask volume must be non-decreasing in price (point " +
                            std::to_string(i) + ")");
    }
  }
}

bool DenseCurve::same_grid(const DenseCurve& other) const {
  return volumes.size() == other.volumes.size() &&
         std::abs(grid_start - other.grid_start) < 1e-9 &&
         std::abs(grid_end - other.grid_end) < 1e-9 &&
         std::abs(grid_step - other.grid_step) < 1e-12;
}

DenseCurve densify(const MarketCurve& curve) {
  curve.validate();
  const double p_min = curve.points.front().price;
  const double p_max = curve.points.back().price;

  DenseCurve dense;
  dense.side = curve.side;
  dense.grid_start = p_min;
  dense.grid_step = kDenseGridStep;
  dense.grid_end = p_max;

  auto n_steps = static_cast<std::size_t>(
      std::floor((p_max - p_min) / kDenseGridStep + 1e-9));
  const bool end_on_grid =
      std::abs(p_min + static_cast<double>(n_steps) * kDenseGridStep - p_max) <= 1e-9;
  const std::size_t n = n_steps + (end_on_grid ? 1 : 2);
  dense.volumes.resize(n);

  std::size_t seg = 0;  // current source segment [seg, seg+1]
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      dense.volumes[0] = curve.points.front().volume;
      continue;
    }
    if (i + 1 == n) {
      dense.volumes[i] = curve.points.back().volume;
      continue;
    }
    const double p = dense.price_at(i);
    while (seg + 2 < curve.points.size() && curve.points[seg + 1].price < p) ++seg;
    const CurvePoint& a = curve.points[seg];
    const CurvePoint& b = curve.points[seg + 1];
    const double t = (p - a.price) / (b.price - a.price);
    dense.volumes[i] = a.volume + t * (b.volume - a.volume);
  }
  return dense;
}

Crossing crossing_price(const DenseCurve& bid, const DenseCurve& ask) {
  if (bid.side != CurveSide::bid || ask.side != CurveSide::ask) {
    throw ValidationError("crossing_price expects (bid, ask) in that order");
  }
  if (!bid.same_grid(ask)) {
    throw ValidationError("bid and ask curves do not share a price grid");
  }
  const std::size_t n = bid.size();
  if (bid.volumes[0] - ask.volumes[0] < 0.0) {
    throw ValidationError("no crossing: bid volume below ask volume at grid start");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double d = bid.volumes[i] - ask.volumes[i];
    if (d == 0.0) {
      return Crossing{bid.price_at(i), bid.volumes[i]};
    }
    if (d > 0.0 && i + 1 < n) {
      const double d_next = bid.volumes[i + 1] - ask.volumes[i + 1];
      if (d_next < 0.0) {
        const double t = d / (d - d_next);
        const double p0 = bid.price_at(i);
        const double p1 = bid.price_at(i + 1);
        Crossing c;
        c.price = p0 + t * (p1 - p0);
        c.volume = bid.volumes[i] + t * (bid.volumes[i + 1] - bid.volumes[i]);
        return c;
      }
    }
  }
  throw ValidationError("no crossing: bid volume above ask volume at grid end");
}

DenseCurve shift_volume(const DenseCurve& curve, double shift_mw) {
  DenseCurve out = curve;
  for (double& v : out.volumes) v = std::max(0.0, v + shift_mw);
  return out;
}

double shift_sensitivity(const DenseCurve& bid, const DenseCurve& ask,
                         double shift_mw) {
  Crossing before;
  try {
    before = crossing_price(bid, ask);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("pre-shift: ") + e.what());
  }
  DenseCurve shifted = shift_volume(bid, shift_mw);
  if (std::all_of(shifted.volumes.begin(), shifted.volumes.end(),
                  [](double v) { return v == 0.0; })) {
    throw ValidationError("post-shift: bid curve fully clipped to zero volume by a " +
                          format_double(shift_mw) + " MW shift");
  }
  Crossing after;
  try {
    after = crossing_price(shifted, ask);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("post-shift: ") + e.what());
  }
  return after.price - before.price;
}

double rolling_volatility(std::span<const SensitivityPair> pairs) {
  if (pairs.size() != 24) {
    throw ValidationError("rolling_volatility expects exactly 24 pairs, got " +
                          std::to_string(pairs.size()));
  }
  std::vector<double> pooled;
  pooled.reserve(48);
  for (const auto& p : pairs) pooled.push_back(p.up);
  for (const auto& p : pairs) pooled.push_back(p.down);
  return population_std(pooled);
}

DayCurveFeatures compute_day_curve_features(const std::map<int, HourlyCurves>& hours,
                                            double shift_mw) {
  DayCurveFeatures out;
  for (int h = 1; h <= 24; ++h) {
    auto it = hours.find(h);
    if (it == hours.end()) {
      throw ValidationError("missing curves for hour " + std::to_string(h));
    }
    DenseCurve bid = densify(it->second.bid);
    DenseCurve ask = densify(it->second.ask);
    out.sensitivities[h - 1].up = shift_sensitivity(bid, ask, shift_mw);
    out.sensitivities[h - 1].down = shift_sensitivity(bid, ask, -shift_mw);
  }
  out.volatility = rolling_volatility(out.sensitivities);
  return out;
}

std::map<Date, DayCurveFeatures> compute_curve_features(const CurveBook& book,
                                                        double shift_mw) {
  std::map<Date, DayCurveFeatures> out;
  for (const auto& [date, hours] : book) {
    try {
      out.emplace(date, compute_day_curve_features(hours, shift_mw));
    } catch (const ValidationError& e) {
      throw ValidationError(date.to_string() + ": " + e.what());
    }
  }
  return out;
}

CurveBook load_curves(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  if (table.empty_file) return {};
  const std::vector<std::string> expected = {"date", "hour", "side", "price",
                                             "volume"};
  if (table.header != expected) {
    throw ValidationError("'" + path.string() +
                          "': header does not match the curves.csv schema");
  }
  CurveBook book;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "line " + std::to_string(table.line_numbers[r]);
    if (row.size() != expected.size()) {
      throw ValidationError(where + ": expected 5 fields, got " +
                            std::to_string(row.size()));
    }
    Date date;
    try {
      date = Date::parse(row[0]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    int hour = 0;
    try {
      hour = std::stoi(row[1]);
    } catch (...) {
      throw ValidationError(where + ": cannot parse hour '" + row[1] + "'");
    }
    if (hour < 1 || hour > 24) {
      throw ValidationError(where + ": hour must be in 1..24, got " + row[1]);
    }
    CurveSide side;
    if (row[2] == "bid") side = CurveSide::bid;
    else if (row[2] == "ask") side = CurveSide::ask;
    else throw ValidationError(where + ": side must be 'bid' or 'ask', got '" + row[2] + "'");

    CurvePoint pt{parse_csv_double(table, r, 3), parse_csv_double(table, r, 4)};
    HourlyCurves& hc = book[date][hour];
    MarketCurve& curve = side == CurveSide::bid ? hc.bid : hc.ask;
    curve.side = side;
    curve.points.push_back(pt);
  }
  for (auto& [date, hours] : book) {
    for (auto& [hour, hc] : hours) {
      auto by_price = [](const CurvePoint& a, const CurvePoint& b) {
        return a.price < b.price;
      };
      std::sort(hc.bid.points.begin(), hc.bid.points.end(), by_price);
      std::sort(hc.ask.points.begin(), hc.ask.points.end(), by_price);
    }
  }
  return book;
}

void write_curves(const std::filesystem::path& path, const CurveBook& book,
                  const std::string& provenance) {
  CsvWriter w(path);
  if (!provenance.empty()) w.comment(provenance);
  w.row({"date", "hour", "side", "price", "volume"});
  for (const auto& [date, hours] : book) {
    for (const auto& [hour, hc] : hours) {
      for (const MarketCurve* curve : {&hc.bid, &hc.ask}) {
        for (const CurvePoint& p : curve->points) {
          w.row({date.to_string(), std::to_string(hour), side_name(curve->side),
                 format_double(p.price), format_double(p.volume)});
        }
      }
    }
  }
}

}  // namespace bidsel
