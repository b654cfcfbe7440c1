#include "bidsel/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bidsel/csv.hpp"
#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

namespace {

constexpr int kSimilarWeekdayCount = 4;

std::vector<std::string> simple_names() {
  return {"inflow_deviation",     "reservoir_filling_1",
          "reservoir_filling_2",  "price_volatility",
          "prognosis_volatility", "water_value",
          "average_price",        "average_price_prognosis"};
}

}  // namespace

void FeatureSpec::validate() const {
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) {
    throw ValidationError("feature names must be unique");
  }
  if (kind == SetKind::simple && names.size() != 8) {
    throw ValidationError("simple feature set must have exactly 8 names");
  }
  if (kind == SetKind::complex && names.size() != 113) {
    throw ValidationError("complex feature set must have exactly 113 names");
  }
}

FeatureSpec simple_spec() {
  FeatureSpec spec;
  spec.kind = SetKind::simple;
  spec.names = simple_names();
  spec.validate();
  return spec;
}

FeatureSpec complex_spec() {
  FeatureSpec spec;
  spec.kind = SetKind::complex;
  spec.names = simple_names();
  for (int h = 1; h <= 24; ++h) spec.names.push_back("p_" + std::to_string(h));
  for (int h = 1; h <= 24; ++h) spec.names.push_back("p_prog" + std::to_string(h));
  for (int h = 1; h <= 24; ++h) spec.names.push_back("bu_" + std::to_string(h));
  for (int h = 1; h <= 24; ++h) spec.names.push_back("bd_" + std::to_string(h));
  spec.names.push_back("vol_roll_1");
  spec.names.push_back("vol_roll_2");
  spec.names.push_back("month");
  spec.names.push_back("year");
  spec.names.push_back("day_of_week");
  spec.names.push_back("similar_weekday_perf");
  spec.names.push_back("delta_1");
  spec.names.push_back("reservoir_filling_rate");
  spec.names.push_back("price_minus_water_value");
  spec.validate();
  return spec;
}

std::size_t FeatureMatrix::column(std::string_view name) const {
  for (std::size_t i = 0; i < spec.names.size(); ++i) {
    if (spec.names[i] == name) return i;
  }
  throw ValidationError("no feature named '" + std::string(name) + "'");
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& indices) const {
  FeatureMatrix out;
  out.spec = spec;
  out.rows.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= n_rows()) throw ValidationError("row index out of range");
    out.rows.push_back(rows[i]);
    out.value_dates.push_back(value_dates[i]);
    out.best.push_back(best[i]);
    out.strategy_gap.push_back(strategy_gap[i]);
    out.beta_det.push_back(beta_det[i]);
    out.beta_stoch.push_back(beta_stoch[i]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_features(const std::vector<std::string>& names) const {
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& name : names) cols.push_back(column(name));
  FeatureMatrix out;
  out.spec.kind = SetKind::custom;
  out.spec.names = names;
  out.spec.validate();
  out.value_dates = value_dates;
  out.best = best;
  out.strategy_gap = strategy_gap;
  out.beta_det = beta_det;
  out.beta_stoch = beta_stoch;
  out.rows.reserve(n_rows());
  for (const auto& row : rows) {
    std::vector<double> selected;
    selected.reserve(cols.size());
    for (std::size_t c : cols) selected.push_back(row[c]);
    out.rows.push_back(std::move(selected));
  }
  return out;
}

void FeatureMatrix::append_feature(const std::string& name,
                                   const std::vector<double>& values) {
  if (values.size() != n_rows()) {
    throw ValidationError("appended feature '" + name + "' has " +
                          std::to_string(values.size()) + " values for " +
                          std::to_string(n_rows()) + " rows");
  }
  spec.names.push_back(name);
  spec.kind = SetKind::custom;
  spec.validate();
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].push_back(values[i]);
}

void FeatureMatrix::validate() const {
  spec.validate();
  const std::size_t n = n_rows();
  if (value_dates.size() != n || best.size() != n || strategy_gap.size() != n ||
      beta_det.size() != n || beta_stoch.size() != n) {
    throw ValidationError("feature matrix labels are misaligned");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != spec.names.size()) {
      throw ValidationError("row " + std::to_string(i) + " has " +
                            std::to_string(rows[i].size()) + " values for " +
                            std::to_string(spec.names.size()) + " features");
    }
    for (double v : rows[i]) {
      if (!std::isfinite(v)) {
        throw ValidationError("row " + std::to_string(i) +
                              " contains a non-finite feature value");
      }
    }
  }
}

namespace {

void attach_labels(FeatureMatrix& m, const LabeledDay& day) {
  m.value_dates.push_back(day.record.value_date);
  m.best.push_back(day.best);
  m.strategy_gap.push_back(day.strategy_gap);
  m.beta_det.push_back(day.record.beta_det);
  m.beta_stoch.push_back(day.record.beta_stoch);
}

std::vector<double> simple_row(const DailyRecord& r) {
  return {r.inflow_deviation,     r.reservoir_filling_1,
          r.reservoir_filling_2,  r.price_volatility,
          r.prognosis_volatility, r.water_value,
          r.average_price,        r.average_price_prognosis};
}

}  // namespace

FeatureMatrix build_simple(const std::vector<LabeledDay>& days) {
  if (days.empty()) throw ValidationError("build_simple needs at least one day");
  FeatureMatrix m;
  m.spec = simple_spec();
  m.rows.reserve(days.size());
  for (const auto& day : days) {
    m.rows.push_back(simple_row(day.record));
    attach_labels(m, day);
  }
  m.validate();
  return m;
}

FeatureMatrix build_complex(const std::vector<LabeledDay>& days,
                            const std::map<Date, DayCurveFeatures>& curve_features) {
  if (days.empty()) throw ValidationError("build_complex needs at least one day");
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (!(days[i - 1].record.value_date < days[i].record.value_date)) {
      throw ValidationError("days must be sorted by strictly increasing value_date");
    }
  }
  std::map<Date, std::size_t> by_date;
  for (std::size_t i = 0; i < days.size(); ++i) {
    by_date.emplace(days[i].record.value_date, i);
  }

  FeatureMatrix m;
  m.spec = complex_spec();

  for (std::size_t i = 0; i < days.size(); ++i) {
    const LabeledDay& day = days[i];
    const DailyRecord& rec = day.record;
    const Date v = rec.value_date;

    // Lag context; rows without it are dropped, not imputed.
    auto prev_it = by_date.find(v.plus_days(-1));
    if (prev_it == by_date.end()) continue;
    const LabeledDay& prev = days[prev_it->second];

    std::vector<double> same_weekday_gaps;
    for (std::size_t j = i; j-- > 0;) {
      if (days[j].record.value_date.weekday() == v.weekday()) {
        same_weekday_gaps.push_back(days[j].strategy_gap);
        if (same_weekday_gaps.size() == kSimilarWeekdayCount) break;
      }
    }
    if (same_weekday_gaps.size() < kSimilarWeekdayCount) continue;

    auto curves_t1 = curve_features.find(v.plus_days(-1));
    auto curves_t2 = curve_features.find(v.plus_days(-2));
    if (curves_t1 == curve_features.end()) {
      throw ValidationError("missing curve features for " +
                            v.plus_days(-1).to_string() + " (needed by retained day " +
                            v.to_string() + ")");
    }
    if (curves_t2 == curve_features.end()) {
      throw ValidationError("missing curve features for " +
                            v.plus_days(-2).to_string() + " (needed by retained day " +
                            v.to_string() + ")");
    }

    std::vector<double> row = simple_row(rec);
    row.reserve(113);
    for (double p : rec.hourly_prices) row.push_back(p);
    for (double p : rec.hourly_prognosis) row.push_back(p);
    for (const auto& s : curves_t1->second.sensitivities) row.push_back(s.up);
    for (const auto& s : curves_t1->second.sensitivities) row.push_back(s.down);
    row.push_back(curves_t1->second.volatility);
    row.push_back(curves_t2->second.volatility);
    row.push_back(static_cast<double>(v.month));
    row.push_back(static_cast<double>(v.year));
    row.push_back(static_cast<double>(v.weekday()));
    row.push_back(mean(same_weekday_gaps));
    row.push_back(prev.strategy_gap);  // strategy gap realized on the issue date
    row.push_back(rec.reservoir_filling_2 - prev.record.reservoir_filling_2);
    row.push_back(rec.average_price - rec.water_value);

    m.rows.push_back(std::move(row));
    attach_labels(m, day);
  }
  if (m.rows.empty()) {
    throw ValidationError("no rows left after dropping days with incomplete lag context");
  }
  m.validate();
  return m;
}

namespace {

struct GroupStats {
  std::vector<double> mean;
  std::vector<double> std;
};

GroupStats stats_over(const FeatureMatrix& m, const std::vector<std::size_t>& row_idx) {
  const std::size_t f = m.n_features();
  GroupStats g;
  g.mean.assign(f, 0.0);
  g.std.assign(f, 0.0);
  std::vector<double> column(row_idx.size());
  for (std::size_t c = 0; c < f; ++c) {
    for (std::size_t k = 0; k < row_idx.size(); ++k) column[k] = m.rows[row_idx[k]][c];
    g.mean[c] = mean(column);
    g.std[c] = population_std(column);
  }
  return g;
}

std::vector<FeatureScale> keep_columns(const GroupStats& g,
                                       const std::vector<std::size_t>& kept_cols) {
  std::vector<FeatureScale> out;
  out.reserve(kept_cols.size());
  for (std::size_t c : kept_cols) out.push_back({g.mean[c], g.std[c]});
  return out;
}

}  // namespace

ScalingStats fit_scaling(const FeatureMatrix& train, ScalingMode mode) {
  train.validate();
  if (train.n_rows() == 0) throw ValidationError("cannot fit scaling on an empty matrix");
  ScalingStats stats;
  stats.mode = mode;
  stats.features = train.spec.names;
  const std::size_t f = train.n_features();
  std::vector<bool> drop(f, false);

  if (mode == ScalingMode::global) {
    std::vector<std::size_t> all(train.n_rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    GroupStats g = stats_over(train, all);
    for (std::size_t c = 0; c < f; ++c) drop[c] = g.std[c] == 0.0;
    std::vector<std::size_t> kept_cols;
    for (std::size_t c = 0; c < f; ++c) {
      (drop[c] ? stats.dropped : stats.kept).push_back(train.spec.names[c]);
      if (!drop[c]) kept_cols.push_back(c);
    }
    stats.global_scale = keep_columns(g, kept_cols);
    return stats;
  }

  if (mode == ScalingMode::per_year) {
    std::map<int, std::vector<std::size_t>> year_rows;
    for (std::size_t i = 0; i < train.n_rows(); ++i) {
      year_rows[train.value_dates[i].year].push_back(i);
    }
    for (const auto& [year, idx] : year_rows) {
      if (idx.size() < 2) {
        throw ValidationError("per-year scaling needs at least 2 days in year " +
                              std::to_string(year));
      }
    }
    std::map<int, GroupStats> year_stats;
    for (const auto& [year, idx] : year_rows) {
      GroupStats g = stats_over(train, idx);
      for (std::size_t c = 0; c < f; ++c) {
        if (g.std[c] == 0.0) drop[c] = true;
      }
      year_stats.emplace(year, std::move(g));
    }
    std::vector<std::size_t> kept_cols;
    for (std::size_t c = 0; c < f; ++c) {
      (drop[c] ? stats.dropped : stats.kept).push_back(train.spec.names[c]);
      if (!drop[c]) kept_cols.push_back(c);
    }
    for (const auto& [year, g] : year_stats) {
      stats.per_year.emplace(year, keep_columns(g, kept_cols));
    }
    return stats;
  }

  // rolling_365: stats for day d use days strictly before d, at most 365 back.
  std::vector<std::size_t> order(train.n_rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return train.value_dates[a] < train.value_dates[b];
  });
  std::map<Date, GroupStats> day_stats;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Date d = train.value_dates[order[i]];
    const Date lo = d.plus_days(-365);
    std::vector<std::size_t> window;
    for (std::size_t j = i; j-- > 0;) {
      const Date dj = train.value_dates[order[j]];
      if (!(dj < d)) continue;  // duplicate-date guard
      if (dj < lo) break;
      window.push_back(order[j]);
    }
    if (window.size() < 2) {
      stats.unscaled_dates.push_back(d);
      continue;
    }
    day_stats.emplace(d, stats_over(train, window));
  }
  if (day_stats.empty()) {
    throw ValidationError("rolling_365 scaling: no day has enough trailing history");
  }
  for (const auto& [d, g] : day_stats) {
    for (std::size_t c = 0; c < f; ++c) {
      if (g.std[c] == 0.0) drop[c] = true;
    }
  }
  std::vector<std::size_t> kept_cols;
  for (std::size_t c = 0; c < f; ++c) {
    (drop[c] ? stats.dropped : stats.kept).push_back(train.spec.names[c]);
    if (!drop[c]) kept_cols.push_back(c);
  }
  for (const auto& [d, g] : day_stats) {
    stats.per_day.emplace(d, keep_columns(g, kept_cols));
  }
  return stats;
}

FeatureMatrix apply_scaling(const FeatureMatrix& matrix, const ScalingStats& stats) {
  matrix.validate();
  if (matrix.spec.names != stats.features) {
    throw ValidationError("matrix columns do not match the columns scaling was fitted on");
  }
  FeatureMatrix kept = matrix.select_features(stats.kept);

  for (std::size_t i = 0; i < kept.n_rows(); ++i) {
    const std::vector<FeatureScale>* scale = nullptr;
    if (stats.mode == ScalingMode::global) {
      scale = &stats.global_scale;
    } else if (stats.mode == ScalingMode::per_year) {
      auto it = stats.per_year.find(kept.value_dates[i].year);
      if (it == stats.per_year.end()) {
        throw ValidationError(
            "year " + std::to_string(kept.value_dates[i].year) +
            " was not seen when scaling was fitted; use rolling_365 scaling "
            "for out-of-sample years");
      }
      scale = &it->second;
    } else {
      auto it = stats.per_day.find(kept.value_dates[i]);
      if (it == stats.per_day.end()) continue;  // dropped below
      scale = &it->second;
    }
    for (std::size_t c = 0; c < kept.n_features(); ++c) {
      kept.rows[i][c] = (kept.rows[i][c] - (*scale)[c].mean) / (*scale)[c].std;
    }
  }

  if (stats.mode == ScalingMode::rolling_365) {
    std::vector<std::size_t> retain;
    for (std::size_t i = 0; i < kept.n_rows(); ++i) {
      if (stats.per_day.count(kept.value_dates[i])) retain.push_back(i);
    }
    if (retain.size() != kept.n_rows()) kept = kept.select_rows(retain);
    if (kept.n_rows() == 0) {
      throw ValidationError("rolling_365 scaling dropped every row (no history)");
    }
  }
  kept.validate();
  return kept;
}

namespace {

std::string mode_name(ScalingMode m) {
  switch (m) {
    case ScalingMode::per_year: return "per_year";
    case ScalingMode::rolling_365: return "rolling_365";
    case ScalingMode::global: return "global";
  }
  return "global";
}

ScalingMode mode_from_name(const std::string& s) {
  if (s == "per_year") return ScalingMode::per_year;
  if (s == "rolling_365") return ScalingMode::rolling_365;
  if (s == "global") return ScalingMode::global;
  throw ValidationError("unknown scaling mode '" + s + "'");
}

nlohmann::json scales_to_json(const std::vector<FeatureScale>& scales) {
  nlohmann::json mean = nlohmann::json::array();
  nlohmann::json std_ = nlohmann::json::array();
  for (const auto& s : scales) {
    mean.push_back(s.mean);
    std_.push_back(s.std);
  }
  return {{"mean", mean}, {"std", std_}};
}

std::vector<FeatureScale> scales_from_json(const nlohmann::json& j) {
  std::vector<FeatureScale> out;
  const auto& mean = j.at("mean");
  const auto& std_ = j.at("std");
  for (std::size_t i = 0; i < mean.size(); ++i) {
    out.push_back({mean[i].get<double>(), std_[i].get<double>()});
  }
  return out;
}

}  // namespace

nlohmann::json ScalingStats::to_json() const {
  nlohmann::json j;
  j["mode"] = mode_name(mode);
  j["features"] = features;
  j["kept"] = kept;
  j["dropped"] = dropped;
  nlohmann::json groups = nlohmann::json::object();
  if (mode == ScalingMode::global) {
    groups["all"] = scales_to_json(global_scale);
  } else if (mode == ScalingMode::per_year) {
    for (const auto& [year, scales] : per_year) {
      groups[std::to_string(year)] = scales_to_json(scales);
    }
  } else {
    for (const auto& [d, scales] : per_day) {
      groups[d.to_string()] = scales_to_json(scales);
    }
    nlohmann::json un = nlohmann::json::array();
    for (const Date& d : unscaled_dates) un.push_back(d.to_string());
    j["unscaled_dates"] = un;
  }
  j["groups"] = groups;
  return j;
}

ScalingStats ScalingStats::from_json(const nlohmann::json& j) {
  ScalingStats stats;
  stats.mode = mode_from_name(j.at("mode").get<std::string>());
  stats.features = j.at("features").get<std::vector<std::string>>();
  stats.kept = j.at("kept").get<std::vector<std::string>>();
  stats.dropped = j.at("dropped").get<std::vector<std::string>>();
  const auto& groups = j.at("groups");
  if (stats.mode == ScalingMode::global) {
    stats.global_scale = scales_from_json(groups.at("all"));
  } else if (stats.mode == ScalingMode::per_year) {
    for (auto it = groups.begin(); it != groups.end(); ++it) {
      stats.per_year.emplace(std::stoi(it.key()), scales_from_json(it.value()));
    }
  } else {
    for (auto it = groups.begin(); it != groups.end(); ++it) {
      stats.per_day.emplace(Date::parse(it.key()), scales_from_json(it.value()));
    }
    for (const auto& s : j.at("unscaled_dates")) {
      stats.unscaled_dates.push_back(Date::parse(s.get<std::string>()));
    }
  }
  return stats;
}

void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m,
                  const std::string& provenance) {
  CsvWriter w(path);
  if (!provenance.empty()) w.comment(provenance);
  std::vector<std::string> header = {"value_date", "best", "strategy_gap",
                                     "beta_det", "beta_stoch"};
  header.insert(header.end(), m.spec.names.begin(), m.spec.names.end());
  w.row(header);
  std::vector<std::string> fields;
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    fields.clear();
    fields.push_back(m.value_dates[i].to_string());
    fields.push_back(std::to_string(m.best[i]));
    fields.push_back(format_double(m.strategy_gap[i]));
    fields.push_back(format_double(m.beta_det[i]));
    fields.push_back(format_double(m.beta_stoch[i]));
    for (double v : m.rows[i]) fields.push_back(format_double(v));
    w.row(fields);
  }
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  if (table.empty_file) throw ValidationError("'" + path.string() + "' has no header");
  const std::vector<std::string> label_cols = {"value_date", "best", "strategy_gap",
                                               "beta_det", "beta_stoch"};
  if (table.header.size() < label_cols.size() ||
      !std::equal(label_cols.begin(), label_cols.end(), table.header.begin())) {
    throw ValidationError("'" + path.string() +
                          "': header does not match the feature-matrix schema");
  }
  FeatureMatrix m;
  m.spec.kind = SetKind::custom;
  m.spec.names.assign(table.header.begin() + label_cols.size(), table.header.end());
  const std::size_t width = table.header.size();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != width) {
      throw ValidationError("line " + std::to_string(table.line_numbers[r]) +
                            ": expected " + std::to_string(width) + " fields, got " +
                            std::to_string(row.size()));
    }
    m.value_dates.push_back(Date::parse(row[0]));
    m.best.push_back(static_cast<int>(parse_csv_double(table, r, 1)));
    m.strategy_gap.push_back(parse_csv_double(table, r, 2));
    m.beta_det.push_back(parse_csv_double(table, r, 3));
    m.beta_stoch.push_back(parse_csv_double(table, r, 4));
    std::vector<double> values;
    values.reserve(m.spec.names.size());
    for (std::size_t c = label_cols.size(); c < width; ++c) {
      values.push_back(parse_csv_double(table, r, c));
    }
    m.rows.push_back(std::move(values));
  }
  m.validate();
  return m;
}

}  // namespace bidsel
