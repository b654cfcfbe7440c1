#include "bidsel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "bidsel/csv.hpp"
#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

namespace {

void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) {
    throw ValidationError(std::string("field '") + field + "' is not finite");
  }
}

void require_fraction(double v, const char* field) {
  require_finite(v, field);
  if (v < 0.0 || v > 1.0) {
    throw ValidationError(std::string("field '") + field +
                          "' must be in [0,1], got " + format_double(v));
  }
}

}  // namespace

void DailyRecord::validate() const {
  if (value_date != issue_date.plus_days(1)) {
    throw ValidationError("field 'value_date': expected " +
                          issue_date.plus_days(1).to_string() + ", got " +
                          value_date.to_string());
  }
  require_finite(inflow_deviation, "inflow_deviation");
  require_fraction(reservoir_filling_1, "reservoir_filling_1");
  require_fraction(reservoir_filling_2, "reservoir_filling_2");
  require_finite(price_volatility, "price_volatility");
  require_finite(prognosis_volatility, "prognosis_volatility");
  require_finite(water_value, "water_value");
  require_finite(average_price, "average_price");
  require_finite(average_price_prognosis, "average_price_prognosis");
  for (double p : hourly_prices) require_finite(p, "hourly_prices");
  for (double p : hourly_prognosis) require_finite(p, "hourly_prognosis");
  require_finite(beta_det, "beta_det");
  require_finite(beta_stoch, "beta_stoch");
  if (beta_det < 0.0) {
    throw ValidationError("field 'beta_det': performance gap must be >= 0, got " +
                          format_double(beta_det));
  }
  if (beta_stoch < 0.0) {
    throw ValidationError(
        "field 'beta_stoch': performance gap must be >= 0, got " +
        format_double(beta_stoch));
  }
}

LabeledDay label_day(const DailyRecord& record) {
  record.validate();
  LabeledDay day;
  day.record = record;
  day.strategy_gap = record.beta_stoch - record.beta_det;
  day.min_gap = std::min(record.beta_det, record.beta_stoch);
  // Ties go to the stochastic strategy, the static fallback.
  day.best = record.beta_det < record.beta_stoch ? 1 : 0;
  return day;
}

std::vector<LabeledDay> label_days(const std::vector<DailyRecord>& records) {
  std::vector<LabeledDay> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(label_day(r));
  return out;
}

SplitIndices split_indices(const std::vector<Date>& value_dates,
                           const SplitPlan& plan) {
  const std::size_t n = value_dates.size();
  if (n == 0) throw ValidationError("cannot split an empty dataset");
  SplitIndices out;
  if (plan.kind == SplitKind::random) {
    if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0)) {
      throw ValidationError("train_fraction must be in (0,1), got " +
                            format_double(plan.train_fraction));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(plan.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::llround(plan.train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
      throw ValidationError("split leaves an empty side (n=" +
                            std::to_string(n) + ", train_fraction=" +
                            format_double(plan.train_fraction) + ")");
    }
    out.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    out.test.assign(idx.begin() + static_cast<long>(n_train), idx.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
  } else {
    std::set<int> train_years(plan.train_years.begin(), plan.train_years.end());
    std::set<int> test_years(plan.test_years.begin(), plan.test_years.end());
    if (train_years.empty() || test_years.empty()) {
      throw ValidationError("sequential split needs train and test years");
    }
    for (int y : train_years) {
      if (test_years.count(y)) {
        throw ValidationError("year " + std::to_string(y) +
                              " appears in both train and test");
      }
    }
    std::set<int> present;
    for (const Date& d : value_dates) present.insert(d.year);
    for (int y : train_years) {
      if (!present.count(y)) {
        throw ValidationError("train year " + std::to_string(y) +
                              " not present in data");
      }
    }
    for (int y : test_years) {
      if (!present.count(y)) {
        throw ValidationError("test year " + std::to_string(y) +
                              " not present in data");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      int y = value_dates[i].year;
      if (train_years.count(y)) out.train.push_back(i);
      else if (test_years.count(y)) out.test.push_back(i);
    }
    if (out.train.empty() || out.test.empty()) {
      throw ValidationError("sequential split leaves an empty side");
    }
  }
  return out;
}

std::pair<std::vector<LabeledDay>, std::vector<LabeledDay>> split(
    const std::vector<LabeledDay>& days, const SplitPlan& plan) {
  std::vector<Date> dates;
  dates.reserve(days.size());
  for (const auto& d : days) dates.push_back(d.record.value_date);
  SplitIndices idx = split_indices(dates, plan);
  std::pair<std::vector<LabeledDay>, std::vector<LabeledDay>> out;
  out.first.reserve(idx.train.size());
  out.second.reserve(idx.test.size());
  for (std::size_t i : idx.train) out.first.push_back(days[i]);
  for (std::size_t i : idx.test) out.second.push_back(days[i]);
  return out;
}

namespace {

const std::vector<std::string>& days_header() {
  static const std::vector<std::string> header = [] {
    std::vector<std::string> h = {
        "issue_date",       "value_date",
        "inflow_deviation", "reservoir_filling_1",
        "reservoir_filling_2", "price_volatility",
        "prognosis_volatility", "water_value",
        "average_price",    "average_price_prognosis"};
    for (int i = 1; i <= 24; ++i) h.push_back("p_" + std::to_string(i));
    for (int i = 1; i <= 24; ++i) h.push_back("p_prog" + std::to_string(i));
    h.push_back("beta_det");
    h.push_back("beta_stoch");
    return h;
  }();
  return header;
}

}  // namespace

std::vector<DailyRecord> load_records(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  if (table.empty_file) return {};  // empty file -> empty list, not an error
  const auto& expected = days_header();
  if (table.header != expected) {
    throw ValidationError("'" + path.string() +
                          "': header does not match the days.csv schema");
  }
  std::vector<DailyRecord> records;
  records.reserve(table.rows.size());
  std::set<Date> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "line " + std::to_string(table.line_numbers[r]);
    if (row.size() != expected.size()) {
      throw ValidationError(where + ": expected " +
                            std::to_string(expected.size()) + " fields, got " +
                            std::to_string(row.size()));
    }
    DailyRecord rec;
    try {
      rec.issue_date = Date::parse(row[0]);
      rec.value_date = Date::parse(row[1]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    rec.inflow_deviation = parse_csv_double(table, r, 2);
    rec.reservoir_filling_1 = parse_csv_double(table, r, 3);
    rec.reservoir_filling_2 = parse_csv_double(table, r, 4);
    rec.price_volatility = parse_csv_double(table, r, 5);
    rec.prognosis_volatility = parse_csv_double(table, r, 6);
    rec.water_value = parse_csv_double(table, r, 7);
    rec.average_price = parse_csv_double(table, r, 8);
    rec.average_price_prognosis = parse_csv_double(table, r, 9);
    for (int h = 0; h < 24; ++h) {
      rec.hourly_prices[h] = parse_csv_double(table, r, 10 + h);
      rec.hourly_prognosis[h] = parse_csv_double(table, r, 34 + h);
    }
    rec.beta_det = parse_csv_double(table, r, 58);
    rec.beta_stoch = parse_csv_double(table, r, 59);
    try {
      rec.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!seen.insert(rec.value_date).second) {
      throw ValidationError(where + ": duplicate value_date " +
                            rec.value_date.to_string());
    }
    records.push_back(rec);
  }
  return records;
}

void write_records(const std::filesystem::path& path,
                   const std::vector<DailyRecord>& records,
                   const std::string& provenance) {
  CsvWriter w(path);
  if (!provenance.empty()) w.comment(provenance);
  w.row(days_header());
  std::vector<std::string> fields;
  for (const auto& rec : records) {
    fields.clear();
    fields.push_back(rec.issue_date.to_string());
    fields.push_back(rec.value_date.to_string());
    for (double v : {rec.inflow_deviation, rec.reservoir_filling_1,
                     rec.reservoir_filling_2, rec.price_volatility,
                     rec.prognosis_volatility, rec.water_value,
                     rec.average_price, rec.average_price_prognosis}) {
      fields.push_back(format_double(v));
    }
    for (double v : rec.hourly_prices) fields.push_back(format_double(v));
    for (double v : rec.hourly_prognosis) fields.push_back(format_double(v));
    fields.push_back(format_double(rec.beta_det));
    fields.push_back(format_double(rec.beta_stoch));
    w.row(fields);
  }
}

}  // namespace bidsel
