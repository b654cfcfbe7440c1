#include "bidsel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bidsel/error.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

void SynthConfig::validate() const {
  if (n_days < 30) throw ValidationError("synth needs n_days >= 30");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
    throw ValidationError("signal_strength must be in [0,1]");
  }
  if (noise_std < 0.0) throw ValidationError("noise_std must be >= 0");
  if (!(stochastic_share > 0.0 && stochastic_share < 1.0)) {
    throw ValidationError("infeasible stochastic_share " +
                          format_double(stochastic_share) +
                          ": must be strictly inside (0,1)");
  }
  if (!(supply_slope_min > 0.0 && supply_slope_min <= supply_slope_max)) {
    throw ValidationError("invalid supply slope range");
  }
  if (!(demand_level_min > 500.0 && demand_level_min <= demand_level_max)) {
    throw ValidationError("invalid demand level range (levels must exceed 500 MW "
                          "so shifted curves keep a crossing)");
  }
}

nlohmann::json GroundTruth::to_json() const {
  nlohmann::json j;
  j["planted_features"] = planted_features;
  j["coefficients"] = coefficients;
  j["stochastic_share_target"] = stochastic_share_target;
  j["signal_strength"] = signal_strength;
  j["gap_scale"] = gap_scale;
  j["rule"] = rule;
  return j;
}

namespace {

constexpr double kTick = 0.1;  // market price tick, EUR/MWh

double quantize_tick(double price) { return std::round(price / kTick) * kTick; }

// AR(1) series with stationary std sigma.
std::vector<double> ar1_series(std::size_t n, double rho, double sigma,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  double x = sigma * normal(rng);
  const double innovation = sigma * std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x;
    x = rho * x + innovation * normal(rng);
  }
  return out;
}

int day_of_year(const Date& d) {
  return static_cast<int>(d.serial() - Date{d.year, 1, 1}.serial()) + 1;
}

// Spring-flood bump in [0,1], peaking around mid-May.
double flood_season(int doy) {
  const double x = (static_cast<double>(doy) - 140.0) / 35.0;
  return std::exp(-x * x);
}

std::vector<double> standardized(const std::vector<double>& xs) {
  const double m = mean(xs);
  const double s = population_std(xs);
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = s > 0.0 ? (xs[i] - m) / s : 0.0;
  }
  return out;
}

// Hourly demand shape: night trough, morning and evening peaks.
double hour_shape(int hour) {  // hour 1..24
  const double x = static_cast<double>(hour);
  double s = 1.0 - 0.10 * std::cos(2.0 * M_PI * (x - 3.0) / 24.0);
  s += 0.05 * std::exp(-0.5 * std::pow((x - 9.0) / 1.5, 2.0));
  s += 0.04 * std::exp(-0.5 * std::pow((x - 19.0) / 1.5, 2.0));
  return s;
}

// Builds one bid/ask pair whose unique crossing is exactly (price, volume),
// with kinks on the price tick grid so densified curves keep it exact.
HourlyCurves make_hour_curves(double price, double volume, double supply_slope,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p_lo = 0.0;
  const double p_hi =
      quantize_tick(std::max(3.0 * price, price + 1200.0 / supply_slope + 60.0));

  auto kink_prices = [&](double lo, double hi, int count) {
    std::vector<double> ticks;
    for (int i = 0; i < count; ++i) {
      const double p = quantize_tick(lo + (hi - lo) * (0.15 + 0.7 * unit(rng)));
      if (p > lo + kTick / 2 && p < hi - kTick / 2) ticks.push_back(p);
    }
    std::sort(ticks.begin(), ticks.end());
    ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
    return ticks;
  };

  HourlyCurves hc;
  hc.ask.side = CurveSide::ask;
  hc.bid.side = CurveSide::bid;

  // Supply: 0 MW at the floor, through the crossing, with enough headroom at
  // the cap that a +1000 MW demand shift still crosses.
  const double ask_top = volume + 1500.0 + 400.0 * unit(rng);
  {
    std::vector<CurvePoint> pts;
    pts.push_back({p_lo, 0.0});
    auto below = kink_prices(p_lo, price, 2);
    std::vector<double> vols;
    for (std::size_t i = 0; i < below.size(); ++i) vols.push_back(volume * unit(rng));
    std::sort(vols.begin(), vols.end());
    for (std::size_t i = 0; i < below.size(); ++i) pts.push_back({below[i], vols[i]});
    pts.push_back({price, volume});
    auto above = kink_prices(price, p_hi, 2);
    vols.clear();
    for (std::size_t i = 0; i < above.size(); ++i) {
      vols.push_back(volume + (ask_top - volume) * unit(rng));
    }
    std::sort(vols.begin(), vols.end());
    for (std::size_t i = 0; i < above.size(); ++i) pts.push_back({above[i], vols[i]});
    pts.push_back({p_hi, ask_top});
    hc.ask.points = std::move(pts);
  }

  // Demand: nearly vertical around the crossing, more than 1000 MW of slack
  // at the floor so a -1000 MW shift still crosses.
  const double bid_top = volume + 1200.0 + 300.0 * unit(rng);
  const double bid_bottom = std::max(50.0, volume - 250.0 - 150.0 * unit(rng));
  {
    std::vector<CurvePoint> pts;
    pts.push_back({p_lo, bid_top});
    auto below = kink_prices(p_lo, price, 1);
    std::vector<double> vols;
    for (std::size_t i = 0; i < below.size(); ++i) {
      vols.push_back(volume + (bid_top - volume) * unit(rng));
    }
    std::sort(vols.begin(), vols.end(), std::greater<>());
    for (std::size_t i = 0; i < below.size(); ++i) pts.push_back({below[i], vols[i]});
    pts.push_back({price, volume});
    auto above = kink_prices(price, p_hi, 1);
    vols.clear();
    for (std::size_t i = 0; i < above.size(); ++i) {
      vols.push_back(bid_bottom + (volume - bid_bottom) * unit(rng));
    }
    std::sort(vols.begin(), vols.end(), std::greater<>());
    for (std::size_t i = 0; i < above.size(); ++i) pts.push_back({above[i], vols[i]});
    pts.push_back({p_hi, bid_bottom});
    hc.bid.points = std::move(pts);
  }
  hc.ask.validate();
  hc.bid.validate();
  return hc;
}

}  // namespace

SynthData generate(const SynthConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.n_days);
  const Date start{2016, 1, 1};  // first issue date

  std::mt19937_64 rng_series(derive_seed(config.seed, 1));
  std::mt19937_64 rng_eta(derive_seed(config.seed, 2));
  std::mt19937_64 rng_beta(derive_seed(config.seed, 3));
  std::mt19937_64 rng_curves(derive_seed(config.seed, 4));
  std::mt19937_64 rng_prices(derive_seed(config.seed, 5));
  std::normal_distribution<double> normal(0.0, 1.0);

  // Hydrology and price-level series, observed on the issue date.
  std::vector<int> doy(n);
  for (std::size_t i = 0; i < n; ++i) {
    doy[i] = day_of_year(start.plus_days(static_cast<int>(i)));
  }
  const auto wv_noise = ar1_series(n, 0.95, 2.0, rng_series);
  const auto inflow_noise = ar1_series(n, 0.85, 0.25, rng_series);
  const auto fill2_noise = ar1_series(n, 0.98, 0.05, rng_series);
  const auto fill1_noise = ar1_series(n, 0.98, 0.06, rng_series);
  const auto price_noise = ar1_series(n + 1, 0.9, 1.5, rng_series);

  std::vector<double> water_value(n), inflow(n), fill1(n), fill2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double season = 2.0 * M_PI * static_cast<double>(doy[i]) / 365.25;
    water_value[i] =
        std::max(1.0, 25.0 + 10.0 * std::sin(season - 1.0) + wv_noise[i]);
    inflow[i] = std::max(0.0, 1.0 + 0.8 * flood_season(doy[i]) + inflow_noise[i]);
    fill2[i] = std::clamp(0.55 + 0.25 * std::sin(season - 4.0) + fill2_noise[i],
                          0.02, 0.98);
    fill1[i] = std::clamp(0.50 + 0.20 * std::sin(season - 3.2) + fill1_noise[i],
                          0.02, 0.98);
  }

  // Hourly price panel for issue dates 0..n (the extra day feeds the last
  // prognosis), quantized to the market tick.
  std::vector<std::array<double, 24>> prices(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const int d = day_of_year(start.plus_days(static_cast<int>(i)));
    const double level =
        std::max(6.0, 28.0 + 8.0 * std::sin(2.0 * M_PI * d / 365.25 - 0.4) +
                          price_noise[i]);
    for (int h = 1; h <= 24; ++h) {
      const double p = level * hour_shape(h) + 0.8 * normal(rng_prices);
      prices[i][h - 1] = std::max(kTick, quantize_tick(p));
    }
  }

  // Planted rule on standardized features. The latent is thresholded at its
  // own order statistic so the realized stochastic share hits the target.
  const auto z_wv = standardized(water_value);
  const auto z_inflow = standardized(inflow);
  const auto z_fill2 = standardized(fill2);
  const std::vector<double> coef = {0.55, -0.35, -0.25};
  std::vector<double> signal(n);
  for (std::size_t i = 0; i < n; ++i) {
    signal[i] = coef[0] * z_wv[i] + coef[1] * z_inflow[i] + coef[2] * z_fill2[i];
  }
  const auto z_signal = standardized(signal);

  const double s = config.signal_strength;
  const bool noiseless = config.noise_std == 0.0;
  std::vector<double> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    latent[i] = noiseless || s >= 1.0
                    ? z_signal[i]
                    : std::sqrt(s) * z_signal[i] +
                          std::sqrt(1.0 - s) * normal(rng_eta);
  }
  std::vector<double> sorted_latent = latent;
  std::sort(sorted_latent.begin(), sorted_latent.end());
  const auto k = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(config.stochastic_share * static_cast<double>(n)), 1,
      static_cast<long long>(n) - 1));
  const double threshold = sorted_latent[k - 1];  // latent <= threshold -> stochastic

  const double gap_scale =
      noiseless || s >= 1.0 ? 60.0 : config.noise_std / std::sqrt(1.0 - s);

  std::lognormal_distribution<double> min_gap_dist(std::log(40.0), 0.5);

  SynthData data;
  data.days.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DailyRecord rec;
    rec.issue_date = start.plus_days(static_cast<int>(i));
    rec.value_date = rec.issue_date.plus_days(1);
    rec.inflow_deviation = inflow[i];
    rec.reservoir_filling_1 = fill1[i];
    rec.reservoir_filling_2 = fill2[i];
    rec.water_value = water_value[i];
    rec.hourly_prices = prices[i];
    for (int h = 0; h < 24; ++h) {
      rec.hourly_prognosis[h] =
          std::max(kTick, quantize_tick(prices[i + 1][h] + 1.2 * normal(rng_prices)));
    }
    rec.average_price = mean(rec.hourly_prices);
    rec.average_price_prognosis = mean(rec.hourly_prognosis);
    rec.price_volatility = population_std(rec.hourly_prices);
    rec.prognosis_volatility = population_std(rec.hourly_prognosis);

    // Gap magnitudes are inflated in the flood season, when the strategy
    // choice matters most.
    const double magnitude = gap_scale * (0.6 + 1.4 * flood_season(doy[i]));
    const double eta = (latent[i] - threshold) * magnitude;
    const double base_gap = min_gap_dist(rng_beta);
    if (eta > 0.0) {
      rec.beta_det = base_gap;
      rec.beta_stoch = base_gap + eta;
    } else {
      rec.beta_stoch = base_gap;
      rec.beta_det = base_gap - eta;
    }
    rec.validate();
    data.days.push_back(rec);

    std::uniform_real_distribution<double> demand(config.demand_level_min,
                                                  config.demand_level_max);
    std::uniform_real_distribution<double> slope(config.supply_slope_min,
                                                 config.supply_slope_max);
    auto& day_curves = data.curves[rec.issue_date];
    for (int h = 1; h <= 24; ++h) {
      day_curves.emplace(h, make_hour_curves(rec.hourly_prices[h - 1], demand(rng_curves),
                                             slope(rng_curves), rng_curves));
    }
  }

  data.truth.planted_features = {"water_value", "inflow_deviation",
                                 "reservoir_filling_2"};
  data.truth.coefficients = coef;
  data.truth.stochastic_share_target = config.stochastic_share;
  data.truth.signal_strength = noiseless ? 1.0 : std::min(1.0, s);
  data.truth.gap_scale = gap_scale;
  data.truth.rule =
      "strategy_gap = (z_latent - threshold) * magnitude(day); z_latent mixes "
      "sqrt(s)*z(0.55*water_value - 0.35*inflow_deviation - "
      "0.25*reservoir_filling_2) with sqrt(1-s)*noise; high water value favours "
      "deterministic, high inflow or filling favours stochastic";
  return data;
}

}  // namespace bidsel
