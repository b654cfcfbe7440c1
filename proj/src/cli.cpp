#include "bidsel/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "bidsel/csv.hpp"
#include "bidsel/curves.hpp"
#include "bidsel/dataset.hpp"
#include "bidsel/error.hpp"
#include "bidsel/explain.hpp"
#include "bidsel/features.hpp"
#include "bidsel/gbdt.hpp"
#include "bidsel/mlp.hpp"
#include "bidsel/policy.hpp"
#include "bidsel/synth.hpp"
#include "bidsel/tuning.hpp"
#include "bidsel/util.hpp"

namespace bidsel {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- options

struct CommonOpts {
  std::string days_path;
  std::string curves_path;
  std::string matrix_path;
  std::string features = "simple";  // simple | complex | custom:<file>
  std::string split = "random:0.67";
  std::string scaling;  // per-year | rolling365 | global | empty = none
  std::string model = "gbdt_classify";
  std::string policy;  // threshold:<x> | band:<lo>,<hi> | sign
  std::string model_file;
  std::string params_file;
  int iters = 100;
  int folds = 5;
  int bootstrap = 100;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string mlp_loss = "mse";
  int max_explain_rows = 50;
};

struct SynthOpts {
  int n_days = 365;
  double signal_strength = 0.9;
  double noise_std = 40.0;
  double stochastic_share = 0.55;
  std::uint64_t seed = 0;
  std::string out = ".";
};

// ---------------------------------------------------------------- helpers

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

json provenance(const json& config, std::uint64_t seed) {
  return {{"config_hash", hash_hex(config)}, {"seed", seed}, {"config", config}};
}

std::string provenance_comment(const json& config, std::uint64_t seed) {
  return "config_hash=" + hash_hex(config) + " seed=" + std::to_string(seed);
}

void write_json_file(const fs::path& path, json payload, const json& config,
                     std::uint64_t seed) {
  payload["provenance"] = provenance(config, seed);
  std::ofstream out(path);
  if (!out.is_open()) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << payload.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw ValidationError("cannot open '" + path.string() + "'");
  }
  return json::parse(in);
}

DecisionPolicy parse_policy(const std::string& text) {
  if (text == "sign") return DecisionPolicy::sign();
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ValidationError("cannot parse policy '" + text +
                          "' (threshold:<x> | band:<lo>,<hi> | sign)");
  }
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  try {
    if (kind == "threshold") return DecisionPolicy::threshold(std::stod(rest));
    if (kind == "band") {
      auto comma = rest.find(',');
      if (comma == std::string::npos) throw ValidationError("band needs <lo>,<hi>");
      return DecisionPolicy::band(std::stod(rest.substr(0, comma)),
                                  std::stod(rest.substr(comma + 1)));
    }
  } catch (const std::invalid_argument&) {
    throw ValidationError("cannot parse policy numbers in '" + text + "'");
  }
  throw ValidationError("unknown policy kind '" + kind + "'");
}

SplitPlan parse_split(const std::string& text, std::uint64_t seed) {
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ValidationError("cannot parse split '" + text +
                          "' (random:<frac> | years:<train>/<test>)");
  }
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  SplitPlan plan;
  plan.seed = seed;
  if (kind == "random") {
    plan.kind = SplitKind::random;
    try {
      plan.train_fraction = std::stod(rest);
    } catch (const std::invalid_argument&) {
      throw ValidationError("cannot parse split fraction in '" + text + "'");
    }
    return plan;
  }
  if (kind == "years") {
    plan.kind = SplitKind::sequential;
    auto slash = rest.find('/');
    if (slash == std::string::npos) {
      throw ValidationError("years split needs <train>/<test>");
    }
    auto parse_years = [&](const std::string& csv, std::vector<int>& out) {
      for (const std::string& tok : split_csv_line(csv)) {
        try {
          out.push_back(std::stoi(tok));
        } catch (...) {
          throw ValidationError("cannot parse year '" + tok + "'");
        }
      }
    };
    parse_years(rest.substr(0, slash), plan.train_years);
    parse_years(rest.substr(slash + 1), plan.test_years);
    return plan;
  }
  throw ValidationError("unknown split kind '" + kind + "'");
}

ScalingMode parse_scaling(const std::string& text) {
  if (text == "per-year") return ScalingMode::per_year;
  if (text == "rolling365") return ScalingMode::rolling_365;
  if (text == "global") return ScalingMode::global;
  throw ValidationError("unknown scaling mode '" + text +
                        "' (per-year | rolling365 | global)");
}

Objective objective_for_model(const std::string& model) {
  if (model == "gbdt_classify") return Objective::binary_logistic;
  if (model == "gbdt_regress") return Objective::squared_error;
  if (model == "mlp") return Objective::squared_error;
  throw ValidationError("unknown model '" + model +
                        "' (gbdt_classify | gbdt_regress | mlp)");
}

DecisionPolicy default_policy(const std::string& model) {
  return model == "gbdt_classify" ? DecisionPolicy::threshold(0.5)
                                  : DecisionPolicy::sign();
}

std::vector<std::string> read_name_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    names.push_back(line);
  }
  if (names.empty()) {
    throw ValidationError("'" + path.string() + "' lists no feature names");
  }
  return names;
}

// Builds the feature matrix from --matrix or from --days/--curves/--features.
FeatureMatrix resolve_matrix(const CommonOpts& opts) {
  if (!opts.matrix_path.empty()) return load_matrix(opts.matrix_path);
  if (opts.days_path.empty()) {
    throw ValidationError("either --matrix or --days is required");
  }
  const auto days = label_days(load_records(opts.days_path));
  const bool is_custom = opts.features.rfind("custom:", 0) == 0;
  if (opts.features == "simple") return build_simple(days);
  if (opts.features == "complex" || is_custom) {
    FeatureMatrix base;
    if (!opts.curves_path.empty()) {
      const CurveBook book = load_curves(opts.curves_path);
      base = build_complex(days, compute_curve_features(book));
    } else if (is_custom) {
      base = build_simple(days);
    } else {
      throw ValidationError("--features complex requires --curves");
    }
    if (!is_custom) return base;
    return base.select_features(read_name_list(opts.features.substr(7)));
  }
  throw ValidationError("unknown feature set '" + opts.features +
                        "' (simple | complex | custom:<file>)");
}

struct SplitMatrices {
  FeatureMatrix train;
  FeatureMatrix test;
  SplitIndices indices;
};

SplitMatrices split_matrix(const FeatureMatrix& m, const SplitPlan& plan) {
  SplitMatrices out;
  out.indices = split_indices(m.value_dates, plan);
  out.train = m.select_rows(out.indices.train);
  out.test = m.select_rows(out.indices.test);
  return out;
}

std::vector<double> labels_for(const FeatureMatrix& m, Objective objective) {
  std::vector<double> y(m.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = objective == Objective::binary_logistic
               ? static_cast<double>(m.best[i])
               : m.strategy_gap[i];
  }
  return y;
}

json dates_json(const FeatureMatrix& m, const std::vector<std::size_t>& idx) {
  json arr = json::array();
  for (std::size_t i : idx) arr.push_back(m.value_dates[i].to_string());
  return arr;
}

// Leakage audit: which value dates ended up in train/test, and the
// cross-validation folds inside train.
json audit_json(const FeatureMatrix& matrix, const SplitMatrices& sm,
                const std::vector<std::vector<std::size_t>>& folds) {
  json j;
  j["train_dates"] = dates_json(matrix, sm.indices.train);
  j["test_dates"] = dates_json(matrix, sm.indices.test);
  json folds_json = json::array();
  for (const auto& fold : folds) folds_json.push_back(dates_json(sm.train, fold));
  j["train_folds"] = folds_json;
  return j;
}

void write_trials_csv(const fs::path& path, const TuneResult& result, int folds,
                      const std::string& prov) {
  CsvWriter w(path);
  w.comment(prov);
  std::vector<std::string> header = {"trial",    "learning_rate", "max_depth",
                                     "n_rounds", "gamma",         "subsample"};
  for (int f = 1; f <= folds; ++f) header.push_back("fold_" + std::to_string(f));
  header.push_back("mean");
  w.row(header);
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    const Trial& trial = result.trials[t];
    std::vector<std::string> row = {std::to_string(t + 1),
                                    format_double(trial.params.learning_rate),
                                    std::to_string(trial.params.max_depth),
                                    std::to_string(trial.params.n_rounds),
                                    format_double(trial.params.gamma),
                                    format_double(trial.params.subsample)};
    for (int f = 0; f < folds; ++f) {
      row.push_back(f < static_cast<int>(trial.fold_scores.size())
                        ? format_double(trial.fold_scores[static_cast<std::size_t>(f)])
                        : "");
    }
    row.push_back(trial.mean_score ? format_double(*trial.mean_score) : "");
    w.row(row);
  }
}

void write_gains_csv(const fs::path& path, const GainsTrace& trace,
                     const std::string& prov) {
  CsvWriter w(path);
  w.comment(prov);
  w.row({"step", "removed", "remaining_count", "accuracy", "delta_realistic"});
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const GainsStep& step = trace.steps[s];
    w.row({std::to_string(s + 1), step.removed,
           std::to_string(step.remaining.size()), format_double(step.accuracy),
           format_double(step.delta_realistic)});
  }
}

void write_curve_csv(const fs::path& path, const TrainingCurve& curve,
                     const std::string& prov) {
  CsvWriter w(path);
  w.comment(prov);
  w.row({"epoch", "train_loss", "val_loss"});
  for (std::size_t e = 0; e < curve.train_loss.size(); ++e) {
    w.row({std::to_string(e + 1), format_double(curve.train_loss[e]),
           format_double(curve.val_loss[e])});
  }
}

void write_shap_summary_csv(const fs::path& path, const ShapSummary& summary,
                            const std::string& prov) {
  CsvWriter w(path);
  w.comment(prov);
  w.row({"rank", "feature", "mean_abs_contribution"});
  for (std::size_t r = 0; r < summary.ranking.size(); ++r) {
    const std::size_t i = summary.ranking[r];
    w.row({std::to_string(r + 1), summary.features[i],
           format_double(summary.mean_abs_contribution[i])});
  }
}

// Per-row signed contributions paired with the raw feature values, one line
// per (row, feature): the data behind a beeswarm-style summary plot.
void write_shap_values_csv(const fs::path& path, const ShapSummary& summary,
                           const std::vector<Date>& dates,
                           const std::string& prov) {
  CsvWriter w(path);
  w.comment(prov);
  w.row({"value_date", "feature", "value", "contribution"});
  for (std::size_t r = 0; r < summary.contributions.size(); ++r) {
    for (std::size_t i : summary.ranking) {
      w.row({dates[r].to_string(), summary.features[i],
             format_double(summary.values[r][i]),
             format_double(summary.contributions[r][i])});
    }
  }
}

double stochastic_share_of(const FeatureMatrix& m) {
  std::size_t stoch = 0;
  for (int b : m.best) stoch += b == 0 ? 1 : 0;
  return static_cast<double>(stoch) / static_cast<double>(m.n_rows());
}

json evaluation_json(const EvaluationReport& report, const FeatureMatrix& test,
                     const BootstrapStats& boot, const BaselinesResult& bases) {
  json j = report_to_json(report, test.value_dates, test.best, test.beta_det,
                          test.beta_stoch);
  j["bootstrap"] = {{"mean", boot.a_mean},
                    {"std", boot.a_std},
                    {"delta_mean", boot.delta_mean},
                    {"delta_std", boot.delta_std}};
  j["baselines"] = {
      {"always_stochastic",
       {{"accuracy", bases.always_stochastic.accuracy},
        {"delta_realistic", bases.always_stochastic.delta_realistic}}},
      {"always_deterministic",
       {{"accuracy", bases.always_deterministic.accuracy},
        {"delta_realistic", bases.always_deterministic.delta_realistic}}},
      {"binomial",
       {{"p", bases.binomial_p},
        {"accuracy", bases.binomial.accuracy},
        {"delta_realistic", bases.binomial.delta_realistic}}}};
  return j;
}

GbdtModel load_gbdt(const fs::path& path) {
  return GbdtModel::from_json(read_json_file(path));
}

Hyperparameters params_from_opts(const CommonOpts& opts) {
  if (opts.params_file.empty()) {
    Hyperparameters p;  // screening defaults
    p.learning_rate = 0.1;
    p.max_depth = 4;
    p.n_rounds = 150;
    p.subsample = 0.8;
    p.seed = derive_seed(opts.seed, 0xf17);
    return p;
  }
  json j = read_json_file(opts.params_file);
  if (j.contains("best_params")) j = j.at("best_params");
  Hyperparameters p = Hyperparameters::from_json(j);
  p.seed = derive_seed(opts.seed, 0xf17);
  return p;
}

// ---------------------------------------------------------------- commands

json config_json_common(const CommonOpts& o, const std::string& command) {
  json j;
  j["command"] = command;
  j["days"] = o.days_path;
  j["curves"] = o.curves_path;
  j["matrix"] = o.matrix_path;
  j["features"] = o.features;
  j["split"] = o.split;
  j["scaling"] = o.scaling;
  j["model"] = o.model;
  j["policy"] = o.policy;
  j["model_file"] = o.model_file;
  j["params_file"] = o.params_file;
  j["iters"] = o.iters;
  j["folds"] = o.folds;
  j["bootstrap"] = o.bootstrap;
  j["seed"] = o.seed;
  j["mlp_loss"] = o.mlp_loss;
  return j;
}

void cmd_synth(const SynthOpts& o) {
  SynthConfig config;
  config.n_days = o.n_days;
  config.seed = o.seed;
  config.signal_strength = o.signal_strength;
  config.noise_std = o.noise_std;
  config.stochastic_share = o.stochastic_share;
  json cfg = {{"command", "synth"},
              {"n_days", o.n_days},
              {"signal_strength", o.signal_strength},
              {"noise_std", o.noise_std},
              {"stochastic_share", o.stochastic_share},
              {"seed", o.seed}};
  SynthData data = generate(config);
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);
  write_records(fs::path(o.out) / "days.csv", data.days, prov);
  write_curves(fs::path(o.out) / "curves.csv", data.curves, prov);
  write_json_file(fs::path(o.out) / "ground_truth.json", data.truth.to_json(), cfg,
                  o.seed);
}

void cmd_featurize(const CommonOpts& o) {
  json cfg = config_json_common(o, "featurize");
  FeatureMatrix m = resolve_matrix(o);
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);
  if (!o.scaling.empty()) {
    ScalingStats stats = fit_scaling(m, parse_scaling(o.scaling));
    m = apply_scaling(m, stats);
    write_json_file(fs::path(o.out) / "scaling.json", stats.to_json(), cfg, o.seed);
  }
  write_matrix(fs::path(o.out) / "features.csv", m, prov);
}

void cmd_tune(const CommonOpts& o) {
  json cfg = config_json_common(o, "tune");
  FeatureMatrix m = resolve_matrix(o);
  SplitMatrices sm = split_matrix(m, parse_split(o.split, derive_seed(o.seed, 1)));
  const Objective objective = objective_for_model(o.model);
  SearchSpace space;
  TuneResult result = random_search(sm.train, space, o.iters, o.folds, objective,
                                    derive_seed(o.seed, 2));
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);
  write_trials_csv(fs::path(o.out) / "trials.csv", result, o.folds, prov);
  json best;
  best["best_params"] = result.trials[result.best_index].params.to_json();
  best["best_trial"] = result.best_index + 1;
  best["best_mean_score"] = *result.trials[result.best_index].mean_score;
  write_json_file(fs::path(o.out) / "best_params.json", best, cfg, o.seed);
  const auto folds = kfold_split(sm.train.n_rows(), o.folds,
                                 derive_seed(derive_seed(o.seed, 2), 0));
  write_json_file(fs::path(o.out) / "audit.json", audit_json(m, sm, folds), cfg,
                  o.seed);
}

void cmd_train(const CommonOpts& o) {
  json cfg = config_json_common(o, "train");
  FeatureMatrix m = resolve_matrix(o);
  SplitMatrices sm = split_matrix(m, parse_split(o.split, derive_seed(o.seed, 1)));
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);
  if (o.model == "mlp") {
    const MlpLoss loss = o.mlp_loss == "custom" ? MlpLoss::custom : MlpLoss::mse;
    MlpConfig config;
    config.layer_sizes = {static_cast<int>(sm.train.n_features()), 50, 20,
                          loss == MlpLoss::custom ? 2 : 1};
    config.dropout_frac = 0.2;
    config.l1_coeff = 0.005;
    config.epochs = std::max(1, o.iters);
    config.seed = derive_seed(o.seed, 3);
    std::vector<std::vector<double>> Y;
    for (std::size_t i = 0; i < sm.train.n_rows(); ++i) {
      if (loss == MlpLoss::custom) {
        Y.push_back({sm.train.beta_det[i], sm.train.beta_stoch[i]});
      } else {
        Y.push_back({sm.train.strategy_gap[i]});
      }
    }
    auto [model, curve] = mlp_fit(sm.train.rows, Y, config, loss, 0.2);
    write_curve_csv(fs::path(o.out) / "training_curve.csv", curve, prov);
    json mj = model.to_json();
    mj["suggested_epoch"] = overfit_report(curve);
    write_json_file(fs::path(o.out) / "mlp.json", mj, cfg, o.seed);
    return;
  }
  const Objective objective = objective_for_model(o.model);
  Hyperparameters params = params_from_opts(o);
  GbdtModel model = fit_gbdt(sm.train.rows, labels_for(sm.train, objective), params,
                             objective, sm.train.spec.names);
  write_json_file(fs::path(o.out) / "model.json", model.to_json(), cfg, o.seed);
}

void cmd_gains(const CommonOpts& o) {
  json cfg = config_json_common(o, "gains");
  FeatureMatrix m = resolve_matrix(o);
  SplitMatrices sm = split_matrix(m, parse_split(o.split, derive_seed(o.seed, 1)));
  const Objective objective = objective_for_model(o.model);
  const DecisionPolicy policy =
      o.policy.empty() ? default_policy(o.model) : parse_policy(o.policy);

  // The loop is scored on a validation slice of the training side; test rows
  // stay unread.
  SplitPlan val_plan;
  val_plan.kind = SplitKind::random;
  val_plan.train_fraction = 0.75;
  val_plan.seed = derive_seed(o.seed, 4);
  SplitMatrices inner = split_matrix(sm.train, val_plan);

  Hyperparameters params = params_from_opts(o);
  if (o.params_file.empty() && o.iters > 0) {
    SearchSpace space;
    TuneResult screen = random_search(inner.train, space, std::min(o.iters, 10),
                                      o.folds, objective, derive_seed(o.seed, 5));
    params = screen.trials[screen.best_index].params;
  }
  GainsTrace trace = gains_loop(inner.train, inner.test, params, objective, policy);
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);
  write_gains_csv(fs::path(o.out) / "gains.csv", trace, prov);
  json sel;
  sel["selected_features"] = trace.selected_features();
  sel["selected_step"] = trace.selected_step + 1;
  sel["params"] = params.to_json();
  write_json_file(fs::path(o.out) / "selected_features.json", sel, cfg, o.seed);
}

void cmd_explain(const CommonOpts& o) {
  json cfg = config_json_common(o, "explain");
  if (o.model_file.empty()) throw ValidationError("explain requires --model-file");
  GbdtModel model = load_gbdt(o.model_file);
  FeatureMatrix m = resolve_matrix(o);
  if (m.spec.names != model.feature_names) {
    m = m.select_features(model.feature_names);
  }
  SplitMatrices sm = split_matrix(m, parse_split(o.split, derive_seed(o.seed, 1)));
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);

  const std::size_t n_rows = std::min<std::size_t>(
      sm.test.n_rows(), static_cast<std::size_t>(std::max(1, o.max_explain_rows)));
  std::vector<std::size_t> subset(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) subset[i] = i;
  FeatureMatrix rows = sm.test.select_rows(subset);

  json explanations = json::array();
  for (std::size_t r = 0; r < rows.n_rows(); ++r) {
    ShapExplanation e = shapley_explain(model, rows.rows[r], sm.train,
                                        kDefaultShapleyBackground,
                                        derive_seed(o.seed, 6));
    json ej = e.to_json(model.feature_names, rows.rows[r]);
    ej["value_date"] = rows.value_dates[r].to_string();
    explanations.push_back(std::move(ej));
  }
  write_json_file(fs::path(o.out) / "explanations.json",
                  json{{"rows", explanations}}, cfg, o.seed);
  ShapSummary summary = shapley_summary(model, rows, sm.train,
                                        kDefaultShapleyBackground,
                                        derive_seed(o.seed, 6));
  write_shap_summary_csv(fs::path(o.out) / "shap_summary.csv", summary, prov);
  write_shap_values_csv(fs::path(o.out) / "shap_values.csv", summary,
                        rows.value_dates, prov);
}

void cmd_evaluate(const CommonOpts& o) {
  json cfg = config_json_common(o, "evaluate");
  if (o.model_file.empty()) throw ValidationError("evaluate requires --model-file");
  GbdtModel model = load_gbdt(o.model_file);
  FeatureMatrix m = resolve_matrix(o);
  if (m.spec.names != model.feature_names && m.n_features() != model.n_features()) {
    throw ValidationError("matrix has " + std::to_string(m.n_features()) +
                          " features, model expects " +
                          std::to_string(model.n_features()));
  }
  SplitMatrices sm = split_matrix(m, parse_split(o.split, derive_seed(o.seed, 1)));
  const DecisionPolicy policy =
      o.policy.empty()
          ? (model.objective == Objective::binary_logistic
                 ? DecisionPolicy::threshold(0.5)
                 : DecisionPolicy::sign())
          : parse_policy(o.policy);
  std::vector<double> outputs = model.predict(sm.test.rows);
  EvaluationReport report = evaluate(outputs, sm.test.best, sm.test.beta_det,
                                     sm.test.beta_stoch, policy);
  BootstrapStats boot =
      bootstrap_eval(report.decisions, sm.test.best, sm.test.beta_det,
                     sm.test.beta_stoch, o.bootstrap, derive_seed(o.seed, 7));
  BaselinesResult bases =
      baselines(sm.test.best, sm.test.beta_det, sm.test.beta_stoch,
                stochastic_share_of(sm.train), derive_seed(o.seed, 8));
  fs::create_directories(o.out);
  write_json_file(fs::path(o.out) / "report.json",
                  evaluation_json(report, sm.test, boot, bases), cfg, o.seed);
}

void cmd_backtest(const CommonOpts& o) {
  json cfg = config_json_common(o, "backtest");
  FeatureMatrix matrix = resolve_matrix(o);
  fs::create_directories(o.out);
  const std::string prov = provenance_comment(cfg, o.seed);
  const fs::path out(o.out);
  json manifest;
  manifest["artifacts"] = json::array();
  auto note = [&manifest](const std::string& name) {
    manifest["artifacts"].push_back(name);
  };

  // Scaling. per-year and global are fitted on the training side only;
  // rolling365 is fitted on the full matrix because each day's window only
  // ever looks backwards.
  const SplitPlan plan = parse_split(o.split, derive_seed(o.seed, 1));
  std::optional<ScalingMode> scaling;
  if (!o.scaling.empty()) scaling = parse_scaling(o.scaling);
  SplitMatrices sm;
  if (scaling && *scaling == ScalingMode::rolling_365) {
    ScalingStats stats = fit_scaling(matrix, *scaling);
    matrix = apply_scaling(matrix, stats);
    write_json_file(out / "scaling.json", stats.to_json(), cfg, o.seed);
    note("scaling.json");
    sm = split_matrix(matrix, plan);
  } else {
    sm = split_matrix(matrix, plan);
    if (scaling) {
      ScalingStats stats = fit_scaling(sm.train, *scaling);
      sm.train = apply_scaling(sm.train, stats);
      sm.test = apply_scaling(sm.test, stats);
      write_json_file(out / "scaling.json", stats.to_json(), cfg, o.seed);
      note("scaling.json");
    }
  }

  const DecisionPolicy policy =
      o.policy.empty() ? default_policy(o.model) : parse_policy(o.policy);
  std::vector<double> outputs;
  json extra;

  if (o.model == "mlp") {
    const MlpLoss loss = o.mlp_loss == "custom" ? MlpLoss::custom : MlpLoss::mse;
    MlpConfig config;
    config.layer_sizes = {static_cast<int>(sm.train.n_features()), 50, 20,
                          loss == MlpLoss::custom ? 2 : 1};
    config.dropout_frac = 0.2;
    config.l1_coeff = 0.005;
    config.epochs = std::max(1, o.iters);
    config.seed = derive_seed(o.seed, 3);
    config.val_split = plan.kind == SplitKind::sequential ? ValSplitKind::tail
                                                          : ValSplitKind::random;
    std::vector<std::vector<double>> Y;
    for (std::size_t i = 0; i < sm.train.n_rows(); ++i) {
      if (loss == MlpLoss::custom) {
        Y.push_back({sm.train.beta_det[i], sm.train.beta_stoch[i]});
      } else {
        Y.push_back({sm.train.strategy_gap[i]});
      }
    }
    auto [probe, curve] = mlp_fit(sm.train.rows, Y, config, loss, 0.2);
    write_curve_csv(out / "training_curve.csv", curve, prov);
    note("training_curve.csv");
    const int stop = overfit_report(curve);
    extra["suggested_epoch"] = stop;
    MlpConfig final_config = config;
    final_config.epochs = stop;
    auto [model, final_curve] = mlp_fit(sm.train.rows, Y, final_config, loss, 0.2);
    (void)final_curve;
    json mj = model.to_json();
    mj["suggested_epoch"] = stop;
    write_json_file(out / "mlp.json", mj, cfg, o.seed);
    note("mlp.json");
    for (const auto& yhat : model.predict(sm.test.rows)) {
      outputs.push_back(loss == MlpLoss::custom ? yhat[1] - yhat[0] : yhat[0]);
    }
    const auto folds = kfold_split(sm.train.n_rows(),
                                   std::min<int>(o.folds,
                                                 static_cast<int>(sm.train.n_rows())),
                                   derive_seed(o.seed, 2));
    write_json_file(out / "audit.json", audit_json(matrix, sm, folds), cfg, o.seed);
    note("audit.json");
  } else {
    const Objective objective = objective_for_model(o.model);
    SearchSpace space;

    // Screening tune -> gain-based reduction on a validation slice of the
    // training data -> full tune on the surviving features.
    TuneResult screen = random_search(sm.train, space, std::min(o.iters, 10),
                                      o.folds, objective, derive_seed(o.seed, 5));
    SplitPlan val_plan;
    val_plan.kind = SplitKind::random;
    val_plan.train_fraction = 0.75;
    val_plan.seed = derive_seed(o.seed, 4);
    SplitMatrices inner = split_matrix(sm.train, val_plan);
    GainsTrace trace =
        gains_loop(inner.train, inner.test,
                   screen.trials[screen.best_index].params, objective, policy);
    write_gains_csv(out / "gains.csv", trace, prov);
    note("gains.csv");
    const std::vector<std::string> selected = trace.selected_features();
    extra["selected_features"] = selected;

    FeatureMatrix train_sel = sm.train.select_features(selected);
    FeatureMatrix test_sel = sm.test.select_features(selected);
    TuneResult tuned = random_search(train_sel, space, o.iters, o.folds, objective,
                                     derive_seed(o.seed, 2));
    write_trials_csv(out / "trials.csv", tuned, o.folds, prov);
    note("trials.csv");
    json best;
    best["best_params"] = tuned.trials[tuned.best_index].params.to_json();
    best["best_trial"] = tuned.best_index + 1;
    best["best_mean_score"] = *tuned.trials[tuned.best_index].mean_score;
    write_json_file(out / "best_params.json", best, cfg, o.seed);
    note("best_params.json");

    Hyperparameters params = tuned.trials[tuned.best_index].params;
    params.seed = derive_seed(o.seed, 0xf17);
    GbdtModel model = fit_gbdt(train_sel.rows, labels_for(train_sel, objective),
                               params, objective, train_sel.spec.names);
    write_json_file(out / "model.json", model.to_json(), cfg, o.seed);
    note("model.json");
    outputs = model.predict(test_sel.rows);

    const auto folds =
        kfold_split(train_sel.n_rows(), o.folds, derive_seed(derive_seed(o.seed, 2), 0));
    write_json_file(out / "audit.json", audit_json(matrix, sm, folds), cfg, o.seed);
    note("audit.json");
  }

  EvaluationReport report = evaluate(outputs, sm.test.best, sm.test.beta_det,
                                     sm.test.beta_stoch, policy);
  BootstrapStats boot =
      bootstrap_eval(report.decisions, sm.test.best, sm.test.beta_det,
                     sm.test.beta_stoch, o.bootstrap, derive_seed(o.seed, 7));
  BaselinesResult bases =
      baselines(sm.test.best, sm.test.beta_det, sm.test.beta_stoch,
                stochastic_share_of(sm.train), derive_seed(o.seed, 8));
  json report_json = evaluation_json(report, sm.test, boot, bases);
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    report_json[it.key()] = it.value();
  }
  write_json_file(out / "report.json", report_json, cfg, o.seed);
  note("report.json");
  manifest["report"] = {{"accuracy", report.accuracy},
                        {"delta_realistic", report.delta_realistic}};
  write_json_file(out / "manifest.json", manifest, cfg, o.seed);
}

void add_common_options(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--days", o.days_path, "days.csv input");
  sub->add_option("--curves", o.curves_path, "curves.csv input");
  sub->add_option("--matrix", o.matrix_path, "precomputed features.csv input");
  sub->add_option("--features", o.features, "simple | complex | custom:<file>");
  sub->add_option("--split", o.split, "random:<frac> | years:<train>/<test>");
  sub->add_option("--scaling", o.scaling, "per-year | rolling365 | global");
  sub->add_option("--model", o.model, "gbdt_classify | gbdt_regress | mlp");
  sub->add_option("--policy", o.policy, "threshold:<x> | band:<lo>,<hi> | sign");
  sub->add_option("--model-file", o.model_file, "trained model JSON");
  sub->add_option("--params", o.params_file, "hyperparameter JSON");
  sub->add_option("--iters", o.iters, "search iterations / training epochs");
  sub->add_option("--folds", o.folds, "cross-validation folds");
  sub->add_option("--bootstrap", o.bootstrap, "bootstrap resamples");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--mlp-loss", o.mlp_loss, "mse | custom");
  sub->add_option("--max-explain-rows", o.max_explain_rows,
                  "rows to explain (explain command)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Strategy selection for day-ahead hydropower bidding"};
  app.require_subcommand(1);

  SynthOpts synth_opts;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--n-days", synth_opts.n_days, "number of days");
  synth_cmd->add_option("--signal-strength", synth_opts.signal_strength,
                        "planted signal variance fraction [0,1]");
  synth_cmd->add_option("--noise-std", synth_opts.noise_std,
                        "strategy-gap noise scale, EUR/day");
  synth_cmd->add_option("--stochastic-share", synth_opts.stochastic_share,
                        "target share of stochastic-best days");
  synth_cmd->add_option("--seed", synth_opts.seed, "random seed");
  synth_cmd->add_option("--out", synth_opts.out, "output directory");

  CommonOpts featurize_opts, tune_opts, train_opts, gains_opts, explain_opts,
      evaluate_opts, backtest_opts;
  CLI::App* featurize_cmd =
      app.add_subcommand("featurize", "build and scale feature matrices");
  add_common_options(featurize_cmd, featurize_opts);
  CLI::App* tune_cmd =
      app.add_subcommand("tune", "randomized hyperparameter search");
  add_common_options(tune_cmd, tune_opts);
  CLI::App* train_cmd = app.add_subcommand("train", "fit and save a model");
  add_common_options(train_cmd, train_opts);
  CLI::App* gains_cmd =
      app.add_subcommand("gains", "gain-based feature reduction trace");
  add_common_options(gains_cmd, gains_opts);
  CLI::App* explain_cmd =
      app.add_subcommand("explain", "Shapley explanation reports");
  add_common_options(explain_cmd, explain_opts);
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "score a model with metrics and baselines");
  add_common_options(evaluate_cmd, evaluate_opts);
  CLI::App* backtest_cmd =
      app.add_subcommand("backtest", "end-to-end split/tune/gains/train/evaluate");
  add_common_options(backtest_cmd, backtest_opts);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 2;
  }

  try {
    if (synth_cmd->parsed()) cmd_synth(synth_opts);
    else if (featurize_cmd->parsed()) cmd_featurize(featurize_opts);
    else if (tune_cmd->parsed()) cmd_tune(tune_opts);
    else if (train_cmd->parsed()) cmd_train(train_opts);
    else if (gains_cmd->parsed()) cmd_gains(gains_opts);
    else if (explain_cmd->parsed()) cmd_explain(explain_opts);
    else if (evaluate_cmd->parsed()) cmd_evaluate(evaluate_opts);
    else if (backtest_cmd->parsed()) cmd_backtest(backtest_opts);
  } catch (const ValidationError& e) {
    std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 3;
  }
  return 0;
}

}  // namespace bidsel
