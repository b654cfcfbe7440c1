#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "bidsel/cli.hpp"
#include "bidsel/features.hpp"
#include "bidsel/gbdt.hpp"

using namespace bidsel;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path workspace() {
  const fs::path dir = fs::temp_directory_path() / "bidsel_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.is_open());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json slurp_json(const fs::path& p) { return json::parse(slurp(p)); }

// Generates a small dataset once and reuses it across cases.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    const fs::path d = workspace() / "data";
    fs::create_directories(d);
    const int rc = run_cli({"synth", "--n-days", "140", "--seed", "7",
                            "--noise-std", "25", "--out", d.string()});
    REQUIRE(rc == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth writes the three artifacts") {
  const fs::path& d = data_dir();
  CHECK(fs::exists(d / "days.csv"));
  CHECK(fs::exists(d / "curves.csv"));
  CHECK(fs::exists(d / "ground_truth.json"));
  const json truth = slurp_json(d / "ground_truth.json");
  CHECK(truth.at("planted_features").size() == 3);
  CHECK(truth.at("provenance").contains("config_hash"));
}

TEST_CASE("featurize builds simple and complex matrices") {
  const fs::path out = workspace() / "featurize";
  int rc = run_cli({"featurize", "--days", (data_dir() / "days.csv").string(),
                    "--features", "simple", "--out", out.string()});
  REQUIRE(rc == 0);
  FeatureMatrix simple = load_matrix(out / "features.csv");
  CHECK(simple.n_features() == 8);
  CHECK(simple.n_rows() == 140);

  const fs::path out2 = workspace() / "featurize_complex";
  rc = run_cli({"featurize", "--days", (data_dir() / "days.csv").string(),
                "--curves", (data_dir() / "curves.csv").string(), "--features",
                "complex", "--scaling", "global", "--out", out2.string()});
  REQUIRE(rc == 0);
  FeatureMatrix complex_m = load_matrix(out2 / "features.csv");
  CHECK(complex_m.n_rows() == 140 - 28);
  CHECK(fs::exists(out2 / "scaling.json"));
  // year is constant in 140 days, so scaling drops it from the 113.
  const json scaling = slurp_json(out2 / "scaling.json");
  CHECK(complex_m.n_features() ==
        113 - scaling.at("dropped").size());
}

TEST_CASE("tune writes a trial log, best params, and a leakage audit") {
  const fs::path out = workspace() / "tune";
  const int rc = run_cli({"tune", "--days", (data_dir() / "days.csv").string(),
                          "--features", "simple", "--split", "random:0.67",
                          "--model", "gbdt_classify", "--iters", "3", "--folds",
                          "3", "--seed", "1", "--out", out.string()});
  REQUIRE(rc == 0);
  CHECK(fs::exists(out / "trials.csv"));
  const json best = slurp_json(out / "best_params.json");
  CHECK(best.at("best_params").contains("learning_rate"));

  const json audit = slurp_json(out / "audit.json");
  std::set<std::string> train_dates, test_dates;
  for (const auto& s : audit.at("train_dates")) train_dates.insert(s.get<std::string>());
  for (const auto& s : audit.at("test_dates")) test_dates.insert(s.get<std::string>());
  CHECK(!train_dates.empty());
  CHECK(!test_dates.empty());
  for (const auto& d : test_dates) CHECK(train_dates.count(d) == 0);
  // Every cross-validation fold stays inside the training side.
  for (const auto& fold : audit.at("train_folds")) {
    for (const auto& s : fold) {
      CHECK(train_dates.count(s.get<std::string>()) == 1);
      CHECK(test_dates.count(s.get<std::string>()) == 0);
    }
  }
}

TEST_CASE("train then evaluate produces a full report") {
  const fs::path out = workspace() / "train";
  int rc = run_cli({"train", "--days", (data_dir() / "days.csv").string(),
                    "--features", "simple", "--split", "random:0.67", "--model",
                    "gbdt_classify", "--seed", "3", "--out", out.string()});
  REQUIRE(rc == 0);
  GbdtModel model = GbdtModel::from_json(slurp_json(out / "model.json"));
  CHECK(model.n_features() == 8);

  rc = run_cli({"evaluate", "--days", (data_dir() / "days.csv").string(),
                "--features", "simple", "--split", "random:0.67", "--model-file",
                (out / "model.json").string(), "--policy", "threshold:0.5",
                "--bootstrap", "30", "--seed", "3", "--out", out.string()});
  REQUIRE(rc == 0);
  const json report = slurp_json(out / "report.json");
  for (const char* key :
       {"accuracy", "delta_realistic", "classified_fraction", "mean_gap_chosen",
        "mean_gap_optimal", "bootstrap", "baselines", "decisions", "provenance"}) {
    CHECK(report.contains(key));
  }
  CHECK(report.at("decisions").size() == 46);  // 140 - round(0.67*140)
  CHECK(report.at("baselines").contains("always_stochastic"));
  CHECK(report.at("baselines").contains("binomial"));

  // A band policy abstains on mid-range probabilities.
  rc = run_cli({"evaluate", "--days", (data_dir() / "days.csv").string(),
                "--features", "simple", "--split", "random:0.67", "--model-file",
                (out / "model.json").string(), "--policy", "band:0.35,0.65",
                "--bootstrap", "20", "--seed", "3", "--out",
                (workspace() / "band").string()});
  REQUIRE(rc == 0);
  const json banded = slurp_json(workspace() / "band" / "report.json");
  CHECK(banded.at("classified_fraction").get<double>() < 1.0);
  int unclassified = 0;
  for (const auto& d : banded.at("decisions")) {
    if (d.at("decision") == "unclassified") ++unclassified;
  }
  CHECK(unclassified > 0);
}

TEST_CASE("gains emits one step per feature-set size") {
  const fs::path out = workspace() / "gains";
  const int rc = run_cli({"gains", "--days", (data_dir() / "days.csv").string(),
                          "--features", "simple", "--split", "random:0.67",
                          "--model", "gbdt_classify", "--iters", "2", "--folds",
                          "3", "--seed", "5", "--out", out.string()});
  REQUIRE(rc == 0);
  std::ifstream in(out / "gains.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 1 + 8);  // header + one step per set size
  const json selected = slurp_json(out / "selected_features.json");
  CHECK(selected.at("selected_features").size() >= 1);
}

TEST_CASE("explain honors local accuracy through the CLI") {
  const fs::path out = workspace() / "explain";
  const fs::path spec_file = workspace() / "three.txt";
  {
    std::ofstream f(spec_file);
    f << "water_value\ninflow_deviation\nreservoir_filling_2\n";
  }
  int rc = run_cli({"train", "--days", (data_dir() / "days.csv").string(),
                    "--features", "custom:" + spec_file.string(), "--split",
                    "random:0.67", "--model", "gbdt_classify", "--seed", "4",
                    "--out", out.string()});
  REQUIRE(rc == 0);
  rc = run_cli({"explain", "--days", (data_dir() / "days.csv").string(),
                "--features", "custom:" + spec_file.string(), "--split",
                "random:0.67", "--model-file", (out / "model.json").string(),
                "--max-explain-rows", "10", "--seed", "4", "--out", out.string()});
  REQUIRE(rc == 0);
  const json explanations = slurp_json(out / "explanations.json");
  REQUIRE(explanations.at("rows").size() == 10);
  for (const auto& row : explanations.at("rows")) {
    double sum = row.at("base_value").get<double>();
    for (const auto& f : row.at("features")) {
      sum += f.at("contribution").get<double>();
    }
    CHECK(sum == doctest::Approx(row.at("prediction").get<double>()).epsilon(1e-6));
  }
  CHECK(fs::exists(out / "shap_summary.csv"));
  // One line per (row, feature) behind the beeswarm-style plot.
  std::ifstream values(out / "shap_values.csv");
  std::string line;
  int value_rows = 0;
  while (std::getline(values, line)) {
    if (!line.empty() && line[0] != '#') ++value_rows;
  }
  CHECK(value_rows == 1 + 10 * 3);
}

TEST_CASE("backtest runs end to end and is byte-deterministic") {
  const fs::path out = workspace() / "backtest";
  const std::vector<std::string> args = {
      "backtest", "--days", (data_dir() / "days.csv").string(),
      "--features", "simple", "--split", "random:0.7", "--model",
      "gbdt_classify", "--iters", "3", "--folds", "3", "--bootstrap", "20",
      "--seed", "11", "--out", out.string()};
  REQUIRE(run_cli(args) == 0);
  const std::string report_1 = slurp(out / "report.json");
  const std::string manifest_1 = slurp(out / "manifest.json");
  const std::string gains_1 = slurp(out / "gains.csv");
  REQUIRE(run_cli(args) == 0);
  CHECK(slurp(out / "report.json") == report_1);
  CHECK(slurp(out / "manifest.json") == manifest_1);
  CHECK(slurp(out / "gains.csv") == gains_1);

  const json manifest = slurp_json(out / "manifest.json");
  CHECK(manifest.at("artifacts").size() >= 5);
}

TEST_CASE("mlp backtest trains, stops early, and evaluates") {
  const fs::path out = workspace() / "backtest_mlp";
  const int rc = run_cli({"backtest", "--days", (data_dir() / "days.csv").string(),
                          "--features", "simple", "--scaling", "global",
                          "--split", "random:0.7", "--model", "mlp", "--iters",
                          "40", "--seed", "2", "--out", out.string()});
  REQUIRE(rc == 0);
  CHECK(fs::exists(out / "training_curve.csv"));
  CHECK(fs::exists(out / "mlp.json"));
  const json report = slurp_json(out / "report.json");
  CHECK(report.at("suggested_epoch").get<int>() >= 1);
  CHECK(report.at("accuracy").get<double>() >= 0.0);
}

TEST_CASE("sequential year splits work through the CLI") {
  const fs::path d = workspace() / "two_years";
  fs::create_directories(d);
  REQUIRE(run_cli({"synth", "--n-days", "500", "--seed", "19", "--out",
                   d.string()}) == 0);
  const fs::path out = workspace() / "years_run";
  const int rc = run_cli({"train", "--days", (d / "days.csv").string(),
                          "--features", "simple", "--split", "years:2016/2017",
                          "--model", "gbdt_classify", "--seed", "2", "--out",
                          out.string()});
  REQUIRE(rc == 0);
  const int rc2 = run_cli({"evaluate", "--days", (d / "days.csv").string(),
                           "--features", "simple", "--split", "years:2016/2017",
                           "--model-file", (out / "model.json").string(),
                           "--bootstrap", "20", "--seed", "2", "--out",
                           out.string()});
  REQUIRE(rc2 == 0);
  const json report = slurp_json(out / "report.json");
  // Every evaluated day belongs to the held-out year.
  for (const auto& day : report.at("decisions")) {
    CHECK(day.at("value_date").get<std::string>().substr(0, 4) == "2017");
  }
  // A year absent from the data is rejected.
  CHECK(run_cli({"train", "--days", (d / "days.csv").string(), "--features",
                 "simple", "--split", "years:2016/2031", "--model",
                 "gbdt_classify", "--out", out.string()}) == 2);
}

TEST_CASE("column mismatches surface as validation exit codes") {
  const fs::path out = workspace() / "mismatch";
  int rc = run_cli({"train", "--days", (data_dir() / "days.csv").string(),
                    "--features", "simple", "--split", "random:0.67", "--model",
                    "gbdt_classify", "--seed", "9", "--out", out.string()});
  REQUIRE(rc == 0);
  // Evaluating the 8-feature model against a 3-column matrix must fail.
  const fs::path spec_file = workspace() / "mismatch_cols.txt";
  {
    std::ofstream f(spec_file);
    f << "water_value\ninflow_deviation\nreservoir_filling_2\n";
  }
  rc = run_cli({"evaluate", "--days", (data_dir() / "days.csv").string(),
                "--features", "custom:" + spec_file.string(), "--split",
                "random:0.67", "--model-file", (out / "model.json").string(),
                "--out", out.string()});
  CHECK(rc == 2);
}

TEST_CASE("usage and validation failures exit with code 2") {
  CHECK(run_cli({"no_such_command"}) == 2);
  CHECK(run_cli({"synth", "--n-days", "10", "--out",
                 (workspace() / "bad").string()}) == 2);  // below minimum
  CHECK(run_cli({"backtest", "--days", "/nonexistent/days.csv", "--out",
                 (workspace() / "bad2").string()}) == 2);
  CHECK(run_cli({"evaluate", "--days", (data_dir() / "days.csv").string(),
                 "--policy", "threshold:0.5", "--out",
                 (workspace() / "bad3").string()}) == 2);  // missing model file
}

TEST_CASE("unwritable output directories exit with code 3") {
  CHECK(run_cli({"synth", "--n-days", "40", "--out",
                 "/proc/bidsel_cannot_write_here"}) == 3);
}
