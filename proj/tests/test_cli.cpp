#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "epic/commands.hpp"
#include "epic/config.hpp"
#include "epic/reports.hpp"
#include "epic/survival_stats.hpp"
#include "epic/synth_data.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
namespace cli = epic::cli;
using nlohmann::json;

namespace {

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "epic_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

json tiny_train_json() {
  auto j = epic::config::to_json(fixture::tiny_train());
  j["optim"]["epochs"] = 2;
  return j;
}

// Cohort file plus training config in `dir`.
void setup(const fs::path& dir, std::size_t n = 30) {
  auto cohort_cfg = epic::config::to_json(fixture::tiny_cohort(n, 3));
  write(dir / "cohort.json", cohort_cfg.dump());
  cli::cmd_simulate(dir / "cohort.json", dir / "cohort.jsonl");
  write(dir / "train.json", tiny_train_json().dump());
}

int exit_code_of(auto&& fn) {
  try {
    fn();
  } catch (const cli::CommandError& e) {
    return e.exit_code();
  }
  return 0;
}

// Every file under `dir` except manifests, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    out[fs::relative(e.path(), dir).string()] = epic::io::read_text(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config round trip and defaults") {
  const auto c = fixture::tiny_train(5);
  const auto back = epic::config::train_config_from_json(epic::config::to_json(c));
  CHECK(epic::config::to_json(back) == epic::config::to_json(c));
  CHECK(json::parse(cli::defaults_for("train")) == epic::config::to_json(epic::train::TrainConfig{}));
  CHECK(json::parse(cli::defaults_for("simulate")) == epic::config::to_json(epic::synth::CohortConfig{}));
  CHECK_THROWS_AS(cli::defaults_for("nope"), cli::CommandError);
}

TEST_CASE("config errors name the offending field") {
  auto bad_value = tiny_train_json();
  bad_value["parts"]["top_p"] = 0;
  try {
    epic::config::train_config_from_json(bad_value);
    FAIL("expected ConfigError");
  } catch (const epic::config::ConfigError& e) {
    CHECK(e.field() == "parts.top_p");
  }
  auto unknown = tiny_train_json();
  unknown["loss"]["lambda_x"] = 1.0;
  CHECK_THROWS_AS(epic::config::train_config_from_json(unknown), epic::config::ConfigError);
  auto wrong_type = tiny_train_json();
  wrong_type["optim"]["epochs"] = "ten";
  CHECK_THROWS_AS(epic::config::train_config_from_json(wrong_type), epic::config::ConfigError);
  auto negative = tiny_train_json();
  negative["optim"]["epochs"] = -1;
  CHECK_THROWS_AS(epic::config::train_config_from_json(negative), epic::config::ConfigError);
  CHECK_THROWS_AS(epic::config::cohort_config_from_json(json::object()), epic::config::ConfigError);
}

TEST_CASE("bad configs and missing files map to exit codes") {
  const auto dir = fresh("codes");
  write(dir / "no_slides.json", R"({"seed": 1})");
  CHECK(exit_code_of([&] { cli::cmd_simulate(dir / "no_slides.json", dir / "c.jsonl"); }) == 2);
  write(dir / "bad.json", "{ not json");
  CHECK(exit_code_of([&] { cli::cmd_simulate(dir / "bad.json", dir / "c.jsonl"); }) == 2);
  CHECK(exit_code_of([&] { cli::cmd_simulate(dir / "missing.json", dir / "c.jsonl"); }) == 2);

  setup(dir, 12);
  cli::TrainOptions opts{dir / "missing.jsonl", dir / "train.json", dir / "out", std::nullopt, false};
  CHECK(exit_code_of([&] { cli::cmd_train(opts); }) == 1);
  opts.cohort = dir / "cohort.jsonl";
  CHECK(exit_code_of([&] { cli::cmd_crossval(opts, 1); }) == 2);
  CHECK(exit_code_of([&] { cli::cmd_crossval(opts, 13); }) == 2);
}

TEST_CASE("simulate writes the cohort and a manifest") {
  const auto dir = fresh("simulate");
  setup(dir, 10);
  CHECK(epic::synth::load_cohort(dir / "cohort.jsonl").size() == 10);
  const auto m = json::parse(epic::io::read_text(dir / "cohort.jsonl.manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["tool_version"] == cli::kToolVersion);
  CHECK(m["config"]["n_slides"] == 10);

  cli::cmd_simulate(dir / "cohort.json", dir / "seeded.jsonl", 99);
  CHECK_FALSE(epic::io::read_text(dir / "seeded.jsonl") == epic::io::read_text(dir / "cohort.jsonl"));
}

TEST_CASE("train outputs are byte-identical across reruns and eval reproduces them") {
  const auto dir = fresh("train");
  setup(dir);
  cli::TrainOptions opts{dir / "cohort.jsonl", dir / "train.json", dir / "a", std::nullopt, false};
  cli::cmd_train(opts);
  opts.out_dir = dir / "b";
  cli::cmd_train(opts);
  const auto a = snapshot(dir / "a");
  CHECK(a.size() == 7);
  CHECK(a == snapshot(dir / "b"));

  cli::cmd_eval(dir / "a" / "checkpoint.json", dir / "cohort.jsonl", dir / "eval");
  auto in_sample = epic::io::report_from_json(json::parse(a.at("report.json")));
  auto evaluated = epic::io::report_from_json(json::parse(epic::io::read_text(dir / "eval" / "report.json")));
  CHECK(evaluated.label == "eval");
  CHECK(evaluated.risks == in_sample.risks);
  CHECK(evaluated.ci == in_sample.ci);
  CHECK(epic::io::read_text(dir / "eval" / "risks.csv") == a.at("risks.csv"));

  const auto log = a.at("train_log.jsonl");
  std::istringstream lines(log);
  int epochs = 0;
  for (std::string line; std::getline(lines, line);) {
    if (json::parse(line)["type"] == "epoch") ++epochs;
  }
  CHECK(epochs == 2);

  opts.out_dir = dir / "boostless";
  opts.no_boost = true;
  cli::cmd_train(opts);
  CHECK(json::parse(epic::io::read_text(dir / "boostless" / "manifest.json"))["config"]["loss"]["lambda_s"] == 0.0);
}

TEST_CASE("eval rejects mismatched or degenerate cohorts") {
  const auto dir = fresh("eval_errors");
  setup(dir, 12);
  cli::cmd_train({dir / "cohort.jsonl", dir / "train.json", dir / "model", std::nullopt, false});

  auto wide = fixture::tiny_cohort(5, 1);
  wide.input_dim = 9;
  epic::synth::save_cohort(epic::synth::generate_cohort(wide), dir / "wide.jsonl");
  try {
    cli::cmd_eval(dir / "model" / "checkpoint.json", dir / "wide.jsonl", dir / "e1");
    FAIL("expected CommandError");
  } catch (const cli::CommandError& e) {
    CHECK(e.exit_code() == 1);
    CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
  }

  epic::synth::save_cohort(epic::synth::generate_cohort(fixture::tiny_cohort(1, 2)), dir / "one.jsonl");
  CHECK(exit_code_of([&] { cli::cmd_eval(dir / "model" / "checkpoint.json", dir / "one.jsonl", dir / "e2"); }) == 1);
  write(dir / "broken_ckpt.json", "{}");
  CHECK(exit_code_of([&] { cli::cmd_eval(dir / "broken_ckpt.json", dir / "cohort.jsonl", dir / "e3"); }) == 1);
}

TEST_CASE("crossval writes per-fold and pooled outputs reproducibly") {
  const auto dir = fresh("crossval");
  setup(dir, 25);
  cli::TrainOptions opts{dir / "cohort.jsonl", dir / "train.json", dir / "a", std::nullopt, false};
  cli::cmd_crossval(opts, 5);
  opts.out_dir = dir / "b";
  cli::cmd_crossval(opts, 5);
  const auto a = snapshot(dir / "a");
  CHECK(a == snapshot(dir / "b"));
  for (int f = 0; f < 5; ++f) CHECK(a.contains("fold_" + std::to_string(f) + "/checkpoint.json"));

  // pooled CI recomputed from risks.csv alone
  std::istringstream csv(a.at("pooled/risks.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "subject_id,risk,time,event");
  std::vector<double> risks;
  std::vector<epic::stats::SurvivalRecord> records;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string id, risk, time, event;
    std::getline(row, id, ',');
    std::getline(row, risk, ',');
    std::getline(row, time, ',');
    std::getline(row, event, ',');
    risks.push_back(std::stod(risk));
    records.push_back({id, std::stod(time), event == "1"});
  }
  CHECK(risks.size() == 25);
  const auto pooled = json::parse(a.at("pooled/report.json"));
  CHECK(epic::stats::concordance_index(risks, records) == pooled["ci"].get<double>());
}
