#include "epic/commands.hpp"

#include <chrono>
#include <numeric>

#include "epic/config.hpp"
#include "epic/reports.hpp"
#include "epic/synth_data.hpp"
#include "epic/train_harness.hpp"

namespace epic::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Manifest {
 public:
  Manifest(std::string command, json config, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()),
        body_({{"manifest_version", 1},
               {"tool", "epic"},
               {"tool_version", kToolVersion},
               {"command", std::move(command)},
               {"config", std::move(config)},
               {"seed", seed},
               {"inputs", json::object()},
               {"options", json::object()},
               {"outputs", json::array()}}) {}

  void input(const std::string& name, const fs::path& p) { body_["inputs"][name] = p.string(); }
  void option(const std::string& name, json value) { body_["options"][name] = std::move(value); }
  void output(const fs::path& p) { body_["outputs"].push_back(p.string()); }

  void write(const fs::path& path) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    body_["duration_seconds"] = elapsed.count();
    io::write_json(path, body_);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  json body_;
};

// Maps library exceptions onto exit codes.
template <class Fn>
void guarded(Fn&& fn) {
  try {
    fn();
  } catch (const CommandError&) {
    throw;
  } catch (const config::ConfigError& e) {
    throw CommandError(2, std::string("invalid config: ") + e.what());
  } catch (const synth::ParseError& e) {
    throw CommandError(1, std::string("cannot read cohort: ") + e.what());
  } catch (const stats::UndefinedStatistic& e) {
    throw CommandError(1, e.what());
  } catch (const std::exception& e) {
    throw CommandError(1, e.what());
  }
}

train::TrainConfig resolve_train_config(const TrainOptions& options) {
  train::TrainConfig c = options.config ? config::train_config_from_json(config::read_config_file(*options.config))
                                        : train::TrainConfig{};
  if (options.seed) c.seed = *options.seed;
  if (options.no_boost) c.lambda_s = 0.0;
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CommandError(1, "cannot create output directory " + dir.string() + ": " + ec.message());
}

std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

std::vector<stats::SurvivalRecord> records_for(const synth::TileCohort& cohort, std::span<const std::size_t> ids) {
  std::vector<stats::SurvivalRecord> out;
  for (auto id : ids) out.push_back(cohort.at(id).record);
  return out;
}

// report.json, km_low.csv, km_high.csv, risks.csv
void write_report_bundle(const fs::path& dir, const train::EvalReport& report,
                         std::span<const stats::SurvivalRecord> records, Manifest& manifest) {
  io::write_json(dir / "report.json", io::to_json(report));
  manifest.output(dir / "report.json");
  io::write_text(dir / "risks.csv", io::risks_csv(report.subject_ids, report.risks, records));
  manifest.output(dir / "risks.csv");
  if (report.error) return;
  io::write_text(dir / "km_low.csv", io::km_csv(report.km_low));
  io::write_text(dir / "km_high.csv", io::km_csv(report.km_high));
  manifest.output(dir / "km_low.csv");
  manifest.output(dir / "km_high.csv");
}

std::string training_log(const std::vector<train::EpochSummary>& epochs) {
  std::string out;
  for (const auto& e : epochs) {
    for (const auto& s : e.steps) out += io::to_json(s).dump() + "\n";
    out += io::epoch_line(e).dump() + "\n";
  }
  return out;
}

}  // namespace

void cmd_simulate(const fs::path& config_path, const fs::path& out_path, std::optional<std::uint64_t> seed) {
  guarded([&] {
    auto raw = config::read_config_file(config_path);
    if (seed && raw.is_object()) raw["seed"] = *seed;
    const auto cfg = config::cohort_config_from_json(raw);
    Manifest manifest("simulate", config::to_json(cfg), cfg.seed);
    manifest.input("config", config_path);
    if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
    synth::save_cohort(synth::generate_cohort(cfg), out_path);
    manifest.output(out_path);
    manifest.write(fs::path(out_path.string() + ".manifest.json"));
  });
}

void cmd_train(const TrainOptions& options) {
  guarded([&] {
    const auto cfg = resolve_train_config(options);
    const auto cohort = synth::load_cohort(options.cohort);
    if (cohort.empty()) throw CommandError(1, "cohort " + options.cohort.string() + " is empty");
    ensure_dir(options.out_dir);
    Manifest manifest("train", config::to_json(cfg), cfg.seed);
    manifest.input("cohort", options.cohort);
    if (options.config) manifest.input("config", *options.config);
    manifest.option("no_boost", options.no_boost);

    const auto ids = all_ids(cohort.size());
    const auto run = train::fit(cohort, ids, cfg);
    io::save_checkpoint(run.state, options.out_dir / "checkpoint.json");
    manifest.output(options.out_dir / "checkpoint.json");
    io::write_text(options.out_dir / "train_log.jsonl", training_log(run.epochs));
    manifest.output(options.out_dir / "train_log.jsonl");

    const auto records = records_for(cohort, ids);
    const auto report = train::evaluate(run.state, cohort, ids, "in-sample");
    write_report_bundle(options.out_dir, report, records, manifest);
    io::write_json(options.out_dir / "parts.json", io::parts_dump(train::inspect_parts(run.state, cohort, ids)));
    manifest.output(options.out_dir / "parts.json");
    manifest.write(options.out_dir / "manifest.json");
  });
}

void cmd_eval(const fs::path& checkpoint, const fs::path& cohort_path, const fs::path& out_dir) {
  guarded([&] {
    const auto state = io::load_checkpoint(checkpoint);
    const auto cohort = synth::load_cohort(cohort_path);
    const std::size_t model_dim = state.net.config().input_dim;
    for (const auto& bag : cohort) {
      if (bag.tiles.cols() != model_dim) {
        throw CommandError(1, "dimension mismatch: cohort tiles have " + std::to_string(bag.tiles.cols()) +
                                  " features, checkpoint expects " + std::to_string(model_dim));
      }
    }
    ensure_dir(out_dir);
    Manifest manifest("eval", json::object(), state.net.config().seed);
    manifest.input("checkpoint", checkpoint);
    manifest.input("cohort", cohort_path);

    const auto ids = all_ids(cohort.size());
    const auto report = train::evaluate(state, cohort, ids, "eval");
    write_report_bundle(out_dir, report, records_for(cohort, ids), manifest);
    io::write_json(out_dir / "parts.json", io::parts_dump(train::inspect_parts(state, cohort, ids)));
    manifest.output(out_dir / "parts.json");
    manifest.write(out_dir / "manifest.json");
  });
}

void cmd_crossval(const TrainOptions& options, std::size_t folds) {
  guarded([&] {
    const auto cfg = resolve_train_config(options);
    const auto cohort = synth::load_cohort(options.cohort);
    if (folds < 2 || folds > cohort.size()) {
      throw CommandError(2, "--folds must be in [2, " + std::to_string(cohort.size()) + "], got " +
                                std::to_string(folds));
    }
    ensure_dir(options.out_dir);
    Manifest manifest("crossval", config::to_json(cfg), cfg.seed);
    manifest.input("cohort", options.cohort);
    if (options.config) manifest.input("config", *options.config);
    manifest.option("no_boost", options.no_boost);
    manifest.option("folds", folds);

    const auto result = train::cross_validate(cohort, cfg, folds);
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
      const fs::path dir = options.out_dir / ("fold_" + std::to_string(f));
      ensure_dir(dir);
      io::save_checkpoint(result.fold_states[f], dir / "checkpoint.json");
      manifest.output(dir / "checkpoint.json");
      io::write_text(dir / "train_log.jsonl", training_log(result.fold_logs[f]));
      manifest.output(dir / "train_log.jsonl");
      write_report_bundle(dir, result.fold_reports[f], records_for(cohort, result.folds[f].val), manifest);
    }
    std::vector<std::size_t> pooled_ids;
    for (const auto& fold : result.folds) pooled_ids.insert(pooled_ids.end(), fold.val.begin(), fold.val.end());
    const fs::path pooled = options.out_dir / "pooled";
    ensure_dir(pooled);
    write_report_bundle(pooled, result.pooled, records_for(cohort, pooled_ids), manifest);
    manifest.write(options.out_dir / "manifest.json");
  });
}

std::string defaults_for(const std::string& command) {
  if (command == "simulate") return config::to_json(synth::CohortConfig{}).dump(2);
  if (command == "train" || command == "crossval") return config::to_json(train::TrainConfig{}).dump(2);
  throw CommandError(2, "no defaults for command '" + command + "'");
}

}  // namespace epic::cli
