#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "epic/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Part-based survival regression with stratification boosting on synthetic tile cohorts", "epic"};
  app.require_subcommand(1);
  app.set_version_flag("--version", epic::cli::kToolVersion);

  std::string config, cohort, out, checkpoint;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  bool no_boost = false;
  bool print_defaults = false;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic censored cohort (JSON lines)");
  simulate->add_option("--config", config, "cohort config file");
  simulate->add_option("--out", out, "output cohort file");
  auto* sim_seed = simulate->add_option("--seed", seed, "override the config seed");
  simulate->add_flag("--print-defaults", print_defaults, "print the default cohort config and exit");

  auto* train = app.add_subcommand("train", "train on a whole cohort and write a checkpoint");
  train->add_option("--cohort", cohort, "cohort file");
  train->add_option("--config", config, "training config file (defaults when omitted)");
  train->add_option("--out", out, "output directory");
  auto* train_seed = train->add_option("--seed", seed, "override the config seed");
  train->add_flag("--no-boost", no_boost, "disable stratification boosting (lambda_s = 0)");
  train->add_flag("--print-defaults", print_defaults, "print the default training config and exit");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a cohort");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json written by train");
  eval->add_option("--cohort", cohort, "cohort file");
  eval->add_option("--out", out, "output directory");

  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation with pooled validation report");
  crossval->add_option("--cohort", cohort, "cohort file");
  crossval->add_option("--config", config, "training config file (defaults when omitted)");
  crossval->add_option("--out", out, "output directory");
  crossval->add_option("--folds", folds, "number of folds")->capture_default_str();
  auto* cv_seed = crossval->add_option("--seed", seed, "override the config seed");
  crossval->add_flag("--no-boost", no_boost, "disable stratification boosting (lambda_s = 0)");
  crossval->add_flag("--print-defaults", print_defaults, "print the default training config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto need = [](const std::string& value, const char* flag) {
    if (value.empty()) throw epic::cli::CommandError(2, std::string("missing required option ") + flag);
  };

  try {
    if (*simulate) {
      if (print_defaults) {
        std::cout << epic::cli::defaults_for("simulate") << '\n';
        return 0;
      }
      need(config, "--config");
      need(out, "--out");
      epic::cli::cmd_simulate(config, out, *sim_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
    } else if (*eval) {
      need(checkpoint, "--checkpoint");
      need(cohort, "--cohort");
      need(out, "--out");
      epic::cli::cmd_eval(checkpoint, cohort, out);
    } else {
      const bool is_train = static_cast<bool>(*train);
      if (print_defaults) {
        std::cout << epic::cli::defaults_for(is_train ? "train" : "crossval") << '\n';
        return 0;
      }
      need(cohort, "--cohort");
      need(out, "--out");
      epic::cli::TrainOptions options;
      options.cohort = cohort;
      if (!config.empty()) options.config = config;
      options.out_dir = out;
      if (is_train ? static_cast<bool>(*train_seed) : static_cast<bool>(*cv_seed)) options.seed = seed;
      options.no_boost = no_boost;
      if (is_train) {
        epic::cli::cmd_train(options);
      } else {
        epic::cli::cmd_crossval(options, folds);
      }
    }
  } catch (const epic::cli::CommandError& e) {
    std::cerr << "epic: " << e.what() << '\n';
    return e.exit_code();
  }
  return 0;
}
