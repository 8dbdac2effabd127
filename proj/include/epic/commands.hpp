#pragma once

// The four CLI commands as library calls, so tests can drive them without a
// subprocess. Each writes its artifacts plus one manifest.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace epic::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
class CommandError : public std::runtime_error {
 public:
  CommandError(int exit_code, const std::string& what) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct TrainOptions {
  std::filesystem::path cohort;
  std::optional<std::filesystem::path> config;  // defaults when absent
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  bool no_boost = false;
};

/// Writes the cohort to `out_path` and its manifest to `<out_path>.manifest.json`.
void cmd_simulate(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
                  std::optional<std::uint64_t> seed = std::nullopt);

void cmd_train(const TrainOptions& options);

void cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& cohort,
              const std::filesystem::path& out_dir);

void cmd_crossval(const TrainOptions& options, std::size_t folds);

/// Default config JSON for `simulate` or `train`/`crossval`.
std::string defaults_for(const std::string& command);

}  // namespace epic::cli
