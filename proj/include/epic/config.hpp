#pragma once

// JSON configuration files for cohorts and training runs. Unknown keys,
// wrong types and invalid values are reported with the offending field path.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "epic/synth_data.hpp"
#include "epic/train_harness.hpp"

namespace epic::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

nlohmann::json to_json(const synth::CohortConfig& c);
nlohmann::json to_json(const train::TrainConfig& c);

/// `n_slides` is required; every other field falls back to its default.
synth::CohortConfig cohort_config_from_json(const nlohmann::json& j);
train::TrainConfig train_config_from_json(const nlohmann::json& j);

/// Reads a config file. A run manifest is accepted too: its "config" section is used.
nlohmann::json read_config_file(const std::filesystem::path& path);

}  // namespace epic::config
