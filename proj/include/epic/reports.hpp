#pragma once

// On-disk artifacts: evaluation reports (JSON), KM curves (CSV), the JSON-lines
// training log, part-inspection dumps and model checkpoints.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epic/part_model.hpp"
#include "epic/train_harness.hpp"

namespace epic::io {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json to_json(const loss::LossBreakdown& b);
nlohmann::json to_json(const stats::KmCurve& km);
nlohmann::json to_json(const train::EvalReport& r);
nlohmann::json to_json(const train::StepLog& s);
nlohmann::json epoch_line(const train::EpochSummary& e);

train::EvalReport report_from_json(const nlohmann::json& j);

/// Header `time,survival,at_risk,events`, one row per event time.
std::string km_csv(const stats::KmCurve& km);

/// Header `subject_id,risk,time,event`.
std::string risks_csv(std::span<const std::string> ids, std::span<const double> risks,
                      std::span<const stats::SurvivalRecord> records);

/// Per slide: part index, empty flag and representative tile ids.
nlohmann::json parts_dump(std::span<const parts::SlideParts> slides);

nlohmann::json checkpoint_json(const train::TrainState& state);
train::TrainState state_from_checkpoint(const nlohmann::json& j);

void save_checkpoint(const train::TrainState& state, const std::filesystem::path& path);
train::TrainState load_checkpoint(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
std::string read_text(const std::filesystem::path& path);

}  // namespace epic::io
