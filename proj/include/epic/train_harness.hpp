#pragma once

// Two-phase training epoch (part extraction over every slide, then SGD on the
// concatenated parts), evaluation reports and k-fold cross-validation.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "epic/encoder_net.hpp"
#include "epic/kernels.hpp"
#include "epic/losses.hpp"
#include "epic/part_model.hpp"
#include "epic/survival_stats.hpp"
#include "epic/synth_data.hpp"

namespace epic::train {

struct TrainConfig {
  // part mechanism
  std::size_t n_parts = 16;
  std::size_t waist = 16;
  std::size_t top_p = 4;
  // network
  std::vector<std::size_t> hidden_dims{64};
  std::vector<std::size_t> head_dims{128, 64};
  double dropout = 0.1;
  bool encoder_dropout = false;
  // loss
  double lambda_c = 0.1;
  double lambda_s = 1.0;
  double huber_beta = 1.0;
  bool stratification_enabled = true;
  // optimisation
  std::size_t part_batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;

  void validate() const;
  net::EncoderConfig encoder_config(std::size_t input_dim) const;
  /// lambda_s is forced to 0 when stratification is disabled.
  loss::LossWeights loss_weights() const;
};

struct TrainState {
  net::EpicNet net;
  diff::ParamVector params;
  parts::GlobalCentroids centroids;
  std::size_t top_p = 1;
  int epochs_done = 0;
};

struct StepLog {
  int epoch = 0;
  std::size_t batch = 0;
  std::size_t n_slides = 0;
  std::size_t n_events = 0;
  loss::LossBreakdown loss;
  std::optional<double> batch_ci;
  std::optional<std::string> warning;
};

struct EpochSummary {
  int epoch = 0;
  loss::LossBreakdown mean;  // averaged over batches
  std::size_t batches = 0;
  std::size_t skipped_nlpl = 0;
  std::optional<double> val_ci;
  std::vector<StepLog> steps;
};

struct EvalReport {
  std::string label;
  std::optional<int> fold_id;
  double ci = 0.0;
  stats::LogRankResult logrank;
  stats::KmCurve km_low;
  stats::KmCurve km_high;
  std::vector<std::string> subject_ids;
  std::vector<double> risks;
  std::vector<std::size_t> low;   // indices into risks
  std::vector<std::size_t> high;
  std::optional<std::string> error;  // set when the statistics were undefined
};

/// CI, median split, KM per group and log-rank between groups for one risk vector.
EvalReport build_report(std::span<const stats::SurvivalRecord> records, std::span<const double> risks,
                        std::string label);

/// Fresh network, Glorot weights and centroids sampled from the eval-mode
/// embeddings of the training tiles.
TrainState init_state(const synth::TileCohort& cohort, std::span<const std::size_t> train_ids,
                      const TrainConfig& config);

struct BatchResult {
  loss::LossBreakdown loss;
  std::vector<double> risks;
  std::size_t n_events = 0;
  bool included_nlpl = true;  // false when the batch had no events
};

/// Combined loss of one mini-batch with part selections held fixed. Tiles are
/// re-encoded from `state.params`; when `grad` is nonempty it receives the
/// parameter gradient. `dropout_seed` empty means eval-mode forward passes.
BatchResult batch_objective(const TrainState& state, const synth::TileCohort& cohort,
                            std::span<const std::size_t> slide_ids, std::span<const parts::SlideParts> slide_parts,
                            const loss::LossWeights& weights, std::span<double> grad,
                            std::optional<std::uint64_t> dropout_seed, kernels::Exec exec = kernels::Exec::parallel);

/// One epoch. The state is only modified when the epoch succeeds. Slides in
/// `forbidden` must never reach a gradient step.
EpochSummary train_epoch(TrainState& state, const synth::TileCohort& cohort, std::span<const std::size_t> train_ids,
                         const TrainConfig& config, const std::unordered_set<std::size_t>* forbidden = nullptr,
                         kernels::Exec exec = kernels::Exec::parallel);

/// Eval-mode risks for the listed slides.
std::vector<double> predict_risks(const TrainState& state, const synth::TileCohort& cohort,
                                  std::span<const std::size_t> ids, kernels::Exec exec = kernels::Exec::parallel);

std::vector<parts::SlideParts> inspect_parts(const TrainState& state, const synth::TileCohort& cohort,
                                             std::span<const std::size_t> ids);

EvalReport evaluate(const TrainState& state, const synth::TileCohort& cohort, std::span<const std::size_t> ids,
                    std::string label = "eval");

struct TrainRun {
  TrainState state;
  std::vector<EpochSummary> epochs;
};

using EpochCallback = std::function<void(const EpochSummary&)>;

/// init_state followed by config.epochs epochs. With `val_ids` the validation
/// CI is logged after every epoch (never used for selection).
TrainRun fit(const synth::TileCohort& cohort, std::span<const std::size_t> train_ids, const TrainConfig& config,
             std::span<const std::size_t> val_ids = {}, const EpochCallback& on_epoch = {});

struct CrossValResult {
  std::vector<synth::Fold> folds;
  std::vector<EvalReport> fold_reports;
  std::vector<std::vector<EpochSummary>> fold_logs;
  std::vector<TrainState> fold_states;
  EvalReport pooled;
};

CrossValResult cross_validate(const synth::TileCohort& cohort, const TrainConfig& config, std::size_t k_folds);

/// Deterministic seed derivation (splitmix64 over the parts).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace epic::train
