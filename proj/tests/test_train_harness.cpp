#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "epic/diff_core.hpp"
#include "epic/kernels.hpp"
#include "epic/survival_stats.hpp"
#include "epic/train_harness.hpp"
#include "fixtures.hpp"

namespace train = epic::train;
namespace synth = epic::synth;
using epic::kernels::Exec;

TEST_CASE("config validation") {
  auto c = fixture::tiny_train();
  CHECK_NOTHROW(c.validate());
  c.top_p = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = fixture::tiny_train();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = fixture::tiny_train();
  c.stratification_enabled = false;
  CHECK(c.loss_weights().lambda_s == 0.0);
}

TEST_CASE("seed derivation separates streams") {
  CHECK(train::derive_seed(1, 2) == train::derive_seed(1, 2));
  CHECK(train::derive_seed(1, 2) != train::derive_seed(1, 3));
  CHECK(train::derive_seed(1, 2, 0) != train::derive_seed(1, 2, 1));
  CHECK(train::derive_seed(0, 2) != train::derive_seed(1, 2));
}

TEST_CASE("zero learning rate leaves the weights untouched") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(20, 1));
  const auto ids = fixture::iota_ids(cohort.size());
  auto cfg = fixture::tiny_train();
  cfg.learning_rate = 0.0;
  auto state = train::init_state(cohort, ids, cfg);
  const auto before = state.params;
  const auto summary = train::train_epoch(state, cohort, ids, cfg);
  CHECK(state.params == before);
  CHECK(state.epochs_done == 1);
  CHECK(state.centroids.epoch == 1);
  CHECK(summary.batches == 5);
}

TEST_CASE("an epoch without any event is an error and leaves the state alone") {
  auto cohort = synth::generate_cohort(fixture::tiny_cohort(1, 2));
  cohort[0].record.event = false;
  const std::vector<std::size_t> ids{0};
  auto cfg = fixture::tiny_train();
  auto state = train::init_state(cohort, ids, cfg);
  const auto before = state.params;
  CHECK_THROWS_AS(train::train_epoch(state, cohort, ids, cfg), std::runtime_error);
  CHECK(state.params == before);
  CHECK(state.epochs_done == 0);
}

TEST_CASE("event-free batches skip the partial likelihood with a warning") {
  auto cohort = synth::generate_cohort(fixture::tiny_cohort(8, 3));
  for (std::size_t i = 0; i < 4; ++i) cohort[i].record.event = false;
  for (std::size_t i = 4; i < 8; ++i) cohort[i].record.event = true;
  auto cfg = fixture::tiny_train();
  cfg.part_batch_size = 1;
  const auto ids = fixture::iota_ids(cohort.size());
  auto state = train::init_state(cohort, ids, cfg);
  const auto s = train::train_epoch(state, cohort, ids, cfg);
  CHECK(s.skipped_nlpl == 4);
  for (const auto& step : s.steps) {
    CHECK(step.warning.has_value() == (step.n_events == 0));
    if (step.n_events == 0) CHECK(step.loss.nlpl == 0.0);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(24, 4));
  const auto ids = fixture::iota_ids(cohort.size());
  auto cfg = fixture::tiny_train(9);
  cfg.dropout = 0.3;
  const auto a = train::fit(cohort, ids, cfg);
  const auto b = train::fit(cohort, ids, cfg);
  CHECK(a.state.params == b.state.params);
  CHECK(a.state.centroids == b.state.centroids);
  cfg.seed = 10;
  CHECK_FALSE(train::fit(cohort, ids, cfg).state.params == a.state.params);
}

TEST_CASE("held-out slides never reach a gradient step") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(12, 5));
  const auto ids = fixture::iota_ids(cohort.size());
  const auto cfg = fixture::tiny_train();
  auto state = train::init_state(cohort, ids, cfg);
  const std::unordered_set<std::size_t> held{3};
  CHECK_THROWS_AS(train::train_epoch(state, cohort, ids, cfg, &held), std::logic_error);

  std::vector<std::size_t> train_ids{0, 1, 2, 4, 5, 6, 7, 8};
  const std::vector<std::size_t> val{3, 9, 10, 11};
  std::vector<std::optional<double>> val_ci;
  const auto run = train::fit(cohort, train_ids, cfg, val,
                              [&](const train::EpochSummary& e) { val_ci.push_back(e.val_ci); });
  CHECK(val_ci.size() == cfg.epochs);
  for (const auto& e : run.epochs) {
    std::size_t seen = 0;
    for (const auto& s : e.steps) seen += s.n_slides;
    CHECK(seen == train_ids.size());
  }
}

TEST_CASE("evaluate agrees with predict_risks and the statistics module") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(30, 6));
  const auto ids = fixture::iota_ids(cohort.size());
  const auto run = train::fit(cohort, ids, fixture::tiny_train());
  const auto report = train::evaluate(run.state, cohort, ids, "x");
  const auto risks = train::predict_risks(run.state, cohort, ids);
  const auto records = synth::records_of(cohort);
  CHECK(report.label == "x");
  CHECK(report.risks == risks);
  CHECK(report.ci == epic::stats::concordance_index(risks, records));
  const auto split = epic::stats::median_split(risks);
  CHECK(report.low == split.low);
  CHECK(report.high == split.high);
  CHECK(report.subject_ids.size() == 30);
  CHECK(report.subject_ids[4] == cohort[4].slide_id);
}

TEST_CASE("risk scores unrelated to outcome give unremarkable log-rank p-values") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(60, 7));
  const auto ids = fixture::iota_ids(cohort.size());
  const auto state = train::init_state(cohort, ids, fixture::tiny_train());
  const auto risks = train::predict_risks(state, cohort, ids);
  auto records = synth::records_of(cohort);
  std::mt19937_64 rng(11);
  std::vector<double> p;
  for (int rep = 0; rep < 100; ++rep) {
    std::shuffle(records.begin(), records.end(), rng);
    p.push_back(train::build_report(records, risks, "perm").logrank.p_value);
  }
  std::nth_element(p.begin(), p.begin() + 50, p.end());
  CHECK(p[50] >= 0.3);
}

TEST_CASE("cross-validation partitions the cohort and pools every slide once") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(25, 8));
  auto cfg = fixture::tiny_train();
  cfg.epochs = 1;
  const auto cv = train::cross_validate(cohort, cfg, 5);
  REQUIRE(cv.folds.size() == 5);
  CHECK(cv.fold_states.size() == 5);
  std::multiset<std::string> pooled(cv.pooled.subject_ids.begin(), cv.pooled.subject_ids.end());
  CHECK(pooled.size() == 25);
  std::set<std::string> unique(pooled.begin(), pooled.end());
  CHECK(unique.size() == 25);
  std::size_t at = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(cv.fold_reports[f].fold_id == static_cast<int>(f));
    for (std::size_t i = 0; i < cv.folds[f].val.size(); ++i, ++at) {
      CHECK(cv.pooled.subject_ids[at] == cohort[cv.folds[f].val[i]].slide_id);
      CHECK(cv.pooled.risks[at] == cv.fold_reports[f].risks[i]);
    }
  }
  CHECK_THROWS_AS(train::cross_validate(cohort, cfg, 1), std::invalid_argument);
}

TEST_CASE("mini-batch objective gradient matches finite differences") {
  const auto cohort = synth::generate_cohort(fixture::tiny_cohort(12, 9));
  const auto ids = fixture::iota_ids(cohort.size());
  for (double dropout : {0.0, 0.25}) {
    auto cfg = fixture::tiny_train(4);
    cfg.dropout = dropout;
    const auto state = train::init_state(cohort, ids, cfg);
    const auto extracted = epic::kernels::extract_parts(state.net, state.params, state.centroids, cohort, ids,
                                                        state.top_p, Exec::serial);
    std::vector<epic::parts::SlideParts> sp;
    for (const auto& e : extracted) sp.push_back(e.parts);
    const auto weights = cfg.loss_weights();
    epic::diff::LossFn f = [&](std::span<const double> theta, std::span<double> g) {
      auto s = state;
      s.params.assign({theta.begin(), theta.end()});
      return train::batch_objective(s, cohort, ids, sp, weights, g, 77, Exec::serial).loss.total;
    };
    CHECK(epic::diff::grad_check(f, state.params.values(), 1e-5) < 1e-5);
  }
}
