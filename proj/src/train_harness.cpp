#include "epic/train_harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <stdexcept>

namespace epic::train {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Phase-B forward state of one slide, kept alive for its backward pass.
struct SlideWork {
  std::vector<std::size_t> tiles;    // representative tile rows
  std::vector<std::size_t> part_of;  // part index of each representative
  std::vector<diff::GradTape> tile_tapes;
  Matrix embeddings;
  Matrix part_matrix;
  diff::GradTape head_tape;
  double risk = 0.0;
  std::vector<double> grad;
};

void forward_slide(const TrainState& state, const synth::TileBag& bag, const parts::SlideParts& sp,
                   std::mt19937_64* rng, SlideWork& work) {
  const auto& net = state.net;
  const std::size_t k = net.config().n_parts;
  const std::size_t w = net.config().waist_dim;
  for (std::size_t j = 0; j < k; ++j) {
    for (auto t : sp.representatives[j]) {
      work.tiles.push_back(t);
      work.part_of.push_back(j);
    }
  }
  work.tile_tapes.resize(work.tiles.size());
  work.embeddings = Matrix(work.tiles.size(), w);
  work.part_matrix = Matrix(k, w);
  for (std::size_t q = 0; q < work.tiles.size(); ++q) {
    const auto z = net.encode_tile(bag.tiles.row(work.tiles[q]), state.params, &work.tile_tapes[q], rng);
    std::copy(z.begin(), z.end(), work.embeddings.row(q).begin());
    auto row = work.part_matrix.row(work.part_of[q]);
    const double inv = 1.0 / static_cast<double>(sp.representatives[work.part_of[q]].size());
    for (std::size_t c = 0; c < w; ++c) row[c] += z[c] * inv;
  }
  work.risk = net.risk_head(work.part_matrix, sp.empty_mask, state.params, &work.head_tape, rng);
}

void backward_slide(const TrainState& state, const parts::SlideParts& sp, double grad_risk,
                    const Matrix& emb_grad, std::size_t emb_offset, SlideWork& work) {
  const auto& net = state.net;
  work.grad.assign(state.params.size(), 0.0);
  const Matrix d_parts = net.risk_head_backward(state.params, work.head_tape, grad_risk, work.grad);
  const std::size_t w = net.config().waist_dim;
  std::vector<double> g(w);
  for (std::size_t q = 0; q < work.tiles.size(); ++q) {
    const std::size_t j = work.part_of[q];
    const double inv = 1.0 / static_cast<double>(sp.representatives[j].size());
    const auto dp = d_parts.row(j);
    const auto de = emb_grad.row(emb_offset + q);
    for (std::size_t c = 0; c < w; ++c) g[c] = dp[c] * inv + de[c];
    net.encode_tile_backward(state.params, work.tile_tapes[q], g, work.grad);
  }
}

template <class Fn>
void for_each_slide(std::size_t n, kernels::Exec exec, Fn&& fn) {
  const auto count = static_cast<long>(n);
  if (exec == kernels::Exec::serial) {
    for (long i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
    return;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (n_parts == 0) fail("n_parts", "must be >= 1");
  if (waist == 0) fail("waist", "must be >= 1");
  if (top_p == 0) fail("top_p", "must be >= 1");
  if (part_batch_size == 0) fail("part_batch_size", "must be >= 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate", "must be nonnegative");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout", "must be in [0, 1)");
  if (!(lambda_c >= 0.0)) fail("lambda_c", "must be nonnegative");
  if (!(lambda_s >= 0.0)) fail("lambda_s", "must be nonnegative");
  if (!(huber_beta > 0.0)) fail("huber_beta", "must be positive");
  for (auto d : hidden_dims) {
    if (d == 0) fail("hidden_dims", "entries must be >= 1");
  }
  for (auto d : head_dims) {
    if (d == 0) fail("head_dims", "entries must be >= 1");
  }
}

net::EncoderConfig TrainConfig::encoder_config(std::size_t input_dim) const {
  net::EncoderConfig c;
  c.input_dim = input_dim;
  c.hidden_dims = hidden_dims;
  c.waist_dim = waist;
  c.n_parts = n_parts;
  c.head_dims = head_dims;
  c.dropout = dropout;
  c.encoder_dropout = encoder_dropout;
  c.seed = derive_seed(seed, 2);
  return c;
}

loss::LossWeights TrainConfig::loss_weights() const {
  return {lambda_c, stratification_enabled ? lambda_s : 0.0, huber_beta};
}

EvalReport build_report(std::span<const stats::SurvivalRecord> records, std::span<const double> risks,
                        std::string label) {
  EvalReport r;
  r.label = std::move(label);
  r.ci = stats::concordance_index(risks, records);
  const auto split = stats::median_split(risks);
  std::vector<stats::SurvivalRecord> low, high;
  for (auto i : split.low) low.push_back(records[i]);
  for (auto i : split.high) high.push_back(records[i]);
  r.km_low = stats::kaplan_meier(low);
  r.km_high = stats::kaplan_meier(high);
  r.logrank = stats::log_rank_test(low, high);
  r.low = split.low;
  r.high = split.high;
  r.risks.assign(risks.begin(), risks.end());
  for (const auto& rec : records) r.subject_ids.push_back(rec.subject_id);
  return r;
}

TrainState init_state(const synth::TileCohort& cohort, std::span<const std::size_t> train_ids,
                      const TrainConfig& config) {
  config.validate();
  if (train_ids.empty()) throw std::invalid_argument("init_state: no training slides");
  const std::size_t input_dim = cohort.at(train_ids.front()).tiles.cols();
  TrainState state{net::EpicNet(config.encoder_config(input_dim)), {}, {}, config.top_p, 0};
  state.params = state.net.init_params();
  const Matrix sample = kernels::encode_slides(state.net, state.params, cohort, train_ids, kernels::Exec::parallel);
  state.centroids = parts::init_centroids(sample, config.n_parts, derive_seed(config.seed, 1));
  return state;
}

BatchResult batch_objective(const TrainState& state, const synth::TileCohort& cohort,
                            std::span<const std::size_t> slide_ids, std::span<const parts::SlideParts> slide_parts,
                            const loss::LossWeights& weights, std::span<double> grad,
                            std::optional<std::uint64_t> dropout_seed, kernels::Exec exec) {
  const std::size_t b = slide_ids.size();
  if (slide_parts.size() != b) throw std::invalid_argument("batch_objective: one SlideParts per slide required");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != state.params.size()) {
    throw std::invalid_argument("batch_objective: gradient buffer length differs from parameter count");
  }

  std::vector<SlideWork> work(b);
  for_each_slide(b, exec, [&](std::size_t s) {
    std::mt19937_64 rng(dropout_seed ? derive_seed(*dropout_seed, s) : 0);
    forward_slide(state, cohort.at(slide_ids[s]), slide_parts[s], dropout_seed ? &rng : nullptr, work[s]);
  });

  BatchResult out;
  std::vector<stats::SurvivalRecord> records(b);
  out.risks.resize(b);
  std::vector<std::size_t> emb_offset(b + 1, 0);
  for (std::size_t s = 0; s < b; ++s) {
    records[s] = cohort[slide_ids[s]].record;
    out.risks[s] = work[s].risk;
    emb_offset[s + 1] = emb_offset[s] + work[s].tiles.size();
  }
  const std::size_t w = state.net.config().waist_dim;
  Matrix embeddings(emb_offset[b], w);
  Matrix assigned(emb_offset[b], w);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t q = 0; q < work[s].tiles.size(); ++q) {
      const auto z = work[s].embeddings.row(q);
      const auto c = state.centroids.centroids.row(work[s].part_of[q]);
      std::copy(z.begin(), z.end(), embeddings.row(emb_offset[s] + q).begin());
      std::copy(c.begin(), c.end(), assigned.row(emb_offset[s] + q).begin());
    }
  }

  out.n_events = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.event; }));
  out.included_nlpl = out.n_events > 0;
  loss::LossGradients grads;
  out.loss = loss::combined_loss(out.risks, records, embeddings, assigned, weights, want_grad ? &grads : nullptr,
                                 out.included_nlpl);
  if (!want_grad) return out;

  for_each_slide(b, exec, [&](std::size_t s) {
    backward_slide(state, slide_parts[s], grads.risks[s], grads.embeddings, emb_offset[s], work[s]);
  });
  // fixed slide order keeps the reduction bit-reproducible
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += work[s].grad[i];
  }
  return out;
}

EpochSummary train_epoch(TrainState& state, const synth::TileCohort& cohort, std::span<const std::size_t> train_ids,
                         const TrainConfig& config, const std::unordered_set<std::size_t>* forbidden,
                         kernels::Exec exec) {
  config.validate();
  if (train_ids.empty()) throw std::invalid_argument("train_epoch: no training slides");
  const int epoch = state.epochs_done;
  const auto weights = config.loss_weights();

  // Phase A: eval-mode extraction with frozen centroids.
  const auto extracted =
      kernels::extract_parts(state.net, state.params, state.centroids, cohort, train_ids, state.top_p, exec);
  parts::CentroidAccumulator members(state.centroids.k(), state.centroids.centroids.cols());
  for (const auto& e : extracted) members.add(e.embeddings, e.assignment);

  // Phase B: SGD over shuffled slide mini-batches.
  TrainState next = state;
  std::vector<std::size_t> order(train_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 3, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  EpochSummary summary;
  summary.epoch = epoch;
  std::vector<double> total_grad(next.params.size());
  for (std::size_t start = 0, batch = 0; start < order.size(); start += config.part_batch_size, ++batch) {
    const std::size_t end = std::min(order.size(), start + config.part_batch_size);
    const std::span<const std::size_t> local(order.data() + start, end - start);
    const std::size_t b = local.size();

    std::vector<std::size_t> batch_ids(b);
    std::vector<parts::SlideParts> batch_parts(b);
    for (std::size_t s = 0; s < b; ++s) {
      batch_ids[s] = train_ids[local[s]];
      if (forbidden && forbidden->contains(batch_ids[s])) {
        throw std::logic_error("slide " + cohort[batch_ids[s]].slide_id + " is held out but reached a gradient step");
      }
      batch_parts[s] = extracted[local[s]].parts;
    }

    const auto result = batch_objective(next, cohort, batch_ids, batch_parts, weights, total_grad,
                                        derive_seed(config.seed, 4, static_cast<std::uint64_t>(epoch), batch), exec);
    StepLog step;
    step.epoch = epoch;
    step.batch = batch;
    step.n_slides = b;
    step.n_events = result.n_events;
    step.loss = result.loss;
    if (!result.included_nlpl) {
      step.warning = "batch has no events; partial likelihood term skipped";
      ++summary.skipped_nlpl;
    }
    try {
      std::vector<stats::SurvivalRecord> records;
      for (auto id : batch_ids) records.push_back(cohort[id].record);
      step.batch_ci = stats::concordance_index(result.risks, records);
    } catch (const stats::UndefinedStatistic&) {
    }

    auto& p = next.params.values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * total_grad[i];

    summary.mean.nlpl += step.loss.nlpl;
    summary.mean.clustering += step.loss.clustering;
    summary.mean.stratification += step.loss.stratification;
    summary.mean.total += step.loss.total;
    summary.steps.push_back(std::move(step));
  }
  summary.batches = summary.steps.size();
  if (summary.skipped_nlpl == summary.batches) {
    throw std::runtime_error("epoch " + std::to_string(epoch) +
                             ": no batch contained an event, partial likelihood undefined");
  }
  const double inv = 1.0 / static_cast<double>(summary.batches);
  summary.mean.nlpl *= inv;
  summary.mean.clustering *= inv;
  summary.mean.stratification *= inv;
  summary.mean.total *= inv;

  for (double v : next.params.values()) {
    if (!std::isfinite(v)) throw std::runtime_error("epoch " + std::to_string(epoch) + ": parameters diverged");
  }
  next.centroids = parts::update_centroids(members, state.centroids);
  next.epochs_done = epoch + 1;
  state = std::move(next);
  return summary;
}

std::vector<double> predict_risks(const TrainState& state, const synth::TileCohort& cohort,
                                  std::span<const std::size_t> ids, kernels::Exec exec) {
  const auto extracted = kernels::extract_parts(state.net, state.params, state.centroids, cohort, ids, state.top_p, exec);
  return kernels::slide_risks(state.net, state.params, extracted, exec);
}

std::vector<parts::SlideParts> inspect_parts(const TrainState& state, const synth::TileCohort& cohort,
                                             std::span<const std::size_t> ids) {
  auto extracted = kernels::extract_parts(state.net, state.params, state.centroids, cohort, ids, state.top_p,
                                          kernels::Exec::parallel);
  std::vector<parts::SlideParts> out;
  out.reserve(extracted.size());
  for (auto& e : extracted) out.push_back(std::move(e.parts));
  return out;
}

EvalReport evaluate(const TrainState& state, const synth::TileCohort& cohort, std::span<const std::size_t> ids,
                    std::string label) {
  for (auto id : ids) {
    if (cohort.at(id).tiles.cols() != state.net.config().input_dim) {
      throw std::invalid_argument("slide " + cohort[id].slide_id + " has " + std::to_string(cohort[id].tiles.cols()) +
                                  " tile features, model expects " + std::to_string(state.net.config().input_dim));
    }
  }
  const auto risks = predict_risks(state, cohort, ids);
  std::vector<stats::SurvivalRecord> records;
  records.reserve(ids.size());
  for (auto id : ids) records.push_back(cohort[id].record);
  return build_report(records, risks, std::move(label));
}

TrainRun fit(const synth::TileCohort& cohort, std::span<const std::size_t> train_ids, const TrainConfig& config,
             std::span<const std::size_t> val_ids, const EpochCallback& on_epoch) {
  TrainRun run{init_state(cohort, train_ids, config), {}};
  const std::unordered_set<std::size_t> held_out(val_ids.begin(), val_ids.end());
  std::vector<stats::SurvivalRecord> val_records;
  for (auto id : val_ids) val_records.push_back(cohort.at(id).record);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    auto summary = train_epoch(run.state, cohort, train_ids, config, held_out.empty() ? nullptr : &held_out);
    if (!val_ids.empty()) {
      try {
        summary.val_ci = stats::concordance_index(predict_risks(run.state, cohort, val_ids), val_records);
      } catch (const stats::UndefinedStatistic&) {
      }
    }
    if (on_epoch) on_epoch(summary);
    run.epochs.push_back(std::move(summary));
  }
  return run;
}

CrossValResult cross_validate(const synth::TileCohort& cohort, const TrainConfig& config, std::size_t k_folds) {
  CrossValResult out;
  out.folds = synth::kfold_split(cohort.size(), k_folds, config.seed);
  std::vector<stats::SurvivalRecord> pooled_records;
  std::vector<double> pooled_risks;
  for (std::size_t f = 0; f < out.folds.size(); ++f) {
    const auto& fold = out.folds[f];
    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, 5, f);
    auto run = fit(cohort, fold.train, fold_config, fold.val);
    const auto risks = predict_risks(run.state, cohort, fold.val);
    std::vector<stats::SurvivalRecord> records;
    for (auto id : fold.val) records.push_back(cohort[id].record);
    // a small fold can lack comparable pairs; the pooled report still stands
    EvalReport report;
    try {
      report = build_report(records, risks, "fold " + std::to_string(f));
    } catch (const std::exception& e) {
      report.label = "fold " + std::to_string(f);
      report.error = e.what();
      report.risks = risks;
      for (const auto& r : records) report.subject_ids.push_back(r.subject_id);
    }
    report.fold_id = static_cast<int>(f);
    out.fold_reports.push_back(std::move(report));
    out.fold_logs.push_back(std::move(run.epochs));
    out.fold_states.push_back(std::move(run.state));
    pooled_records.insert(pooled_records.end(), records.begin(), records.end());
    pooled_risks.insert(pooled_risks.end(), risks.begin(), risks.end());
  }
  out.pooled = build_report(pooled_records, pooled_risks, "pooled cross-validation");
  return out;
}

}  // namespace epic::train
