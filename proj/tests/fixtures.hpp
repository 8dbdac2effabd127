#pragma once

#include "epic/synth_data.hpp"
#include "epic/train_harness.hpp"

namespace fixture {

inline epic::synth::CohortConfig tiny_cohort(std::size_t n, std::uint64_t seed) {
  epic::synth::CohortConfig c;
  c.n_slides = n;
  c.tiles_min = 4;
  c.tiles_max = 10;
  c.input_dim = 8;
  c.n_latent_morphs = 2;
  c.morph_hazard_coeffs = {-3.0, 3.0};
  c.censor_rate = 0.005;
  c.seed = seed;
  return c;
}

inline epic::train::TrainConfig tiny_train(std::uint64_t seed = 0) {
  epic::train::TrainConfig c;
  c.n_parts = 3;
  c.waist = 3;
  c.top_p = 2;
  c.hidden_dims = {6};
  c.head_dims = {5};
  c.part_batch_size = 4;
  c.epochs = 2;
  c.learning_rate = 1e-2;
  c.seed = seed;
  return c;
}

inline std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace fixture
