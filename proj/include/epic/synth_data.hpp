#pragma once

// Synthetic censored cohorts of tile bags. Each slide mixes a handful of latent
// morphologies; the mixture sets the true log-hazard, so the generator knows
// the oracle risk of every slide.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "epic/matrix.hpp"
#include "epic/survival_stats.hpp"

namespace epic::synth {

struct CohortConfig {
  std::size_t n_slides = 100;
  std::size_t tiles_min = 20;
  std::size_t tiles_max = 50;
  std::size_t input_dim = 32;
  std::size_t n_latent_morphs = 4;
  std::vector<double> morph_hazard_coeffs{-2.0, -0.5, 0.5, 2.0};
  double baseline_rate = 0.02;  // events per month
  double censor_rate = 0.01;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TileBag {
  std::string slide_id;
  Matrix tiles;  // count x input_dim
  stats::SurvivalRecord record;
  std::vector<double> true_morph_mix;

  friend bool operator==(const TileBag&, const TileBag&) = default;
};

using TileCohort = std::vector<TileBag>;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded unit vectors whose pairwise cosines are all below 0.5.
Matrix morph_templates(std::size_t n_morphs, std::size_t dim, std::uint64_t seed);

TileCohort generate_cohort(const CohortConfig& config);

/// True log-hazard coeffs . mix for every slide.
std::vector<double> oracle_risks(const TileCohort& cohort, const std::vector<double>& coeffs);

std::vector<stats::SurvivalRecord> records_of(const TileCohort& cohort);

/// JSON-lines: a header line with the schema version, then one bag per line.
void save_cohort(const TileCohort& cohort, const std::filesystem::path& path);
TileCohort load_cohort(const std::filesystem::path& path);

struct Fold {
  std::vector<std::size_t> train;  // cohort indices
  std::vector<std::size_t> val;
};

/// Seeded shuffle, then k near-equal validation folds.
std::vector<Fold> kfold_split(std::size_t n_slides, std::size_t k, std::uint64_t seed);

}  // namespace epic::synth
