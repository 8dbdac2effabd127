#include "epic/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace epic::synth {
namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kFormatTag = "epic-cohort";

double draw_exponential(std::mt19937_64& rng, double rate) {
  std::exponential_distribution<double> dist(rate);
  double t = 0.0;
  while (!(t > 0.0)) t = dist(rng);
  return t;
}

std::string slide_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "slide_%05zu", i);
  return buf;
}

}  // namespace

void CohortConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (n_slides == 0) fail("n_slides", "must be >= 1");
  if (tiles_min == 0) fail("tiles_min", "must be >= 1");
  if (tiles_max < tiles_min) fail("tiles_max", "must be >= tiles_min");
  if (input_dim == 0) fail("input_dim", "must be >= 1");
  if (n_latent_morphs < 2) fail("n_latent_morphs", "must be >= 2");
  if (morph_hazard_coeffs.size() != n_latent_morphs) fail("morph_hazard_coeffs", "length must equal n_latent_morphs");
  for (double c : morph_hazard_coeffs) {
    if (!std::isfinite(c)) fail("morph_hazard_coeffs", "entries must be finite");
  }
  if (!(baseline_rate > 0.0) || !std::isfinite(baseline_rate)) fail("baseline_rate", "must be positive");
  if (!(censor_rate > 0.0) || !std::isfinite(censor_rate)) fail("censor_rate", "must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma", "must be nonnegative");
}

Matrix morph_templates(std::size_t n_morphs, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n_morphs, dim);
  constexpr int kMaxAttempts = 10000;
  for (std::size_t m = 0; m < n_morphs; ++m) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt == kMaxAttempts) {
        throw std::invalid_argument("cannot place " + std::to_string(n_morphs) + " templates in dimension " +
                                    std::to_string(dim) + " with pairwise cosine < 0.5");
      }
      auto row = out.row(m);
      double norm = 0.0;
      for (auto& v : row) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (auto& v : row) v /= norm;
      bool ok = true;
      for (std::size_t q = 0; q < m && ok; ++q) {
        const auto other = out.row(q);
        ok = std::inner_product(row.begin(), row.end(), other.begin(), 0.0) < 0.5;
      }
      if (ok) break;
    }
  }
  return out;
}

TileCohort generate_cohort(const CohortConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const Matrix templates = morph_templates(config.n_latent_morphs, config.input_dim, rng());
  std::normal_distribution<double> noise(0.0, 1.0);
  std::exponential_distribution<double> gamma1(1.0);
  std::uniform_int_distribution<std::size_t> tile_count(config.tiles_min, config.tiles_max);

  TileCohort cohort;
  cohort.reserve(config.n_slides);
  for (std::size_t s = 0; s < config.n_slides; ++s) {
    TileBag bag;
    bag.slide_id = slide_name(s);

    // Dirichlet(1, ..., 1) via normalized unit exponentials.
    bag.true_morph_mix.resize(config.n_latent_morphs);
    double total = 0.0;
    for (auto& w : bag.true_morph_mix) {
      w = gamma1(rng);
      total += w;
    }
    for (auto& w : bag.true_morph_mix) w /= total;

    std::discrete_distribution<std::size_t> morph(bag.true_morph_mix.begin(), bag.true_morph_mix.end());
    const std::size_t count = tile_count(rng);
    bag.tiles = Matrix(count, config.input_dim);
    for (std::size_t t = 0; t < count; ++t) {
      const auto tmpl = templates.row(morph(rng));
      auto row = bag.tiles.row(t);
      for (std::size_t d = 0; d < config.input_dim; ++d) row[d] = tmpl[d] + config.noise_sigma * noise(rng);
    }

    double log_hazard = 0.0;
    for (std::size_t m = 0; m < config.n_latent_morphs; ++m) {
      log_hazard += config.morph_hazard_coeffs[m] * bag.true_morph_mix[m];
    }
    const double event_time = draw_exponential(rng, config.baseline_rate * std::exp(log_hazard));
    const double censor_time = draw_exponential(rng, config.censor_rate);
    bag.record.subject_id = bag.slide_id;
    bag.record.event = event_time <= censor_time;
    bag.record.time = std::min(event_time, censor_time);
    cohort.push_back(std::move(bag));
  }
  return cohort;
}

std::vector<double> oracle_risks(const TileCohort& cohort, const std::vector<double>& coeffs) {
  std::vector<double> out;
  out.reserve(cohort.size());
  for (const auto& bag : cohort) {
    if (bag.true_morph_mix.size() != coeffs.size()) throw std::invalid_argument("oracle_risks: coefficient length");
    out.push_back(std::inner_product(coeffs.begin(), coeffs.end(), bag.true_morph_mix.begin(), 0.0));
  }
  return out;
}

std::vector<stats::SurvivalRecord> records_of(const TileCohort& cohort) {
  std::vector<stats::SurvivalRecord> out;
  out.reserve(cohort.size());
  for (const auto& bag : cohort) out.push_back(bag.record);
  return out;
}

void save_cohort(const TileCohort& cohort, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  nlohmann::json header = {{"format", kFormatTag},
                           {"schema_version", kSchemaVersion},
                           {"n_slides", cohort.size()},
                           {"input_dim", cohort.empty() ? 0 : cohort.front().tiles.cols()}};
  os << header.dump() << '\n';
  for (const auto& bag : cohort) {
    nlohmann::json tiles = nlohmann::json::array();
    for (std::size_t t = 0; t < bag.tiles.rows(); ++t) {
      const auto row = bag.tiles.row(t);
      tiles.push_back(std::vector<double>(row.begin(), row.end()));
    }
    nlohmann::json line = {
        {"slide_id", bag.slide_id},
        {"record", {{"subject_id", bag.record.subject_id}, {"time", bag.record.time}, {"event", bag.record.event}}},
        {"morph_mix", bag.true_morph_mix},
        {"tiles", std::move(tiles)}};
    os << line.dump() << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

TileCohort load_cohort(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open cohort file " + path.string());
  const std::string where = path.string();
  auto fail = [&](std::size_t line_no, const std::string& what) -> ParseError {
    std::ostringstream msg;
    msg << where << ":" << line_no << ": " << what;
    return ParseError(msg.str());
  };

  std::string line;
  if (!std::getline(is, line)) throw fail(1, "missing header line");
  std::size_t expected = 0;
  std::size_t input_dim = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("format").get<std::string>() != kFormatTag) throw fail(1, "not an epic cohort file");
    const int version = header.at("schema_version").get<int>();
    if (version != kSchemaVersion) throw fail(1, "unsupported schema_version " + std::to_string(version));
    expected = header.at("n_slides").get<std::size_t>();
    input_dim = header.at("input_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(1, std::string("bad header: ") + e.what());
  }

  TileCohort cohort;
  cohort.reserve(expected);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (cohort.size() == expected) throw fail(line_no, "more records than the header's n_slides");
    try {
      const auto j = nlohmann::json::parse(line);
      TileBag bag;
      bag.slide_id = j.at("slide_id").get<std::string>();
      const auto& rec = j.at("record");
      bag.record.subject_id = rec.at("subject_id").get<std::string>();
      bag.record.time = rec.at("time").get<double>();
      bag.record.event = rec.at("event").get<bool>();
      if (!(bag.record.time >= 0.0)) throw fail(line_no, "negative or invalid time");
      bag.true_morph_mix = j.at("morph_mix").get<std::vector<double>>();
      for (const auto& row : j.at("tiles")) {
        const auto values = row.get<std::vector<double>>();
        if (values.size() != input_dim) {
          throw fail(line_no, "tile has " + std::to_string(values.size()) + " features, header says " +
                                  std::to_string(input_dim));
        }
        bag.tiles.append_row(values);
      }
      cohort.push_back(std::move(bag));
    } catch (const nlohmann::json::exception& e) {
      throw fail(line_no, std::string("slide record: ") + e.what());
    }
  }
  if (cohort.size() != expected) {
    throw fail(line_no, "truncated file: header promises " + std::to_string(expected) + " slides, found " +
                            std::to_string(cohort.size()));
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (!seen.insert(cohort[i].record.subject_id).second) {
      throw fail(i + 2, "duplicate subject_id " + cohort[i].record.subject_id);
    }
  }
  return cohort;
}

std::vector<Fold> kfold_split(std::size_t n_slides, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n_slides) {
    throw std::invalid_argument("kfold_split: k = " + std::to_string(k) + " must be in [2, " +
                                std::to_string(n_slides) + "]");
  }
  std::vector<std::size_t> ids(n_slides);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<Fold> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n_slides / k + (f < n_slides % k ? 1 : 0);
    folds[f].val.assign(ids.begin() + static_cast<std::ptrdiff_t>(start),
                        ids.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(folds[f].val.begin(), folds[f].val.end());
    start += size;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].val.begin(), folds[g].val.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

}  // namespace epic::synth
