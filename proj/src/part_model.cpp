#include "epic/part_model.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace epic::parts {

GlobalCentroids init_centroids(const Matrix& sample_embeddings, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("init_centroids: k must be >= 1");
  if (sample_embeddings.rows() < k) {
    throw std::invalid_argument("init_centroids: sample has " + std::to_string(sample_embeddings.rows()) +
                                " rows, need at least k = " + std::to_string(k));
  }
  std::vector<std::size_t> idx(sample_embeddings.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  GlobalCentroids out;
  out.centroids = Matrix(k, sample_embeddings.cols());
  for (std::size_t j = 0; j < k; ++j) {
    const auto src = sample_embeddings.row(idx[j]);
    std::copy(src.begin(), src.end(), out.centroids.row(j).begin());
  }
  return out;
}

std::vector<std::size_t> assign_tiles(const Matrix& embeddings, const GlobalCentroids& centroids) {
  if (centroids.k() == 0) throw std::invalid_argument("assign_tiles: no centroids");
  if (!embeddings.empty() && embeddings.cols() != centroids.centroids.cols()) {
    throw std::invalid_argument("assign_tiles: embedding width differs from centroid width");
  }
  std::vector<std::size_t> out(embeddings.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto z = embeddings.row(i);
    std::size_t best = 0;
    double best_d = squared_distance(z, centroids.centroids.row(0));
    for (std::size_t j = 1; j < centroids.k(); ++j) {
      const double d = squared_distance(z, centroids.centroids.row(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

SlideParts local_parts(const Matrix& embeddings, const std::vector<std::size_t>& assignment, std::size_t k,
                       std::size_t top_p, std::string slide_id) {
  if (top_p == 0) throw std::invalid_argument("local_parts: top_p must be >= 1");
  if (assignment.size() != embeddings.rows()) throw std::invalid_argument("local_parts: assignment length mismatch");
  const std::size_t dim = embeddings.cols();

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= k) throw std::invalid_argument("local_parts: assignment out of range");
    members[assignment[i]].push_back(i);
  }

  SlideParts out;
  out.slide_id = std::move(slide_id);
  out.parts = Matrix(k, dim);
  out.empty_mask.assign(k, true);
  out.representatives.assign(k, {});
  std::vector<double> local(dim);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& m = members[j];
    if (m.empty()) continue;
    std::fill(local.begin(), local.end(), 0.0);
    for (auto i : m) {
      const auto z = embeddings.row(i);
      for (std::size_t c = 0; c < dim; ++c) local[c] += z[c];
    }
    for (auto& v : local) v /= static_cast<double>(m.size());

    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(m.size());
    for (auto i : m) ranked.emplace_back(squared_distance(embeddings.row(i), local), i);
    // tile order breaks distance ties
    std::sort(ranked.begin(), ranked.end());
    const std::size_t take = std::min(top_p, ranked.size());

    auto row = out.parts.row(j);
    auto& reps = out.representatives[j];
    for (std::size_t r = 0; r < take; ++r) {
      reps.push_back(ranked[r].second);
      const auto z = embeddings.row(ranked[r].second);
      for (std::size_t c = 0; c < dim; ++c) row[c] += z[c];
    }
    for (auto& v : row) v /= static_cast<double>(take);
    out.empty_mask[j] = false;
  }
  return out;
}

void CentroidAccumulator::add(const Matrix& embeddings, const std::vector<std::size_t>& assignment) {
  if (assignment.size() != embeddings.rows()) throw std::invalid_argument("CentroidAccumulator: length mismatch");
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    auto dst = sums_.row(assignment.at(i));
    const auto z = embeddings.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += z[c];
    ++counts_[assignment[i]];
  }
}

GlobalCentroids update_centroids(const CentroidAccumulator& members, const GlobalCentroids& previous) {
  if (members.sums().rows() != previous.k() || members.sums().cols() != previous.centroids.cols()) {
    throw std::invalid_argument("update_centroids: accumulator shape differs from centroids");
  }
  GlobalCentroids next = previous;
  for (std::size_t j = 0; j < previous.k(); ++j) {
    const auto n = members.counts()[j];
    if (n == 0) continue;
    const auto s = members.sums().row(j);
    auto dst = next.centroids.row(j);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = s[c] / static_cast<double>(n);
  }
  ++next.epoch;
  return next;
}

double clustering_objective(const Matrix& embeddings, const std::vector<std::size_t>& assignment,
                            const GlobalCentroids& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    s += squared_distance(embeddings.row(i), centroids.centroids.row(assignment.at(i)));
  }
  return s;
}

}  // namespace epic::parts
