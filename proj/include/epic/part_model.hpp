#pragma once

// Part extraction: global centroids over tile embeddings, nearest-centroid
// assignment, per-slide local centroids with their top-p representative
// tiles, and the between-epoch centroid update.

#include <cstdint>
#include <string>
#include <vector>

#include "epic/matrix.hpp"

namespace epic::parts {

struct GlobalCentroids {
  Matrix centroids;  // k x waist
  int epoch = 0;

  std::size_t k() const { return centroids.rows(); }
  friend bool operator==(const GlobalCentroids&, const GlobalCentroids&) = default;
};

/// Part j of one slide. Tile ids are row indices into the slide's tile matrix.
struct SlideParts {
  std::string slide_id;
  Matrix parts;                                      // k x waist
  std::vector<bool> empty_mask;                      // true: no tile assigned to part j
  std::vector<std::vector<std::size_t>> representatives;  // tile ids per part

  friend bool operator==(const SlideParts&, const SlideParts&) = default;
};

/// k distinct rows drawn without replacement.
GlobalCentroids init_centroids(const Matrix& sample_embeddings, std::size_t k, std::uint64_t seed);

/// argmin squared distance per row, ties to the lowest centroid index.
std::vector<std::size_t> assign_tiles(const Matrix& embeddings, const GlobalCentroids& centroids);

SlideParts local_parts(const Matrix& embeddings, const std::vector<std::size_t>& assignment, std::size_t k,
                       std::size_t top_p, std::string slide_id = {});

/// Accumulates cohort-wide cluster sums for update_centroids.
class CentroidAccumulator {
 public:
  CentroidAccumulator(std::size_t k, std::size_t dim) : sums_(k, dim), counts_(k, 0) {}
  void add(const Matrix& embeddings, const std::vector<std::size_t>& assignment);
  const Matrix& sums() const { return sums_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

 private:
  Matrix sums_;
  std::vector<std::size_t> counts_;
};

/// Centroid j becomes the mean of its members; empty clusters keep the
/// previous centroid. Increments the epoch counter.
GlobalCentroids update_centroids(const CentroidAccumulator& members, const GlobalCentroids& previous);

/// sum_i ||z_i - c_{a(i)}||^2
double clustering_objective(const Matrix& embeddings, const std::vector<std::size_t>& assignment,
                            const GlobalCentroids& centroids);

}  // namespace epic::parts
