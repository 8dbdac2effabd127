#pragma once

// Per-slide data-parallel kernels. Each kernel has a serial reference and an
// OpenMP version; both visit slides independently and write disjoint outputs,
// so their results are bit-identical regardless of thread count.

#include <span>
#include <vector>

#include "epic/encoder_net.hpp"
#include "epic/part_model.hpp"
#include "epic/synth_data.hpp"

namespace epic::kernels {

enum class Exec { serial, parallel };

/// Eval-mode part extraction for one slide: embeddings, assignment, parts.
struct SlideExtraction {
  Matrix embeddings;
  std::vector<std::size_t> assignment;
  parts::SlideParts parts;
};

SlideExtraction extract_slide(const net::EpicNet& net, const diff::ParamVector& params,
                              const parts::GlobalCentroids& centroids, const synth::TileBag& bag, std::size_t top_p);

std::vector<SlideExtraction> extract_parts(const net::EpicNet& net, const diff::ParamVector& params,
                                           const parts::GlobalCentroids& centroids, const synth::TileCohort& cohort,
                                           std::span<const std::size_t> slides, std::size_t top_p, Exec exec);

/// Eval-mode encoding of every tile of the listed slides, stacked in order.
Matrix encode_slides(const net::EpicNet& net, const diff::ParamVector& params, const synth::TileCohort& cohort,
                     std::span<const std::size_t> slides, Exec exec);

/// Eval-mode risk of each extracted slide.
std::vector<double> slide_risks(const net::EpicNet& net, const diff::ParamVector& params,
                                std::span<const SlideExtraction> extracted, Exec exec);

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

}  // namespace epic::kernels
