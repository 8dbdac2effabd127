#include "epic/kernels.hpp"

#include <exception>

#ifdef _OPENMP
#ifdef _OPENMP
#include <omp.h>
#endif
#endif

namespace epic::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

SlideExtraction extract_slide(const net::EpicNet& net, const diff::ParamVector& params,
                              const parts::GlobalCentroids& centroids, const synth::TileBag& bag, std::size_t top_p) {
  SlideExtraction out;
  out.embeddings = net.encode_tiles(bag.tiles, params, nullptr);
  out.assignment = parts::assign_tiles(out.embeddings, centroids);
  out.parts = parts::local_parts(out.embeddings, out.assignment, centroids.k(), top_p, bag.slide_id);
  return out;
}

std::vector<SlideExtraction> extract_parts(const net::EpicNet& net, const diff::ParamVector& params,
                                           const parts::GlobalCentroids& centroids, const synth::TileCohort& cohort,
                                           std::span<const std::size_t> slides, std::size_t top_p, Exec exec) {
  std::vector<SlideExtraction> out(slides.size());
  const auto n = static_cast<long>(slides.size());
  if (exec == Exec::serial) {
    for (long i = 0; i < n; ++i) out[i] = extract_slide(net, params, centroids, cohort.at(slides[i]), top_p);
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = extract_slide(net, params, centroids, cohort.at(slides[i]), top_p);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

Matrix encode_slides(const net::EpicNet& net, const diff::ParamVector& params, const synth::TileCohort& cohort,
                     std::span<const std::size_t> slides, Exec exec) {
  std::vector<std::size_t> offsets(slides.size() + 1, 0);
  for (std::size_t i = 0; i < slides.size(); ++i) offsets[i + 1] = offsets[i] + cohort.at(slides[i]).tiles.rows();
  Matrix out(offsets.back(), net.config().waist_dim);
  auto encode_one = [&](std::size_t i) {
    const auto& tiles = cohort[slides[i]].tiles;
    for (std::size_t t = 0; t < tiles.rows(); ++t) {
      const auto z = net.encode_tile(tiles.row(t), params, nullptr, nullptr);
      std::copy(z.begin(), z.end(), out.row(offsets[i] + t).begin());
    }
  };
  const auto n = static_cast<long>(slides.size());
  if (exec == Exec::serial) {
    for (long i = 0; i < n; ++i) encode_one(static_cast<std::size_t>(i));
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      encode_one(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<double> slide_risks(const net::EpicNet& net, const diff::ParamVector& params,
                                std::span<const SlideExtraction> extracted, Exec exec) {
  std::vector<double> out(extracted.size());
  const auto n = static_cast<long>(extracted.size());
  if (exec == Exec::serial) {
    for (long i = 0; i < n; ++i) {
      out[i] = net.risk_head(extracted[i].parts.parts, extracted[i].parts.empty_mask, params, nullptr, nullptr);
    }
    return out;
  }
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = net.risk_head(extracted[i].parts.parts, extracted[i].parts.empty_mask, params, nullptr, nullptr);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace epic::kernels
