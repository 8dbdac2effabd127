#include "epic/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace epic::loss {

void LossWeights::validate() const {
  if (!(lambda_c >= 0.0)) throw std::invalid_argument("lambda_c must be nonnegative");
  if (!(lambda_s >= 0.0)) throw std::invalid_argument("lambda_s must be nonnegative");
  if (!(huber_beta > 0.0)) throw std::invalid_argument("huber_beta must be positive");
}

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a <= beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

double clustering_loss(const Matrix& embeddings, const Matrix& assigned_centroids, Matrix* grad) {
  if (embeddings.rows() != assigned_centroids.rows() ||
      (!embeddings.empty() && embeddings.cols() != assigned_centroids.cols())) {
    throw std::invalid_argument("clustering_loss: embeddings and centroids are not aligned");
  }
  if (grad) *grad = Matrix(embeddings.rows(), embeddings.cols());
  double s = 0.0;
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto z = embeddings.row(i);
    const auto c = assigned_centroids.row(i);
    for (std::size_t d = 0; d < z.size(); ++d) {
      const double diff = z[d] - c[d];
      s += diff * diff;
      if (grad) (*grad)(i, d) = 2.0 * diff;
    }
  }
  return s;
}

double stratification_loss(std::span<const double> risks, double huber_beta, std::span<double> grad) {
  if (!(huber_beta > 0.0)) throw std::invalid_argument("huber_beta must be positive");
  const auto split = stats::median_split(risks);
  double low = 0.0, high = 0.0;
  for (auto i : split.low) low += risks[i];
  for (auto i : split.high) high += risks[i];
  low /= static_cast<double>(split.low.size());
  high /= static_cast<double>(split.high.size());

  const double gap = high - low;
  const double x = 1.0 / (1.0 + std::abs(gap));
  const double value = smooth_l1(x, huber_beta);

  if (!grad.empty()) {
    if (grad.size() != risks.size()) throw std::invalid_argument("stratification_loss: gradient length mismatch");
    const double dl_dx = x <= huber_beta ? x / huber_beta : 1.0;
    const double sign = gap > 0.0 ? 1.0 : (gap < 0.0 ? -1.0 : 0.0);
    const double dl_dgap = dl_dx * (-sign * x * x);
    for (auto i : split.low) grad[i] = -dl_dgap / static_cast<double>(split.low.size());
    for (auto i : split.high) grad[i] = dl_dgap / static_cast<double>(split.high.size());
  }
  return value;
}

LossBreakdown combined_loss(std::span<const double> risks, std::span<const stats::SurvivalRecord> cohort,
                            const Matrix& embeddings, const Matrix& assigned_centroids, const LossWeights& weights,
                            LossGradients* grads, bool include_nlpl) {
  weights.validate();
  if (risks.size() != cohort.size()) throw std::invalid_argument("combined_loss: risks and cohort not aligned");
  LossBreakdown out;
  std::vector<double> g_risk(grads ? risks.size() : 0, 0.0);

  if (include_nlpl) {
    std::vector<double> g(grads ? risks.size() : 0);
    out.nlpl = stats::nlpl_with_grad(risks, cohort, g);
    for (std::size_t i = 0; i < g.size(); ++i) g_risk[i] += g[i];
  }

  Matrix g_emb;
  out.clustering = clustering_loss(embeddings, assigned_centroids, grads ? &g_emb : nullptr);

  const bool stratify = weights.lambda_s > 0.0 && risks.size() >= 2;
  if (stratify) {
    std::vector<double> g(grads ? risks.size() : 0);
    out.stratification = stratification_loss(risks, weights.huber_beta, g);
    for (std::size_t i = 0; i < g.size(); ++i) g_risk[i] += weights.lambda_s * g[i];
  }

  out.total = out.nlpl + weights.lambda_c * out.clustering + weights.lambda_s * out.stratification;

  if (grads) {
    for (auto& v : g_emb.data()) v *= weights.lambda_c;
    grads->risks = std::move(g_risk);
    grads->embeddings = std::move(g_emb);
  }
  return out;
}

}  // namespace epic::loss
