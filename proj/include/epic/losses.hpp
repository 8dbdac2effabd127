#pragma once

#include <span>
#include <vector>

#include "epic/matrix.hpp"
#include "epic/survival_stats.hpp"

namespace epic::loss {

struct LossWeights {
  double lambda_c = 0.1;    // clustering coupling
  double lambda_s = 1.0;    // stratification boosting
  double huber_beta = 1.0;  // smooth-L1 transition point

  void validate() const;
};

struct LossBreakdown {
  double nlpl = 0.0;
  double clustering = 0.0;
  double stratification = 0.0;
  double total = 0.0;
};

/// smooth-L1(x, 0): 0.5 x^2 / beta inside |x| <= beta, |x| - beta / 2 outside.
double smooth_l1(double x, double beta);

/// sum_i ||z_i - c_i||^2 with centroids held constant. When `grad` is non-null
/// it receives 2 (z_i - c_i) row by row.
double clustering_loss(const Matrix& embeddings, const Matrix& assigned_centroids, Matrix* grad = nullptr);

/// Median split, group means, then smooth-L1(1 / (1 + |R_high - R_low|), 0).
/// Group membership is treated as constant for the gradient.
double stratification_loss(std::span<const double> risks, double huber_beta, std::span<double> grad = {});

struct LossGradients {
  std::vector<double> risks;
  Matrix embeddings;
};

/// NLPL + lambda_c * clustering + lambda_s * stratification. With
/// `include_nlpl` false the partial-likelihood term is dropped (reported 0);
/// the stratification term needs at least two risks and is skipped otherwise.
LossBreakdown combined_loss(std::span<const double> risks, std::span<const stats::SurvivalRecord> cohort,
                            const Matrix& embeddings, const Matrix& assigned_centroids, const LossWeights& weights,
                            LossGradients* grads = nullptr, bool include_nlpl = true);

}  // namespace epic::loss
