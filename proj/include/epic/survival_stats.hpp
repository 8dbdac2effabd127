#pragma once

// Censored-data statistics: Cox partial likelihood and its gradient, Harrell's
// concordance index, the Kaplan-Meier product-limit estimator, the two-sample
// log-rank test and the median risk split used for stratification.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace epic::stats {

/// Raised when a statistic has no defined value for the given input
/// (no comparable pairs, no events, zero log-rank variance).
class UndefinedStatistic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct SurvivalRecord {
  std::string subject_id;
  double time = 0.0;   // months, >= 0
  bool event = false;  // true = observed event, false = censored

  friend bool operator==(const SurvivalRecord&, const SurvivalRecord&) = default;
};

using Cohort = std::vector<SurvivalRecord>;

struct KmCurve {
  std::vector<double> times;  // distinct event times, strictly increasing
  std::vector<double> survival;
  std::vector<long> at_risk;
  std::vector<long> events;

  /// S(t) as a right-continuous step function; 1 before the first event time.
  double survival_at(double t) const;

  friend bool operator==(const KmCurve&, const KmCurve&) = default;
};

struct LogRankResult {
  double chi_square = 0.0;
  double p_value = 1.0;
  int df = 1;
};

struct MedianSplit {
  std::vector<std::size_t> low;
  std::vector<std::size_t> high;
};

/// Harrell's C. Pair (i,j) is comparable iff T_i < T_j and subject i had the
/// event. Concordant when the earlier subject has strictly higher risk; tied
/// risks credit 0.5. Throws UndefinedStatistic when no pair is comparable.
double concordance_index(std::span<const double> risks, std::span<const SurvivalRecord> cohort);

/// Negative log partial likelihood with Breslow handling of tied times.
double nlpl(std::span<const double> risks, std::span<const SurvivalRecord> cohort);

/// Analytic gradient of nlpl with respect to each risk.
std::vector<double> nlpl_grad(std::span<const double> risks, std::span<const SurvivalRecord> cohort);

/// Value and gradient in one pass; `grad` must have the cohort's length.
double nlpl_with_grad(std::span<const double> risks, std::span<const SurvivalRecord> cohort,
                      std::span<double> grad);

KmCurve kaplan_meier(std::span<const SurvivalRecord> cohort);

LogRankResult log_rank_test(std::span<const SurvivalRecord> group_a,
                            std::span<const SurvivalRecord> group_b);

/// Sort by (risk, index); the first floor(n/2) go low, the rest high.
MedianSplit median_split(std::span<const double> risks);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution.
double chi_square_sf(double x, int df);

}  // namespace epic::stats
