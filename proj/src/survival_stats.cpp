#include "epic/survival_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace epic::stats {
namespace {

void check_aligned(std::span<const double> risks, std::span<const SurvivalRecord> cohort) {
  if (risks.size() != cohort.size()) {
    throw std::invalid_argument("risk vector length " + std::to_string(risks.size()) +
                                " does not match cohort size " + std::to_string(cohort.size()));
  }
  for (double r : risks) {
    if (!std::isfinite(r)) throw std::invalid_argument("risk vector contains a non-finite value");
  }
}

// Indices ordered by ascending time; ties keep input order.
std::vector<std::size_t> time_order(std::span<const SurvivalRecord> cohort) {
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cohort[a].time < cohort[b].time;
  });
  return order;
}

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  // count of inserted positions < i
  long prefix(std::size_t i) const {
    long s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<long> tree_;
};

}  // namespace

double KmCurve::survival_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double concordance_index(std::span<const double> risks, std::span<const SurvivalRecord> cohort) {
  check_aligned(risks, cohort);
  const std::size_t n = cohort.size();

  // Dense rank of each risk so a Fenwick tree can count lower/equal risks.
  std::vector<double> levels(risks.begin(), risks.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), risks[i]) -
                                       levels.begin());
  }

  // Sweep from the latest time down. When a time group is visited the tree holds
  // every subject with a strictly later time.
  const auto order = time_order(cohort);
  Fenwick tree(levels.size());
  long inserted = 0;
  long comparable = 0, concordant = 0, tied = 0;
  std::size_t hi = n;
  while (hi > 0) {
    std::size_t lo = hi - 1;
    while (lo > 0 && cohort[order[lo - 1]].time == cohort[order[hi - 1]].time) --lo;
    for (std::size_t p = lo; p < hi; ++p) {
      const std::size_t i = order[p];
      if (!cohort[i].event) continue;
      const long below = tree.prefix(rank[i]);
      const long at_or_below = tree.prefix(rank[i] + 1);
      comparable += inserted;
      concordant += below;
      tied += at_or_below - below;
    }
    for (std::size_t p = lo; p < hi; ++p) {
      tree.add(rank[order[p]]);
      ++inserted;
    }
    hi = lo;
  }
  if (comparable == 0) {
    throw UndefinedStatistic("undefined CI: cohort has no comparable pairs");
  }
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         static_cast<double>(comparable);
}

double nlpl_with_grad(std::span<const double> risks, std::span<const SurvivalRecord> cohort,
                      std::span<double> grad) {
  check_aligned(risks, cohort);
  const std::size_t n = cohort.size();
  if (std::none_of(cohort.begin(), cohort.end(), [](const auto& r) { return r.event; })) {
    throw UndefinedStatistic("no events: partial likelihood undefined");
  }
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != n) throw std::invalid_argument("gradient buffer has wrong length");

  const double shift = *std::max_element(risks.begin(), risks.end());
  const auto order = time_order(cohort);

  // Breslow: every subject tied at time t shares the risk set {j : T_j >= t}.
  // risk_sum[g] is the shifted exp-sum of the risk set for time group g.
  std::vector<std::size_t> group_start;
  for (std::size_t p = 0; p < n; ++p) {
    if (p == 0 || cohort[order[p]].time != cohort[order[p - 1]].time) group_start.push_back(p);
  }
  const std::size_t groups = group_start.size();
  std::vector<double> risk_sum(groups);
  double acc = 0.0;
  for (std::size_t g = groups; g-- > 0;) {
    const std::size_t end = g + 1 < groups ? group_start[g + 1] : n;
    for (std::size_t p = group_start[g]; p < end; ++p) acc += std::exp(risks[order[p]] - shift);
    risk_sum[g] = acc;
  }

  double value = 0.0;
  double inv_sum_acc = 0.0;  // sum over event groups up to and including g of d_g / risk_sum[g]
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t end = g + 1 < groups ? group_start[g + 1] : n;
    long deaths = 0;
    for (std::size_t p = group_start[g]; p < end; ++p) {
      const std::size_t i = order[p];
      if (!cohort[i].event) continue;
      ++deaths;
      value -= risks[i] - (shift + std::log(risk_sum[g]));
    }
    inv_sum_acc += static_cast<double>(deaths) / risk_sum[g];
    if (want_grad) {
      for (std::size_t p = group_start[g]; p < end; ++p) {
        const std::size_t k = order[p];
        grad[k] = std::exp(risks[k] - shift) * inv_sum_acc - (cohort[k].event ? 1.0 : 0.0);
      }
    }
  }
  return value;
}

double nlpl(std::span<const double> risks, std::span<const SurvivalRecord> cohort) {
  return nlpl_with_grad(risks, cohort, {});
}

std::vector<double> nlpl_grad(std::span<const double> risks, std::span<const SurvivalRecord> cohort) {
  std::vector<double> grad(cohort.size());
  nlpl_with_grad(risks, cohort, grad);
  return grad;
}

KmCurve kaplan_meier(std::span<const SurvivalRecord> cohort) {
  if (cohort.empty()) throw std::invalid_argument("kaplan_meier: empty cohort");
  const auto order = time_order(cohort);
  const std::size_t n = cohort.size();
  KmCurve curve;
  double s = 1.0;
  std::size_t p = 0;
  while (p < n) {
    const double t = cohort[order[p]].time;
    const long at_risk = static_cast<long>(n - p);
    long deaths = 0;
    std::size_t q = p;
    for (; q < n && cohort[order[q]].time == t; ++q) deaths += cohort[order[q]].event ? 1 : 0;
    if (deaths > 0) {
      s *= static_cast<double>(at_risk - deaths) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.survival.push_back(s);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(deaths);
    }
    p = q;
  }
  return curve;
}

LogRankResult log_rank_test(std::span<const SurvivalRecord> group_a,
                            std::span<const SurvivalRecord> group_b) {
  if (group_a.empty() || group_b.empty()) {
    throw std::invalid_argument("log_rank_test: both groups must be nonempty");
  }
  struct Entry {
    double time;
    bool event;
    bool in_a;
  };
  std::vector<Entry> pooled;
  pooled.reserve(group_a.size() + group_b.size());
  for (const auto& r : group_a) pooled.push_back({r.time, r.event, true});
  for (const auto& r : group_b) pooled.push_back({r.time, r.event, false});
  if (std::none_of(pooled.begin(), pooled.end(), [](const Entry& e) { return e.event; })) {
    throw UndefinedStatistic("log_rank_test: no events in either group");
  }
  std::sort(pooled.begin(), pooled.end(), [](const Entry& x, const Entry& y) { return x.time < y.time; });

  double n_a = static_cast<double>(group_a.size());
  double n_b = static_cast<double>(group_b.size());
  double observed_minus_expected = 0.0;
  double variance = 0.0;
  std::size_t p = 0;
  while (p < pooled.size()) {
    const double t = pooled[p].time;
    double d_a = 0, d = 0, leave_a = 0, leave_b = 0;
    for (; p < pooled.size() && pooled[p].time == t; ++p) {
      if (pooled[p].event) {
        d += 1;
        if (pooled[p].in_a) d_a += 1;
      }
      (pooled[p].in_a ? leave_a : leave_b) += 1;
    }
    const double n = n_a + n_b;
    if (d > 0) {
      observed_minus_expected += d_a - d * n_a / n;
      if (n > 1) variance += d * (n_a / n) * (n_b / n) * (n - d) / (n - 1);
    }
    n_a -= leave_a;
    n_b -= leave_b;
  }
  if (!(variance > 0.0)) {
    throw UndefinedStatistic("degenerate log-rank: zero variance across event times");
  }
  LogRankResult result;
  result.chi_square = observed_minus_expected * observed_minus_expected / variance;
  result.p_value = chi_square_sf(result.chi_square, 1);
  result.df = 1;
  return result;
}

MedianSplit median_split(std::span<const double> risks) {
  const std::size_t n = risks.size();
  if (n < 2) throw std::invalid_argument("median_split needs at least 2 subjects");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return risks[a] < risks[b]; });
  MedianSplit split;
  split.low.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2));
  split.high.assign(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
  return split;
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // Series for P(a, x).
    double ap = a, term = 1.0 / a, sum = term;
    for (int i = 0; i < kMaxIter; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return 1.0 - sum * std::exp(log_prefactor);
  }
  // Lentz continued fraction for Q(a, x).
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor) * h;
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_sf: df must be >= 1");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace epic::stats
