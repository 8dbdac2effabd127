#pragma once

// Brute-force reference computations used only by the tests. None of these
// share code with the library implementations they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "epic/matrix.hpp"
#include "epic/survival_stats.hpp"

namespace oracle {

using epic::stats::SurvivalRecord;

/// O(n^2) scan over all ordered pairs.
inline double concordance(const std::vector<double>& risk, const std::vector<SurvivalRecord>& c) {
  double credit = 0.0, comparable = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (!(c[i].event && c[i].time < c[j].time)) continue;
      comparable += 1.0;
      if (risk[i] > risk[j]) credit += 1.0;
      else if (risk[i] == risk[j]) credit += 0.5;
    }
  }
  return comparable > 0 ? credit / comparable : std::numeric_limits<double>::quiet_NaN();
}

/// Direct definition: each event term over its explicit risk set.
inline double nlpl(const std::vector<double>& h, const std::vector<SurvivalRecord>& c) {
  double v = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c[i].event) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c[j].time >= c[i].time) s += std::exp(h[j]);
    }
    v -= h[i] - std::log(s);
  }
  return v;
}

struct KmPoint {
  double time;
  double survival;
  long at_risk;
  long events;
};

/// Product-limit estimate recomputed from scratch at every distinct event time.
inline std::vector<KmPoint> kaplan_meier(const std::vector<SurvivalRecord>& c) {
  std::set<double> event_times;
  for (const auto& r : c) {
    if (r.event) event_times.insert(r.time);
  }
  std::vector<KmPoint> out;
  for (double t : event_times) {
    double s = 1.0;
    for (double u : event_times) {
      if (u > t) break;
      long n = 0, d = 0;
      for (const auto& r : c) {
        if (r.time >= u) ++n;
        if (r.time == u && r.event) ++d;
      }
      s *= static_cast<double>(n - d) / static_cast<double>(n);
    }
    long n = 0, d = 0;
    for (const auto& r : c) {
      if (r.time >= t) ++n;
      if (r.time == t && r.event) ++d;
    }
    out.push_back({t, s, n, d});
  }
  return out;
}

inline std::size_t nearest_centroid(std::span<const double> z, const epic::Matrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    double d = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) d += (z[c] - centroids(j, c)) * (z[c] - centroids(j, c));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

/// Random cohort with mixed censoring; times drawn from a small grid when
/// `ties` so that tied times actually occur.
inline std::vector<SurvivalRecord> random_cohort(std::mt19937_64& rng, std::size_t n, bool ties = false,
                                                 double event_prob = 0.7) {
  std::uniform_real_distribution<double> u(0.1, 100.0);
  std::uniform_int_distribution<int> grid(1, 8);
  std::bernoulli_distribution ev(event_prob);
  std::vector<SurvivalRecord> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i].subject_id = "s" + std::to_string(i);
    c[i].time = ties ? static_cast<double>(grid(rng)) : u(rng);
    c[i].event = ev(rng);
  }
  return c;
}

inline std::vector<double> random_risks(std::mt19937_64& rng, std::size_t n, bool ties = false) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> lv(0, 3);
  std::vector<double> r(n);
  for (auto& v : r) v = ties ? static_cast<double>(lv(rng)) : g(rng);
  return r;
}

}  // namespace oracle
