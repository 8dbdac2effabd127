#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "epic/part_model.hpp"
#include "oracles.hpp"

using epic::Matrix;
using namespace epic::parts;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::copy(r.begin(), r.end(), m.row(i++).begin());
  }
  return m;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : m.row(i)) v = g(rng);
  }
  return m;
}

// Brute force: every member's distance to the member mean, then the p smallest
// by (distance, tile id).
std::vector<std::size_t> brute_representatives(const Matrix& z, const std::vector<std::size_t>& a, std::size_t j,
                                               std::size_t p) {
  std::vector<std::size_t> m;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == j) m.push_back(i);
  }
  if (m.empty()) return {};
  std::vector<double> mean(z.cols(), 0.0);
  for (auto i : m) {
    for (std::size_t c = 0; c < z.cols(); ++c) mean[c] += z(i, c) / static_cast<double>(m.size());
  }
  std::vector<std::size_t> chosen;
  std::vector<bool> used(m.size(), false);
  for (std::size_t r = 0; r < std::min(p, m.size()); ++r) {
    std::size_t best = m.size();
    double best_d = 0.0;
    for (std::size_t q = 0; q < m.size(); ++q) {
      if (used[q]) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) d += (z(m[q], c) - mean[c]) * (z(m[q], c) - mean[c]);
      if (best == m.size() || d < best_d) {
        best = q;
        best_d = d;
      }
    }
    used[best] = true;
    chosen.push_back(m[best]);
  }
  return chosen;
}

}  // namespace

TEST_CASE("init_centroids draws distinct rows") {
  std::mt19937_64 rng(1);
  const auto z = random_matrix(rng, 12, 3);
  const auto one = init_centroids(z, 1, 5);
  CHECK(one.k() == 1);
  CHECK(init_centroids(z, 4, 5) == init_centroids(z, 4, 5));

  const auto all = init_centroids(z, 12, 9);
  std::set<std::size_t> seen;
  for (std::size_t j = 0; j < 12; ++j) {
    for (std::size_t i = 0; i < 12; ++i) {
      if (std::equal(all.centroids.row(j).begin(), all.centroids.row(j).end(), z.row(i).begin())) seen.insert(i);
    }
  }
  CHECK(seen.size() == 12);
  CHECK_THROWS_AS(init_centroids(z, 13, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_centroids(z, 0, 0), std::invalid_argument);
}

TEST_CASE("assignment ties go to the lower centroid index") {
  GlobalCentroids c{rows_of({{-1.0}, {1.0}}), 0};
  const auto a = assign_tiles(rows_of({{0.0}, {0.9}, {-3.0}}), c);
  CHECK(a == std::vector<std::size_t>{0, 1, 0});
}

TEST_CASE("assignment agrees with the brute-force nearest centroid") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const auto z = random_matrix(rng, 30, 4);
    GlobalCentroids c{random_matrix(rng, 5, 4), 0};
    const auto a = assign_tiles(z, c);
    for (std::size_t i = 0; i < z.rows(); ++i) REQUIRE(a[i] == oracle::nearest_centroid(z.row(i), c.centroids));
  }
}

TEST_CASE("local parts on a 1-d example") {
  const auto z = rows_of({{0.0}, {1.0}, {10.0}});
  const auto sp = local_parts(z, {0, 0, 0}, 2, 2, "s");
  CHECK(sp.slide_id == "s");
  CHECK(sp.representatives[0] == std::vector<std::size_t>{1, 0});
  CHECK(sp.parts(0, 0) == doctest::Approx(0.5));
  CHECK_FALSE(sp.empty_mask[0]);
  CHECK(sp.empty_mask[1]);
  CHECK(sp.parts(1, 0) == 0.0);
  CHECK(sp.representatives[1].empty());
}

TEST_CASE("local parts: p larger than cluster uses every member") {
  const auto z = rows_of({{2.0, 0.0}, {4.0, 2.0}});
  const auto sp = local_parts(z, {1, 1}, 2, 10);
  CHECK(sp.representatives[1].size() == 2);
  CHECK(sp.parts(1, 0) == doctest::Approx(3.0));
  CHECK(sp.parts(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("local parts agree with brute force and respect the invariants") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> part(0, 5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto z = random_matrix(rng, 25, 3);
    std::vector<std::size_t> a(25);
    for (auto& v : a) v = part(rng);
    const std::size_t p = 1 + static_cast<std::size_t>(rep % 5);
    const auto sp = local_parts(z, a, 6, p);
    REQUIRE(sp.parts.rows() == 6);
    for (std::size_t j = 0; j < 6; ++j) {
      const auto expect = brute_representatives(z, a, j, p);
      REQUIRE(sp.representatives[j] == expect);
      REQUIRE(sp.empty_mask[j] == expect.empty());
      CHECK(sp.representatives[j].size() <= p);
      for (auto t : sp.representatives[j]) CHECK(a[t] == j);
      for (std::size_t c = 0; c < 3; ++c) {
        double m = 0.0;
        for (auto t : expect) m += z(t, c);
        if (!expect.empty()) m /= static_cast<double>(expect.size());
        CHECK(sp.parts(j, c) == doctest::Approx(m).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("centroid update: mean of members, carry-forward when empty") {
  GlobalCentroids prev{rows_of({{0.0, 0.0}, {5.0, 5.0}, {9.0, 9.0}}), 3};
  CentroidAccumulator acc(3, 2);
  acc.add(rows_of({{1.0, 2.0}, {3.0, 4.0}}), {0, 0});
  acc.add(rows_of({{6.0, 6.0}}), {1});
  const auto next = update_centroids(acc, prev);
  CHECK(next.epoch == 4);
  CHECK(next.centroids(0, 0) == 2.0);
  CHECK(next.centroids(0, 1) == 3.0);
  CHECK(next.centroids(1, 0) == 6.0);
  CHECK(next.centroids(2, 0) == 9.0);
  CHECK(acc.counts() == std::vector<std::size_t>{2, 1, 0});
}

TEST_CASE("centroids already at cluster means are a fixed point") {
  const auto z = rows_of({{0.0}, {2.0}, {10.0}, {12.0}});
  GlobalCentroids c{rows_of({{1.0}, {11.0}}), 0};
  CentroidAccumulator acc(2, 1);
  acc.add(z, assign_tiles(z, c));
  CHECK(update_centroids(acc, c).centroids == c.centroids);
}

TEST_CASE("alternating assignment and update never increases the objective") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto z = random_matrix(rng, 80, 3);
    auto c = init_centroids(z, 5, static_cast<std::uint64_t>(rep));
    double prev = clustering_objective(z, assign_tiles(z, c), c);
    for (int step = 0; step < 20; ++step) {
      CentroidAccumulator acc(5, 3);
      acc.add(z, assign_tiles(z, c));
      c = update_centroids(acc, c);
      const double now = clustering_objective(z, assign_tiles(z, c), c);
      REQUIRE(now <= prev + 1e-12);
      prev = now;
    }
  }
}

TEST_CASE("clustering objective hand value") {
  GlobalCentroids c{rows_of({{0.0, 0.0}}), 0};
  CHECK(clustering_objective(rows_of({{3.0, 4.0}, {1.0, 0.0}}), {0, 0}, c) == 26.0);
}
