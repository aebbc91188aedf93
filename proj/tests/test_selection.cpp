#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dynpo/selection.hpp"
#include "oracles.hpp"

using namespace dynpo;

namespace {

using Indices = std::vector<std::size_t>;

LikelihoodRecord theta_only(double pos, std::vector<double> neg) {
  LikelihoodRecord r;
  r.pos_theta = pos;
  r.pos_ref = pos;
  r.neg_ref = neg;
  r.neg_theta = std::move(neg);
  return r;
}

}  // namespace

TEST_CASE("violation_set is strict") {
  CHECK(violation_set(theta_only(-2, {-1, -3})) == Indices{0});
  CHECK(violation_set(theta_only(-1, {-1, -1})).empty());
  CHECK(violation_set(theta_only(-5, {-1, -2, -3})) == Indices{0, 1, 2});
}

TEST_CASE("kmeans_1d_exact small cases") {
  const Clustering c = kmeans_1d_exact(std::vector<double>{0, 0, 10, 10, 20, 20}, 3);
  CHECK(c.assignments == Indices{0, 0, 1, 1, 2, 2});
  CHECK(c.centroids == std::vector<double>{0, 10, 20});
  CHECK(c.wcss == 0.0);

  const Clustering single = kmeans_1d_exact(std::vector<double>{3, 1, 2}, 3);
  CHECK(single.assignments == Indices{2, 0, 1});
  CHECK(single.wcss == 0.0);

  const std::vector<double> v{-9.1, -8.7, -8.5, -5.2, -5.0, -1.3};
  const Clustering dp = kmeans_1d_exact(v, 3);
  const oracle::Enumerated e = oracle::enumerate_kmeans(v, 3);
  CHECK(dp.wcss == doctest::Approx(e.wcss).epsilon(1e-12));
  CHECK(dp.assignments == Indices{0, 0, 0, 1, 1, 2});

  CHECK_THROWS_AS(kmeans_1d_exact(std::vector<double>{1, 2}, 3), Error);
  CHECK_THROWS_AS(kmeans_1d_exact(std::vector<double>{1, 2}, 0), Error);
  CHECK_THROWS_AS(kmeans_1d_exact(std::vector<double>{1, std::nan(""), 2}, 2), Error);
}

TEST_CASE("kmeans_1d_exact matches enumeration") {
  Rng rng(RngSeed{99});
  for (int t = 0; t < 400; ++t) {
    const std::size_t n = 1 + rng.below(10);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(3, n));
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform() < 0.2 ? std::floor(rng.uniform() * 4) : rng.normal() * 5;
    const Clustering dp = kmeans_1d_exact(v, k);
    const oracle::Enumerated e = oracle::enumerate_kmeans(v, k);
    CHECK(std::abs(dp.wcss - e.wcss) <= 1e-9 * std::max(1.0, e.wcss));
    // Clusters are intervals: cluster order follows value order.
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (dp.assignments[a] < dp.assignments[b]) CHECK(v[a] <= v[b]);
      }
    }
    std::vector<double> distinct = v;
    std::sort(distinct.begin(), distinct.end());
    const auto unique = std::unique(distinct.begin(), distinct.end()) - distinct.begin();
    for (std::size_t c = 1; c < k; ++c) {
      CHECK(dp.centroids[c - 1] <= dp.centroids[c]);
      if (static_cast<std::size_t>(unique) >= k) CHECK(dp.centroids[c - 1] < dp.centroids[c]);
    }
  }
}

TEST_CASE("tied partitions keep the smaller top cluster") {
  // {0},{1,2},{3} and {0},{1},{2,3} and {0,1},{2},{3} all cost 0.5.
  const Clustering c = kmeans_1d_exact(std::vector<double>{0, 1, 2, 3}, 3);
  CHECK(c.assignments[3] == 2);
  CHECK(std::count(c.assignments.begin(), c.assignments.end(), 2u) == 1);
  CHECK(std::count(c.assignments.begin(), c.assignments.end(), 1u) == 1);
}

TEST_CASE("select_boundary stages") {
  const BoundarySelection vio = select_boundary(theta_only(-2, {-1, -5, -6}));
  CHECK(vio.stage == SelectionStage::Violation);
  CHECK(vio.boundary == Indices{0});
  CHECK_FALSE(vio.clusters.has_value());

  const BoundarySelection clu = select_boundary(theta_only(0, {-1, -1, -10, -10, -20}));
  CHECK(clu.stage == SelectionStage::Cluster);
  CHECK(clu.boundary == Indices{0, 1});
  REQUIRE(clu.clusters.has_value());
  CHECK(clu.clusters->centroids[0] > clu.clusters->centroids[1]);
  CHECK(clu.clusters->centroids[1] > clu.clusters->centroids[2]);

  const BoundarySelection deg = select_boundary(theta_only(0, {-3, -7}));
  CHECK(deg.stage == SelectionStage::Degenerate);
  CHECK(deg.boundary == Indices{0});
  CHECK(select_boundary(theta_only(0, {-3, -3})).boundary == Indices{0});

  CHECK_THROWS_AS(select_boundary(theta_only(0, {})), Error);
}

TEST_CASE("gap-zero ties fall to the cluster stage") {
  const BoundarySelection s = select_boundary(theta_only(-1, {-1, -1.1, -8, -9, -15}));
  CHECK(s.stage == SelectionStage::Cluster);
  CHECK(s.boundary == Indices{0, 1});
}

TEST_CASE("select_boundary is permutation equivariant") {
  Rng rng(RngSeed{5});
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 3 + rng.below(13);
    std::vector<double> neg(k);
    for (double& x : neg) x = -rng.uniform() * 10;
    const double pos = rng.uniform() < 0.5 ? 0.0 : -rng.uniform() * 10;
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    std::vector<double> permuted(k);
    for (std::size_t i = 0; i < k; ++i) permuted[i] = neg[perm[i]];

    const Indices a = select_boundary(theta_only(pos, neg)).boundary;
    Indices b;
    for (std::size_t i : select_boundary(theta_only(pos, permuted)).boundary) b.push_back(perm[i]);
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("top_k_negatives") {
  const LikelihoodRecord r = theta_only(0, {-3, -1, -2, -1, -9});
  CHECK(top_k_negatives(r, 1) == Indices{1});
  CHECK(top_k_negatives(r, 2) == Indices{1, 3});
  CHECK(top_k_negatives(r, 3) == Indices{1, 2, 3});
  CHECK_THROWS_AS(top_k_negatives(r, 6), Error);
  CHECK_THROWS_AS(top_k_negatives(r, 0), Error);
}

TEST_CASE("sb_partition") {
  SBPartition p = sb_partition(theta_only(-1, {-1, -5}));
  CHECK(p.b_indices == Indices{0});
  CHECK(p.s_indices == Indices{1});

  p = sb_partition(theta_only(0, {-4, -5}));
  CHECK(p.b_indices.empty());

  p = sb_partition(theta_only(-3, {-2, -3, -9}));
  CHECK(p.b_indices == Indices{0, 1});
  CHECK(p.s_indices == Indices{2});

  p = sb_partition(theta_only(-3, {-2, -3, -9}), 6.0);
  CHECK(p.b_indices == Indices{0, 1, 2});
}

TEST_CASE("sb_partition with threshold zero follows the gap sign") {
  Rng rng(RngSeed{8});
  for (int t = 0; t < 200; ++t) {
    std::vector<double> neg(15);
    for (double& x : neg) x = std::round(-rng.uniform() * 8);
    const LikelihoodRecord r = theta_only(std::round(-rng.uniform() * 8), neg);
    const SBPartition p = sb_partition(r);
    const std::vector<double> gaps = likelihood_gaps(r);
    for (std::size_t i = 0; i < 15; ++i) {
      const bool in_b = std::binary_search(p.b_indices.begin(), p.b_indices.end(), i);
      CHECK(in_b == (gaps[i] <= 0.0));
    }
    CHECK(p.b_indices.size() + p.s_indices.size() == 15);
  }
}
