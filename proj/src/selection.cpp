#include "dynpo/selection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

namespace dynpo {

std::vector<std::size_t> violation_set(const LikelihoodRecord& record) {
  // Branch-free compaction: the comparison outcomes are data-dependent.
  std::vector<std::size_t> out(record.k());
  std::size_t count = 0;
  for (std::size_t i = 0; i < record.k(); ++i) {
    out[count] = i;
    count += record.neg_theta[i] > record.pos_theta ? 1 : 0;
  }
  out.resize(count);
  return out;
}

double segment_wcss(std::span<const double> sorted, std::size_t first, std::size_t last) {
  if (last <= first) return 0.0;
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += sorted[i];
  const double mean = sum / static_cast<double>(last - first);
  double ss = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double d = sorted[i] - mean;
    ss += d * d;
  }
  return ss;
}

Clustering kmeans_1d_exact(std::span<const double> values, std::size_t k) {
  const std::size_t n = values.size();
  if (k == 0) throw_invalid("kmeans_1d_exact requires k >= 1");
  if (n < k) {
    throw_invalid("kmeans_1d_exact needs at least " + std::to_string(k) + " values, got " +
                  std::to_string(n));
  }

  for (double v : values) {
    if (!std::isfinite(v)) throw_invalid("kmeans_1d_exact requires finite values");
  }

  const std::size_t stride = n + 1;
  // Short inputs (the per-instance negative lists) stay on the stack.
  constexpr std::size_t kStackIndices = 256, kStackDoubles = 1024;
  std::array<std::size_t, kStackIndices> index_stack;
  std::array<double, kStackDoubles> double_stack;
  std::unique_ptr<std::size_t[]> index_heap;
  std::unique_ptr<double[]> double_heap;

  // Index block: sort order, DP split points, cluster bounds.
  const std::size_t index_need = n + k * stride + k + 1;
  std::size_t* index_block = index_stack.data();
  if (index_need > kStackIndices) {
    index_heap = std::make_unique_for_overwrite<std::size_t[]>(index_need);
    index_block = index_heap.get();
  }
  const std::span<std::size_t> order(index_block, n);
  std::size_t* split = index_block + n;
  std::size_t* bounds = split + k * stride;

  // Stable ascending order. Short lists (the per-instance negatives) are
  // ranked by counting, which has no data-dependent branches; index breaks
  // ties in the general sort.
  if (n <= 32) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = values[i];
      std::size_t rank = 0;
      for (std::size_t j = 0; j < i; ++j) rank += static_cast<std::size_t>(values[j] <= v);
      for (std::size_t j = i + 1; j < n; ++j) rank += static_cast<std::size_t>(values[j] < v);
      order[rank] = i;
    }
  } else {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
  }

  // One block: sorted values, 1/m, prefix sums of the centred values and of
  // their squares, the DP cost rows, and one row of split candidates. Centring on the mean keeps the
  // prefix-sum cancellation far below the tie tolerance.
  const std::size_t double_need = n + 3 * stride + (k + 1) * stride;
  double* sorted = double_stack.data();
  if (double_need > kStackDoubles) {
    double_heap = std::make_unique_for_overwrite<double[]>(double_need);
    sorted = double_heap.get();
  }
  double* inv = sorted + n;
  double* p1 = inv + stride;
  double* p2 = p1 + stride;
  double* cost = p2 + stride;
  double* candidates = cost + k * stride;
  double centre = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = values[order[i]];
    centre += sorted[i];
  }
  centre /= static_cast<double>(n);
  inv[0] = 0.0;
  p1[0] = 0.0;
  p2[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sorted[i] - centre;
    inv[i + 1] = 1.0 / static_cast<double>(i + 1);
    p1[i + 1] = p1[i] + x;
    p2[i + 1] = p2[i] + x * x;
  }
  // WCSS of sorted[j, i); runs of equal values are exactly zero.
  auto w = [&](std::size_t j, std::size_t i) {
    const double s = p1[i] - p1[j];
    const double ss = std::max(0.0, p2[i] - p2[j] - s * s * inv[i - j]);
    return sorted[j] == sorted[i - 1] ? 0.0 : ss;
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kTie = 1e-12;
  // cost[c * stride + i]: best WCSS of sorted[0, i) in c + 1 clusters;
  // split[c * stride + i] is where the last of those clusters starts.
  std::fill(cost, cost + k * stride, kInf);
  for (std::size_t i = 1; i <= n; ++i) cost[i] = w(0, i);
  for (std::size_t c = 1; c < k; ++c) {
    const double* prev = cost + (c - 1) * stride;
    double* cur = cost + c * stride;
    // Layer c is only read up to n - (k - 1 - c); the last layer at i = n.
    const std::size_t last = n - (k - 1 - c);
    for (std::size_t i = c + 1 < k ? c + 1 : n; i <= last; ++i) {
      double best = kInf;
      for (std::size_t j = c; j < i; ++j) {
        candidates[j] = prev[j] + w(j, i);
        best = std::min(best, candidates[j]);
      }
      // Costs within kTie of the minimum are ties; the latest start wins, i.e.
      // the smaller upper cluster. Rounding must not decide exact ties.
      const double limit = best + kTie * std::max(1.0, best);
      std::size_t best_j = i - 1;
      while (best_j > c && candidates[best_j] > limit) --best_j;
      cur[i] = best;
      split[c * stride + i] = best_j;
    }
  }

  bounds[0] = 0;
  bounds[k] = n;
  for (std::size_t c = k - 1; c > 0; --c) bounds[c] = split[c * stride + bounds[c + 1]];

  Clustering out;
  out.assignments.assign(n, 0);
  out.centroids.assign(k, 0.0);
  out.wcss = cost[(k - 1) * stride + n];
  for (std::size_t c = 0; c < k; ++c) {
    double sum = 0.0;
    for (std::size_t p = bounds[c]; p < bounds[c + 1]; ++p) {
      out.assignments[order[p]] = c;
      sum += sorted[p];
    }
    out.centroids[c] = sum / static_cast<double>(bounds[c + 1] - bounds[c]);
  }
  return out;
}

std::string_view stage_name(SelectionStage stage) noexcept {
  switch (stage) {
    case SelectionStage::Violation:
      return "violation";
    case SelectionStage::Cluster:
      return "cluster";
    case SelectionStage::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

BoundarySelection cluster_selection(const LikelihoodRecord& record) {
  if (record.k() < 3) throw_invalid("cluster selection needs at least 3 negatives");
  const Clustering clustering = kmeans_1d_exact(record.neg_theta, 3);
  ClusterTriple triple;
  std::array<std::size_t, 3> sizes{};
  for (std::size_t a : clustering.assignments) ++sizes[2 - a];
  for (std::size_t c = 0; c < 3; ++c) triple.members[c].reserve(sizes[c]);
  for (std::size_t i = 0; i < record.k(); ++i) {
    triple.members[2 - clustering.assignments[i]].push_back(i);
  }
  for (std::size_t c = 0; c < 3; ++c) triple.centroids[2 - c] = clustering.centroids[c];

  BoundarySelection out;
  out.stage = SelectionStage::Cluster;
  out.boundary = triple.members[0];
  out.clusters = std::move(triple);
  return out;
}

BoundarySelection degenerate_selection(const LikelihoodRecord& record) {
  if (record.k() == 0) throw_invalid("selection requires at least one negative");
  std::size_t best = 0;
  for (std::size_t i = 1; i < record.k(); ++i) {
    if (record.neg_theta[i] > record.neg_theta[best]) best = i;
  }
  BoundarySelection out;
  out.stage = SelectionStage::Degenerate;
  out.boundary = {best};
  return out;
}

BoundarySelection select_boundary(const LikelihoodRecord& record) {
  if (record.k() == 0) throw_invalid("selection requires at least one negative");
  std::vector<std::size_t> violations = violation_set(record);
  if (!violations.empty()) {
    BoundarySelection out;
    out.stage = SelectionStage::Violation;
    out.boundary = std::move(violations);
    return out;
  }
  if (record.k() >= 3) return cluster_selection(record);
  return degenerate_selection(record);
}

std::vector<std::size_t> top_k_negatives(const LikelihoodRecord& record, std::size_t count) {
  if (count == 0 || count > record.k()) {
    throw_invalid("top-K count must be in [1, " + std::to_string(record.k()) + "], got " +
                  std::to_string(count));
  }
  std::vector<std::size_t> order(record.k());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return record.neg_theta[a] > record.neg_theta[b];
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

SBPartition sb_partition(const LikelihoodRecord& record, double threshold) {
  SBPartition out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < record.k(); ++i) {
    if (record.pos_theta - record.neg_theta[i] <= threshold) {
      out.b_indices.push_back(i);
    } else {
      out.s_indices.push_back(i);
    }
  }
  return out;
}

}  // namespace dynpo
