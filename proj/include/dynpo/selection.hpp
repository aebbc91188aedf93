#pragma once

// Boundary-negative selection and the S/B diagnostic partition.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dynpo/core.hpp"

namespace dynpo {

// Indices i with neg_theta[i] > pos_theta (strict), ascending.
std::vector<std::size_t> violation_set(const LikelihoodRecord& record);

struct Clustering {
  // assignments[i] is the cluster of values[i]; cluster 0 has the lowest
  // centroid and cluster k-1 the highest.
  std::vector<std::size_t> assignments;
  std::vector<double> centroids;
  double wcss = 0.0;
};

// Within-cluster sum of squares of values[first, last) around its mean.
double segment_wcss(std::span<const double> sorted, std::size_t first, std::size_t last);

// Globally optimal 1-D k-means. Clusters are contiguous runs of the values
// sorted ascending (stable in input index), found by dynamic programming.
// Among partitions with equal WCSS the one with the smallest top cluster is
// returned, then the smallest next cluster, and so on downwards.
Clustering kmeans_1d_exact(std::span<const double> values, std::size_t k);

enum class SelectionStage {
  Violation,
  Cluster,
  Degenerate,
};

std::string_view stage_name(SelectionStage stage) noexcept;

struct ClusterTriple {
  std::array<std::vector<std::size_t>, 3> members;  // top, mid, bottom
  std::array<double, 3> centroids{};                // top, mid, bottom
};

struct BoundarySelection {
  std::vector<std::size_t> boundary;  // ascending, never empty
  SelectionStage stage = SelectionStage::Degenerate;
  std::optional<ClusterTriple> clusters;
};

// Top cluster of a 3-means clustering of neg_theta. Requires k >= 3.
BoundarySelection cluster_selection(const LikelihoodRecord& record);

// Highest-likelihood negative, lowest index on ties.
BoundarySelection degenerate_selection(const LikelihoodRecord& record);

// Violations when any exist; otherwise the top likelihood cluster (k >= 3)
// or the single most likely negative (k < 3).
BoundarySelection select_boundary(const LikelihoodRecord& record);

// The `count` most likely negatives (lowest index on ties), ascending.
std::vector<std::size_t> top_k_negatives(const LikelihoodRecord& record, std::size_t count);

struct SBPartition {
  std::vector<std::size_t> s_indices;
  std::vector<std::size_t> b_indices;
  double threshold = 0.0;
};

// B = { i : pos_theta - neg_theta[i] <= threshold }, S = the rest.
SBPartition sb_partition(const LikelihoodRecord& record, double threshold = 0.0);

}  // namespace dynpo
