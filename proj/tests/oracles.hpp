#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls into the code under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

// Naive -log(1 / (1 + exp(-x))), fine for the moderate arguments used here.
inline double neg_log_sigmoid(double x) { return -std::log(1.0 / (1.0 + std::exp(-x))); }

inline double rel_err(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double central_difference(const std::function<double(double)>& f, double x,
                                 double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Two-pass WCSS of sorted[first, last).
inline double wcss(const std::vector<double>& sorted, std::size_t first, std::size_t last) {
  double mean = 0.0;
  for (std::size_t i = first; i < last; ++i) mean += sorted[i];
  mean /= static_cast<double>(last - first);
  double acc = 0.0;
  for (std::size_t i = first; i < last; ++i) acc += (sorted[i] - mean) * (sorted[i] - mean);
  return acc;
}

struct Enumerated {
  double wcss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> bounds;      // k + 1 cut points into the sorted order
  std::vector<std::size_t> order;       // sorted position -> input index
};

// Every split of the stably sorted values into k non-empty contiguous runs.
// Ties (within `tie`) keep the split whose top cluster is smallest, then the
// next cluster down, and so on.
inline Enumerated enumerate_kmeans(const std::vector<double>& values, std::size_t k,
                                   double tie = 0.0) {
  const std::size_t n = values.size();
  Enumerated best;
  best.order.resize(n);
  std::iota(best.order.begin(), best.order.end(), std::size_t{0});
  std::stable_sort(best.order.begin(), best.order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = values[best.order[i]];

  std::vector<std::size_t> cuts(k + 1);
  cuts[0] = 0;
  cuts[k] = n;
  auto better_tie = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    for (std::size_t c = k; c-- > 0;) {
      const std::size_t sa = a[c + 1] - a[c], sb = b[c + 1] - b[c];
      if (sa != sb) return sa < sb;
    }
    return false;
  };
  std::function<void(std::size_t)> rec = [&](std::size_t c) {
    if (c == k) {
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += wcss(sorted, cuts[j], cuts[j + 1]);
      if (total < best.wcss - tie ||
          (std::abs(total - best.wcss) <= tie && better_tie(cuts, best.bounds))) {
        best.wcss = total;
        best.bounds = cuts;
      }
      return;
    }
    if (c == k - 1) {
      rec(k);
      return;
    }
    for (std::size_t cut = cuts[c] + 1; cut + (k - 1 - c) <= n; ++cut) {
      cuts[c + 1] = cut;
      rec(c + 1);
    }
  };
  rec(0);
  return best;
}

// Input indices of the highest cluster, ascending.
inline std::vector<std::size_t> top_cluster(const Enumerated& e) {
  const std::size_t k = e.bounds.size() - 1;
  std::vector<std::size_t> out(e.order.begin() + static_cast<std::ptrdiff_t>(e.bounds[k - 1]),
                               e.order.begin() + static_cast<std::ptrdiff_t>(e.bounds[k]));
  std::sort(out.begin(), out.end());
  return out;
}

struct ScratchDir {
  std::filesystem::path path;

  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("dynpo_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace oracle
