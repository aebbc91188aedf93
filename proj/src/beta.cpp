#include "dynpo/beta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace dynpo {

void validate(const BetaConfig& cfg) {
  if (!(cfg.beta0 > 0.0) || !std::isfinite(cfg.beta0)) throw_invalid("beta0 must be positive");
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw_invalid("alpha must lie in [0, 1)");
  if (!std::isfinite(cfg.gamma)) throw_invalid("gamma must be finite");
}

namespace {

// Mean theta log-likelihood of negatives outside `boundary`, or `fallback`
// when the boundary covers them all.
double easy_mean(const LikelihoodRecord& record, std::span<const std::size_t> boundary,
                 double fallback) {
  double sum = 0.0;
  std::size_t count = 0;
  auto accumulate = [&](auto&& outside) {
    for (std::size_t i = 0; i < record.k(); ++i) {
      const bool keep = outside(i);
      sum += keep ? record.neg_theta[i] : 0.0;
      count += keep ? 1 : 0;
    }
  };
  if (record.k() <= 64) {
    std::uint64_t mask = 0;
    for (std::size_t idx : boundary) mask |= std::uint64_t{1} << idx;
    accumulate([mask](std::size_t i) { return ((mask >> i) & 1U) == 0; });
  } else {
    std::vector<bool> in_boundary(record.k(), false);
    for (std::size_t idx : boundary) in_boundary[idx] = true;
    accumulate([&](std::size_t i) { return !in_boundary[i]; });
  }
  return count == 0 ? fallback : sum / static_cast<double>(count);
}

void check_boundary(const LikelihoodRecord& record, std::span<const std::size_t> boundary) {
  for (std::size_t idx : boundary) {
    if (idx >= record.k()) throw_invalid("boundary index out of range");
  }
}

DualMargins margins_with(double l_plus, double l_b, double l_e) {
  DualMargins m;
  m.l_plus = l_plus;
  m.l_b = l_b;
  m.l_e = l_e;
  m.delta_p = l_plus - l_b;
  m.delta_n = l_b - l_e;
  return m;
}

}  // namespace

DualMargins dual_margins(const LikelihoodRecord& record, std::span<const std::size_t> boundary,
                         std::size_t b_index) {
  check_boundary(record, boundary);
  if (std::find(boundary.begin(), boundary.end(), b_index) == boundary.end()) {
    throw_invalid("negative is not part of the boundary set");
  }
  const double l_b = record.neg_theta[b_index];
  return margins_with(record.pos_theta, l_b, easy_mean(record, boundary, l_b));
}

namespace {

double beta_unchecked(double delta_p, double delta_n, const BetaConfig& cfg) {
  const double scale = std::abs(delta_p) + std::abs(delta_n);
  if (scale == 0.0) return cfg.beta0;
  const double shift = (delta_p - delta_n - cfg.gamma) / scale;
  return cfg.beta0 * (1.0 + cfg.alpha * std::tanh(shift));
}

}  // namespace

double dynamic_beta(const DualMargins& margins, const BetaConfig& cfg) {
  validate(cfg);
  return beta_unchecked(margins.delta_p, margins.delta_n, cfg);
}

std::vector<double> dynamic_betas(const LikelihoodRecord& record,
                                  std::span<const std::size_t> boundary, const BetaConfig& cfg) {
  validate(cfg);
  check_boundary(record, boundary);
  std::vector<double> betas(boundary.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double l_e_all = easy_mean(record, boundary, nan);
  for (std::size_t j = 0; j < boundary.size(); ++j) {
    const double l_b = record.neg_theta[boundary[j]];
    const double l_e = std::isnan(l_e_all) ? l_b : l_e_all;
    const DualMargins m = margins_with(record.pos_theta, l_b, l_e);
    betas[j] = beta_unchecked(m.delta_p, m.delta_n, cfg);
  }
  return betas;
}

}  // namespace dynpo
