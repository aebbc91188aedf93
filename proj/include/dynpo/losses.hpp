#pragma once

// Preference-optimization objectives over log-ratio rewards, with exact
// gradients with respect to the theta log-likelihoods.
//
// Every multi-negative objective takes an `active` subset of negative indices
// and a beta per active negative (betas[j] belongs to active[j]). Inactive
// negatives receive a gradient of exactly zero. Because r = theta - ref, the
// gradient with respect to a theta log-likelihood equals the gradient with
// respect to the corresponding log-ratio.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dynpo/core.hpp"

namespace dynpo {

enum class Objective {
  Dpo,
  Dmpo,
  Sdpo,
  Mppo,
};

std::string_view objective_name(Objective objective) noexcept;
Objective parse_objective(std::string_view name);

struct LossOutput {
  double value = 0.0;
  double grad_pos = 0.0;
  std::vector<double> grad_neg;  // length k, zero outside the active set
};

// -log sigmoid(beta * (r_pos - r_neg[0])). Requires exactly one negative.
LossOutput dpo_loss(const LogRatioSet& ratios, double beta);

// -log sigmoid(mean_{i in active} beta_i * (r_pos - r_neg[i])).
// Uniform beta over all negatives is the standard multi-negative DPO loss.
LossOutput dmpo_loss(const LogRatioSet& ratios, std::span<const double> betas,
                     std::span<const std::size_t> active);

// -log sigmoid(-log sum_{i in active} exp(beta_i * (r_neg[i] - r_pos))).
LossOutput sdpo_style_loss(const LogRatioSet& ratios, std::span<const double> betas,
                           std::span<const std::size_t> active);

// Mean over active negatives of the pairwise DPO loss.
LossOutput mppo_style_loss(const LogRatioSet& ratios, std::span<const double> betas,
                           std::span<const std::size_t> active);

// Dispatch on objective. For Objective::Dpo the active set must be {0} and
// the record must hold a single negative.
LossOutput evaluate_loss(Objective objective, const LogRatioSet& ratios,
                         std::span<const double> betas,
                         std::span<const std::size_t> active);

struct GradientDecomposition {
  double s_term = 0.0;          // (|S|/k) * mean of grad over S
  double b_term = 0.0;          // (|B|/k) * mean of grad over B
  double reconstruction = 0.0;  // s_term + b_term
};

// Splits the mean negative gradient into the contribution of S and of B.
// S and B must partition {0..k-1}.
GradientDecomposition neg_gradient_decomposition(std::span<const double> grad_neg,
                                                 std::span<const std::size_t> s_indices,
                                                 std::span<const std::size_t> b_indices);

}  // namespace dynpo
