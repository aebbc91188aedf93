#include "dynpo/losses.hpp"

#include <cmath>
#include <string>

#include "dynpo/stable_math.hpp"

namespace dynpo {

std::string_view objective_name(Objective objective) noexcept {
  switch (objective) {
    case Objective::Dpo:
      return "dpo";
    case Objective::Dmpo:
      return "dmpo";
    case Objective::Sdpo:
      return "sdpo";
    case Objective::Mppo:
      return "mppo";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  if (name == "dpo") return Objective::Dpo;
  if (name == "dmpo") return Objective::Dmpo;
  if (name == "sdpo") return Objective::Sdpo;
  if (name == "mppo") return Objective::Mppo;
  throw_invalid("unknown objective '" + std::string(name) + "'");
}

namespace {

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw_invalid("beta must be a positive finite number");
  }
}

void check_selection(const LogRatioSet& ratios, std::span<const double> betas,
                     std::span<const std::size_t> active) {
  if (active.empty()) throw_invalid("active negative set is empty");
  if (betas.size() != active.size()) {
    throw_invalid("beta vector length does not match the active set");
  }
  std::vector<bool> seen(ratios.k(), false);
  for (std::size_t idx : active) {
    if (idx >= ratios.k()) throw_invalid("active index out of range");
    if (seen[idx]) throw_invalid("active index repeated");
    seen[idx] = true;
  }
  for (double b : betas) check_beta(b);
}

}  // namespace

LossOutput dpo_loss(const LogRatioSet& ratios, double beta) {
  if (ratios.k() != 1) throw_invalid("dpo_loss requires exactly one negative");
  check_beta(beta);
  const double margin = beta * (ratios.r_pos - ratios.r_neg[0]);
  const double s = sigmoid(-margin);
  LossOutput out;
  out.value = neg_log_sigmoid(margin);
  out.grad_pos = -s * beta;
  out.grad_neg = {s * beta};
  return out;
}

LossOutput dmpo_loss(const LogRatioSet& ratios, std::span<const double> betas,
                     std::span<const std::size_t> active) {
  check_selection(ratios, betas, active);
  const double m = static_cast<double>(active.size());
  double weighted = 0.0;
  double beta_sum = 0.0;
  for (std::size_t j = 0; j < active.size(); ++j) {
    weighted += betas[j] * (ratios.r_pos - ratios.r_neg[active[j]]);
    beta_sum += betas[j];
  }
  const double z = weighted / m;
  const double s = sigmoid(-z);

  LossOutput out;
  out.value = neg_log_sigmoid(z);
  out.grad_pos = -s * beta_sum / m;
  out.grad_neg.assign(ratios.k(), 0.0);
  for (std::size_t j = 0; j < active.size(); ++j) {
    out.grad_neg[active[j]] = s * betas[j] / m;
  }
  return out;
}

LossOutput sdpo_style_loss(const LogRatioSet& ratios, std::span<const double> betas,
                           std::span<const std::size_t> active) {
  check_selection(ratios, betas, active);
  std::vector<double> terms(active.size());
  for (std::size_t j = 0; j < active.size(); ++j) {
    terms[j] = betas[j] * (ratios.r_neg[active[j]] - ratios.r_pos);
  }
  const double lse = log_sum_exp(terms);
  const double s = sigmoid(lse);

  LossOutput out;
  out.value = softplus(lse);
  out.grad_neg.assign(ratios.k(), 0.0);
  double pos = 0.0;
  for (std::size_t j = 0; j < active.size(); ++j) {
    const double g = s * std::exp(terms[j] - lse) * betas[j];
    out.grad_neg[active[j]] = g;
    pos -= g;
  }
  out.grad_pos = pos;
  return out;
}

LossOutput mppo_style_loss(const LogRatioSet& ratios, std::span<const double> betas,
                           std::span<const std::size_t> active) {
  check_selection(ratios, betas, active);
  const double m = static_cast<double>(active.size());
  LossOutput out;
  out.grad_neg.assign(ratios.k(), 0.0);
  double value = 0.0;
  double pos = 0.0;
  for (std::size_t j = 0; j < active.size(); ++j) {
    const double margin = betas[j] * (ratios.r_pos - ratios.r_neg[active[j]]);
    value += neg_log_sigmoid(margin);
    const double g = sigmoid(-margin) * betas[j] / m;
    out.grad_neg[active[j]] = g;
    pos -= g;
  }
  out.value = value / m;
  out.grad_pos = pos;
  return out;
}

LossOutput evaluate_loss(Objective objective, const LogRatioSet& ratios,
                         std::span<const double> betas,
                         std::span<const std::size_t> active) {
  switch (objective) {
    case Objective::Dpo:
      if (active.size() != 1 || active[0] != 0 || betas.size() != 1) {
        throw_invalid("the dpo objective takes exactly one active negative");
      }
      return dpo_loss(ratios, betas[0]);
    case Objective::Dmpo:
      return dmpo_loss(ratios, betas, active);
    case Objective::Sdpo:
      return sdpo_style_loss(ratios, betas, active);
    case Objective::Mppo:
      return mppo_style_loss(ratios, betas, active);
  }
  throw_invalid("unknown objective");
}

GradientDecomposition neg_gradient_decomposition(std::span<const double> grad_neg,
                                                 std::span<const std::size_t> s_indices,
                                                 std::span<const std::size_t> b_indices) {
  const std::size_t k = grad_neg.size();
  if (k == 0) throw_invalid("gradient vector is empty");
  std::vector<int> owner(k, 0);
  for (auto [set, tag] : {std::pair{s_indices, 1}, std::pair{b_indices, 2}}) {
    for (std::size_t idx : set) {
      if (idx >= k) throw_invalid("partition index out of range");
      if (owner[idx] != 0) throw_invalid("S and B partition overlaps");
      owner[idx] = tag;
    }
  }
  for (int o : owner) {
    if (o == 0) throw_invalid("S and B do not cover every negative");
  }

  auto weighted_mean = [&](std::span<const std::size_t> set) {
    if (set.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t idx : set) sum += grad_neg[idx];
    const double n = static_cast<double>(set.size());
    return (n / static_cast<double>(k)) * (sum / n);
  };

  GradientDecomposition out;
  out.s_term = weighted_mean(s_indices);
  out.b_term = weighted_mean(b_indices);
  out.reconstruction = out.s_term + out.b_term;
  return out;
}

}  // namespace dynpo
