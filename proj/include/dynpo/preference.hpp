#pragma once

// Preference-optimization step over the policy: per-instance likelihoods
// against the frozen reference, negative selection for the chosen variant,
// the objective, and backpropagation into the embeddings.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynpo/beta.hpp"
#include "dynpo/core.hpp"
#include "dynpo/losses.hpp"
#include "dynpo/policy.hpp"
#include "dynpo/selection.hpp"

namespace dynpo {

// How the negatives entering the objective and their betas are chosen.
//
//   Naive     every negative, uniform beta0
//   TopK      the top_k most likely negatives, uniform beta0
//   Boundary  boundary selection; `violation_stage` and `cluster_stage`
//             toggle the two selection stages and `dynamic_beta` toggles
//             per-negative beta. With both stages off every negative is used.
struct Variant {
  enum class Kind { Naive, TopK, Boundary };

  Kind kind = Kind::Boundary;
  std::size_t top_k = 0;
  bool violation_stage = true;
  bool cluster_stage = true;
  bool dynamic_beta = true;

  static Variant naive() { return {Kind::Naive, 0, false, false, false}; }
  static Variant dynamic_po() { return {}; }
  static Variant top_k_only(std::size_t k) { return {Kind::TopK, k, false, false, false}; }
  static Variant without_stage1() { return {Kind::Boundary, 0, false, true, true}; }
  static Variant without_stage2() { return {Kind::Boundary, 0, true, false, true}; }
  static Variant without_stages() { return {Kind::Boundary, 0, false, false, true}; }
  static Variant without_beta() { return {Kind::Boundary, 0, true, true, false}; }

  bool operator==(const Variant&) const = default;
};

// Names: naive, dynamicpo, topk, wo_stage1, wo_stage2, wo_stages, wo_beta,
// wo_stages_beta (and the other boundary combinations spelled the same way).
std::string variant_name(const Variant& variant);
Variant parse_variant(std::string_view name, std::size_t top_k = 0);

struct NegativePlan {
  std::vector<std::size_t> active;  // ascending
  std::vector<double> betas;        // betas[j] belongs to active[j]
  std::optional<SelectionStage> stage;
};

NegativePlan plan_negatives(const LikelihoodRecord& record, const Variant& variant,
                            const BetaConfig& cfg);

struct SelectionLog {
  std::size_t selected = 0;
  std::optional<SelectionStage> stage;
};

LikelihoodRecord likelihood_record(const PolicyModel& model, const ReferenceModel& ref,
                                   const PreferenceInstance& instance);

struct InstanceTerms {
  LikelihoodRecord record;
  NegativePlan plan;
  LossOutput loss;
};

// Loss of one instance. When `grads` is given, weight * d(loss)/d(params) is
// added to it. Betas are treated as constants during backpropagation. A
// non-null `fixed_plan` replaces the variant's selection.
InstanceTerms evaluate_instance(const PolicyModel& model, const ReferenceModel& ref,
                                const PreferenceInstance& instance, Objective objective,
                                const Variant& variant, const BetaConfig& cfg,
                                Gradients* grads = nullptr, double weight = 1.0,
                                const NegativePlan* fixed_plan = nullptr);

struct PoBatchResult {
  double mean_loss = 0.0;
  Gradients grads;
  std::vector<SelectionLog> selections;
};

// Batch-mean loss and its parameter gradient; no parameters change.
PoBatchResult po_loss_and_gradients(const PolicyModel& model, const ReferenceModel& ref,
                                    std::span<const PreferenceInstance> batch,
                                    Objective objective, const Variant& variant,
                                    const BetaConfig& cfg);

struct PoStepResult {
  double mean_loss = 0.0;
  std::vector<SelectionLog> selections;
};

// One optimizer step on the batch-mean loss. Throws ErrorCode::Numerical on a
// non-finite loss, before any parameter is touched.
PoStepResult po_step(PolicyModel& model, const ReferenceModel& ref,
                     std::span<const PreferenceInstance> batch, Objective objective,
                     const Variant& variant, const BetaConfig& cfg, AdamOptimizer& opt);

}  // namespace dynpo
