#include "dynpo/preference.hpp"

#include <cmath>
#include <numeric>

namespace dynpo {

std::string variant_name(const Variant& variant) {
  switch (variant.kind) {
    case Variant::Kind::Naive:
      return "naive";
    case Variant::Kind::TopK:
      return "topk";
    case Variant::Kind::Boundary:
      break;
  }
  if (variant.violation_stage && variant.cluster_stage && variant.dynamic_beta) return "dynamicpo";
  std::string name = "wo";
  if (!variant.violation_stage && !variant.cluster_stage) {
    name += "_stages";
  } else if (!variant.violation_stage) {
    name += "_stage1";
  } else if (!variant.cluster_stage) {
    name += "_stage2";
  }
  if (!variant.dynamic_beta) name += "_beta";
  return name;
}

Variant parse_variant(std::string_view name, std::size_t top_k) {
  if (name == "naive") return Variant::naive();
  if (name == "topk") {
    if (top_k == 0) throw_invalid("variant topk needs top_k >= 1");
    return Variant::top_k_only(top_k);
  }
  if (name == "dynamicpo") return Variant::dynamic_po();
  if (name.starts_with("wo")) {
    Variant v = Variant::dynamic_po();
    std::string_view rest = name.substr(2);
    auto take = [&rest](std::string_view part) {
      if (!rest.starts_with(part)) return false;
      rest.remove_prefix(part.size());
      return true;
    };
    if (take("_stages")) {
      v.violation_stage = v.cluster_stage = false;
    } else if (take("_stage1")) {
      v.violation_stage = false;
    } else if (take("_stage2")) {
      v.cluster_stage = false;
    }
    if (take("_beta")) v.dynamic_beta = false;
    if (rest.empty() && !(v == Variant::dynamic_po())) return v;
  }
  throw_invalid("unknown variant '" + std::string(name) + "'");
}

NegativePlan plan_negatives(const LikelihoodRecord& record, const Variant& variant,
                            const BetaConfig& cfg) {
  validate(cfg);
  if (record.k() == 0) throw_invalid("instance has no negatives");
  NegativePlan plan;
  switch (variant.kind) {
    case Variant::Kind::Naive:
      plan.active.resize(record.k());
      std::iota(plan.active.begin(), plan.active.end(), std::size_t{0});
      plan.betas.assign(record.k(), cfg.beta0);
      return plan;
    case Variant::Kind::TopK:
      plan.active = top_k_negatives(record, variant.top_k);
      plan.betas.assign(plan.active.size(), cfg.beta0);
      return plan;
    case Variant::Kind::Boundary:
      break;
  }

  if (variant.violation_stage && variant.cluster_stage) {
    BoundarySelection sel = select_boundary(record);
    plan.active = std::move(sel.boundary);
    plan.stage = sel.stage;
  } else {
    if (variant.violation_stage) {
      plan.active = violation_set(record);
      if (!plan.active.empty()) plan.stage = SelectionStage::Violation;
    }
    if (plan.active.empty() && variant.cluster_stage) {
      BoundarySelection sel =
          record.k() >= 3 ? cluster_selection(record) : degenerate_selection(record);
      plan.active = std::move(sel.boundary);
      plan.stage = sel.stage;
    }
    if (plan.active.empty()) {
      plan.active.resize(record.k());
      std::iota(plan.active.begin(), plan.active.end(), std::size_t{0});
    }
  }

  if (variant.dynamic_beta) {
    plan.betas = dynamic_betas(record, plan.active, cfg);
  } else {
    plan.betas.assign(plan.active.size(), cfg.beta0);
  }
  return plan;
}

LikelihoodRecord likelihood_record(const PolicyModel& model, const ReferenceModel& ref,
                                   const PreferenceInstance& instance) {
  const std::vector<double> theta = model.log_softmax(instance.context);
  const std::vector<double> reference = ref.policy().log_softmax(instance.context);
  LikelihoodRecord record;
  record.pos_theta = theta.at(instance.positive);
  record.pos_ref = reference.at(instance.positive);
  for (ItemId item : instance.negatives) {
    record.neg_theta.push_back(theta.at(item));
    record.neg_ref.push_back(reference.at(item));
  }
  return record;
}

InstanceTerms evaluate_instance(const PolicyModel& model, const ReferenceModel& ref,
                                const PreferenceInstance& instance, Objective objective,
                                const Variant& variant, const BetaConfig& cfg, Gradients* grads,
                                double weight, const NegativePlan* fixed_plan) {
  if (instance.negatives.empty()) throw_invalid("instance has no negatives");
  if (model.vocab_size() != ref.policy().vocab_size() || model.dim() != ref.policy().dim()) {
    throw_invalid("policy and reference shapes differ");
  }
  const ForwardPass pass = forward(model, instance.context);
  const std::vector<double> reference = ref.policy().log_softmax(instance.context);

  InstanceTerms terms;
  LikelihoodRecord& record = terms.record;
  record.pos_theta = pass.log_probs.at(instance.positive);
  record.pos_ref = reference.at(instance.positive);
  record.neg_theta.reserve(instance.k());
  record.neg_ref.reserve(instance.k());
  for (ItemId item : instance.negatives) {
    record.neg_theta.push_back(pass.log_probs.at(item));
    record.neg_ref.push_back(reference.at(item));
  }

  terms.plan = fixed_plan ? *fixed_plan : plan_negatives(record, variant, cfg);
  terms.loss = evaluate_loss(objective, log_ratios(record), terms.plan.betas, terms.plan.active);

  if (grads != nullptr) {
    std::vector<ItemId> items{instance.positive};
    std::vector<double> weights{weight * terms.loss.grad_pos};
    for (std::size_t idx : terms.plan.active) {
      items.push_back(instance.negatives[idx]);
      weights.push_back(weight * terms.loss.grad_neg[idx]);
    }
    backward(model, instance.context, pass, items, weights, *grads);
  }
  return terms;
}

PoBatchResult po_loss_and_gradients(const PolicyModel& model, const ReferenceModel& ref,
                                    std::span<const PreferenceInstance> batch,
                                    Objective objective, const Variant& variant,
                                    const BetaConfig& cfg) {
  if (batch.empty()) throw_invalid("preference batch is empty");
  PoBatchResult result{0.0, Gradients(model), {}};
  const double weight = 1.0 / static_cast<double>(batch.size());
  result.selections.reserve(batch.size());
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const InstanceTerms terms =
        evaluate_instance(model, ref, batch[n], objective, variant, cfg, &result.grads, weight);
    if (!std::isfinite(terms.loss.value)) {
      throw Error(ErrorCode::Numerical,
                  "non-finite loss at batch position " + std::to_string(n) + " (user " +
                      std::to_string(batch[n].context.user) + ", positive item " +
                      std::to_string(batch[n].positive) + ")");
    }
    total += terms.loss.value;
    result.selections.push_back({terms.plan.active.size(), terms.plan.stage});
  }
  result.mean_loss = total * weight;
  return result;
}

PoStepResult po_step(PolicyModel& model, const ReferenceModel& ref,
                     std::span<const PreferenceInstance> batch, Objective objective,
                     const Variant& variant, const BetaConfig& cfg, AdamOptimizer& opt) {
  PoBatchResult batch_result = po_loss_and_gradients(model, ref, batch, objective, variant, cfg);
  opt.step(model, batch_result.grads);
  return {batch_result.mean_loss, std::move(batch_result.selections)};
}

}  // namespace dynpo
