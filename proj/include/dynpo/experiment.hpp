#pragma once

// Two-stage pipeline (supervised fine-tuning, then preference optimization
// against the frozen post-SFT snapshot) and the files a run leaves behind.
//
// Run directory layout:
//   config.txt          the RunConfig, every key
//   reference.ckpt      post-SFT policy (the frozen reference)
//   po_epoch_<e>.ckpt   policy after PO epoch e (1-based)
//   final.ckpt          policy after the last PO epoch
//   epoch_losses.csv    stage,epoch,mean_loss
//   sb_curve.csv        progress,b_fraction,s_fraction
//   selections.csv      epoch,mean_selected_negatives,violation_fraction,
//                       cluster_fraction,degenerate_fraction,unstaged_fraction
//   summary.csv         see kSummaryColumns
//   timing.csv          po_steps,per_step_seconds  (wall clock, not reproducible)

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynpo/config.hpp"
#include "dynpo/data.hpp"
#include "dynpo/eval.hpp"
#include "dynpo/policy.hpp"

namespace dynpo {

SyntheticConfig synthetic_config(const RunConfig& cfg);

struct SftOutcome {
  PolicyModel model;
  std::vector<EpochLoss> losses;
};

SftOutcome run_sft(const DatasetSplit& split, const RunConfig& cfg);

struct EpochSelection {
  std::size_t epoch = 0;
  double mean_selected = 0.0;
  double violation_fraction = 0.0;
  double cluster_fraction = 0.0;
  double degenerate_fraction = 0.0;
  double unstaged_fraction = 0.0;  // naive, top-K, or ablated-to-all
};

struct RunOutcome {
  MetricsReport metrics;
  double sft_hit_ratio_at_1 = 0.0;
  double final_po_loss = 0.0;
  std::size_t po_steps = 0;
  std::vector<EpochSelection> selections;
  PolicyModel reference;
  PolicyModel final_model;
  std::vector<PolicyModel> epoch_models;
  std::vector<double> step_seconds;  // wall time of every PO step, in order
};

// Evaluation cases on the test split. Candidate sets and win-rate negatives
// come from seed-derived streams independent of training.
std::vector<RankingCase> ranking_cases(const DatasetSplit& split, const RunConfig& cfg);
std::vector<PreferenceInstance> win_rate_instances(const DatasetSplit& split, const RunConfig& cfg);

// Runs SFT (unless `sft` is given) and PO. Throws ErrorCode::Numerical on a
// non-finite PO loss; when `run_dir` is set the offending batch is written to
// nan_dump.txt there first.
RunOutcome run_experiment(const RunConfig& cfg, const DatasetSplit& split,
                          const SftOutcome* sft = nullptr,
                          const std::optional<std::filesystem::path>& run_dir = std::nullopt);

// PO wall time for several configs trained in lockstep from the same SFT
// policy: step s of every config runs back to back on this thread, so slow
// phases of a shared machine hit all of them alike. Configs must share the
// seed, batch size, epochs and negative count.
struct LockstepTiming {
  std::vector<std::vector<double>> step_seconds;  // [config][step]
  std::size_t po_steps = 0;
};

LockstepTiming time_po_lockstep(std::span<const RunConfig> cfgs, const DatasetSplit& split,
                                const SftOutcome& sft);

inline constexpr const char* kSummaryColumns =
    "objective,variant,top_k,negatives,beta0,alpha,gamma,seed,sft_hit_ratio_at_1,"
    "hit_ratio_at_1,reward_win_rate,mean_selected_negatives,final_po_loss,po_steps";

std::string summary_row(const RunConfig& cfg, const RunOutcome& outcome);

void write_run_outputs(const std::filesystem::path& run_dir, const RunConfig& cfg,
                       const RunOutcome& outcome);

}  // namespace dynpo
