#pragma once

// Measurement: HitRatio@1 re-ranking, reward win rate, S/B proportions over
// training, selection sizes, and the CSV files these are written to.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dynpo/core.hpp"
#include "dynpo/data.hpp"
#include "dynpo/policy.hpp"
#include "dynpo/preference.hpp"
#include "dynpo/selection.hpp"

namespace dynpo {

struct RankingCase {
  Context context;
  EvalCandidateSet candidates;
};

// Fraction of cases whose positive has a strictly larger log-probability than
// every distractor. Ties count as misses.
double hit_ratio_at_1(const PolicyModel& model, std::span<const RankingCase> cases);

// Fraction of instances where beta0 * (theta - ref) of the positive strictly
// exceeds that of every negative.
double reward_win_rate(const PolicyModel& model, const ReferenceModel& ref,
                       std::span<const PreferenceInstance> instances, double beta0 = 1.0);

struct SbCheckpoint {
  double progress = 0.0;  // fraction of PO steps completed
  std::vector<LikelihoodRecord> records;
};

struct SbPoint {
  double progress = 0.0;
  double b_fraction = 0.0;
  double s_fraction = 0.0;
};

// Pooled fraction of negatives in B at each checkpoint. Needs >= 2
// checkpoints with ascending progress.
std::vector<SbPoint> sb_proportion_curve(std::span<const SbCheckpoint> checkpoints,
                                         double threshold = 0.0);

double mean_selected_negatives(std::span<const SelectionLog> selections);
double mean_selected_negatives(std::span<const BoundarySelection> selections);

struct EpochLoss {
  std::string stage;  // "sft" or "po"
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

struct MetricsReport {
  double hit_ratio_at_1 = 0.0;
  double reward_win_rate = 0.0;
  double mean_selected_negatives = 0.0;
  std::vector<SbPoint> sb_proportions;
  double per_step_seconds = 0.0;
  std::vector<EpochLoss> epoch_losses;
};

// Column schemas:
//   epoch_losses.csv  stage,epoch,mean_loss
//   sb_curve.csv      progress,b_fraction,s_fraction
void write_epoch_losses_csv(std::span<const EpochLoss> losses, std::ostream& out);
void write_sb_curve_csv(std::span<const SbPoint> curve, std::ostream& out);

}  // namespace dynpo
