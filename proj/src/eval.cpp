#include "dynpo/eval.hpp"

#include <algorithm>
#include <ostream>

namespace dynpo {

double hit_ratio_at_1(const PolicyModel& model, std::span<const RankingCase> cases) {
  if (cases.empty()) throw_invalid("hit ratio needs at least one test case");
  std::size_t hits = 0;
  for (const RankingCase& c : cases) {
    const std::vector<double> log_probs = model.log_softmax(c.context);
    const double pos = log_probs.at(c.candidates.positive);
    const bool hit = std::all_of(c.candidates.distractors.begin(), c.candidates.distractors.end(),
                                 [&](ItemId d) { return pos > log_probs.at(d); });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

double reward_win_rate(const PolicyModel& model, const ReferenceModel& ref,
                       std::span<const PreferenceInstance> instances, double beta0) {
  if (instances.empty()) throw_invalid("win rate needs at least one instance");
  if (!(beta0 > 0.0)) throw_invalid("beta0 must be positive");
  std::size_t wins = 0;
  for (const PreferenceInstance& inst : instances) {
    const LikelihoodRecord rec = likelihood_record(model, ref, inst);
    const LogRatioSet ratios = log_ratios(rec);
    const double pos = beta0 * ratios.r_pos;
    const bool win = std::all_of(ratios.r_neg.begin(), ratios.r_neg.end(),
                                 [&](double r) { return pos > beta0 * r; });
    if (win) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(instances.size());
}

std::vector<SbPoint> sb_proportion_curve(std::span<const SbCheckpoint> checkpoints,
                                         double threshold) {
  if (checkpoints.size() < 2) throw_invalid("S/B curve needs at least two checkpoints");
  std::vector<SbPoint> curve;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    if (c > 0 && !(checkpoints[c].progress > checkpoints[c - 1].progress)) {
      throw_invalid("S/B checkpoints must have ascending progress");
    }
    std::size_t boundary = 0;
    std::size_t total = 0;
    for (const LikelihoodRecord& rec : checkpoints[c].records) {
      boundary += sb_partition(rec, threshold).b_indices.size();
      total += rec.k();
    }
    SbPoint point;
    point.progress = checkpoints[c].progress;
    point.b_fraction = total == 0 ? 0.0 : static_cast<double>(boundary) / static_cast<double>(total);
    point.s_fraction = 1.0 - point.b_fraction;
    curve.push_back(point);
  }
  return curve;
}

double mean_selected_negatives(std::span<const SelectionLog> selections) {
  if (selections.empty()) throw_invalid("no selections logged");
  double total = 0.0;
  for (const SelectionLog& s : selections) total += static_cast<double>(s.selected);
  return total / static_cast<double>(selections.size());
}

double mean_selected_negatives(std::span<const BoundarySelection> selections) {
  if (selections.empty()) throw_invalid("no selections logged");
  double total = 0.0;
  for (const BoundarySelection& s : selections) total += static_cast<double>(s.boundary.size());
  return total / static_cast<double>(selections.size());
}

void write_epoch_losses_csv(std::span<const EpochLoss> losses, std::ostream& out) {
  out << "stage,epoch,mean_loss\n";
  for (const EpochLoss& l : losses) {
    out << l.stage << ',' << l.epoch << ',' << format_double(l.mean_loss) << '\n';
  }
}

void write_sb_curve_csv(std::span<const SbPoint> curve, std::ostream& out) {
  out << "progress,b_fraction,s_fraction\n";
  for (const SbPoint& p : curve) {
    out << format_double(p.progress) << ',' << format_double(p.b_fraction) << ','
        << format_double(p.s_fraction) << '\n';
  }
}

}  // namespace dynpo
