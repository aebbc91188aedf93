#include "dynpo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dynpo {

namespace {

constexpr std::uint64_t kSftShuffle = 101;
constexpr std::uint64_t kPoShuffle = 102;
constexpr std::uint64_t kPoNegatives = 103;
constexpr std::uint64_t kProbe = 104;
constexpr std::uint64_t kEvalCandidates = 105;
constexpr std::uint64_t kWinNegatives = 106;

std::vector<std::size_t> shuffled_indices(std::size_t n, RngSeed seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

void dump_batch(const std::filesystem::path& path, const PolicyModel& model,
                const ReferenceModel& ref, std::span<const PreferenceInstance> batch,
                std::size_t epoch, std::size_t step, const std::string& reason) {
  std::ostringstream out;
  out << "# non-finite preference loss: " << reason << "\n";
  out << "# epoch " << epoch << ", step " << step << "\n";
  out << "user,positive,negatives,pos_theta,pos_ref,neg_theta,neg_ref\n";
  for (const PreferenceInstance& inst : batch) {
    const LikelihoodRecord rec = likelihood_record(model, ref, inst);
    out << inst.context.user << ',' << inst.positive << ',';
    for (std::size_t i = 0; i < inst.k(); ++i) out << (i ? " " : "") << inst.negatives[i];
    out << ',' << format_double(rec.pos_theta) << ',' << format_double(rec.pos_ref) << ',';
    for (std::size_t i = 0; i < rec.k(); ++i) out << (i ? " " : "") << format_double(rec.neg_theta[i]);
    out << ',';
    for (std::size_t i = 0; i < rec.k(); ++i) out << (i ? " " : "") << format_double(rec.neg_ref[i]);
    out << '\n';
  }
  write_text(path, out.str());
}

}  // namespace

SyntheticConfig synthetic_config(const RunConfig& cfg) {
  SyntheticConfig s = cfg.synthetic;
  s.seed = cfg.run_seed();
  return s;
}

SftOutcome run_sft(const DatasetSplit& split, const RunConfig& cfg) {
  validate(cfg);
  if (split.train.empty()) throw_invalid("dataset has no training entries");
  SftOutcome outcome{PolicyModel::random(split.vocab_size, cfg.dim, cfg.run_seed()), {}};
  AdamOptimizer opt(outcome.model, AdamConfig{cfg.sft_lr});

  std::vector<SftExample> examples;
  examples.reserve(split.train.size());
  for (const SplitEntry& e : split.train) examples.push_back({e.context, e.positive});

  std::vector<SftExample> batch;
  for (std::size_t epoch = 1; epoch <= cfg.sft_epochs; ++epoch) {
    const auto order = shuffled_indices(examples.size(), derive_seed(cfg.run_seed(), {kSftShuffle, epoch}));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      total += sft_step(outcome.model, batch, opt) * static_cast<double>(batch.size());
    }
    outcome.losses.push_back({"sft", epoch, total / static_cast<double>(examples.size())});
  }
  return outcome;
}

std::vector<RankingCase> ranking_cases(const DatasetSplit& split, const RunConfig& cfg) {
  std::vector<RankingCase> cases;
  cases.reserve(split.test.size());
  const RngSeed seed = derive_seed(cfg.run_seed(), {kEvalCandidates});
  for (const SplitEntry& e : split.test) {
    cases.push_back({e.context, build_eval_candidates(e, split.vocab_size, seed)});
  }
  return cases;
}

std::vector<PreferenceInstance> win_rate_instances(const DatasetSplit& split, const RunConfig& cfg) {
  std::vector<PreferenceInstance> out;
  out.reserve(split.test.size());
  const RngSeed seed = derive_seed(cfg.run_seed(), {kWinNegatives});
  for (const SplitEntry& e : split.test) {
    out.push_back(sample_negatives(e, split, cfg.negatives, seed, cfg.negative_sampler));
  }
  return out;
}

RunOutcome run_experiment(const RunConfig& cfg, const DatasetSplit& split, const SftOutcome* sft,
                          const std::optional<std::filesystem::path>& run_dir) {
  validate(cfg);
  if (cfg.po_epochs == 0) throw_invalid("po_epochs must be positive");
  if (split.train.empty()) throw_invalid("dataset has no training entries");
  if (split.test.empty()) throw_invalid("dataset has no test entries");

  std::optional<SftOutcome> local;
  if (sft == nullptr) {
    local = run_sft(split, cfg);
    sft = &*local;
  }
  const ReferenceModel ref(sft->model);
  RunOutcome outcome{{}, 0.0, 0.0, 0, {}, sft->model, sft->model, {}, {}};
  PolicyModel& model = outcome.final_model;
  AdamOptimizer opt(model, AdamConfig{cfg.po_lr});

  const std::vector<RankingCase> cases = ranking_cases(split, cfg);
  outcome.sft_hit_ratio_at_1 = hit_ratio_at_1(ref.policy(), cases);

  // Fixed probe instances for the S/B curve.
  std::vector<PreferenceInstance> probe;
  {
    const auto order = shuffled_indices(split.train.size(), derive_seed(cfg.run_seed(), {kProbe, 0}));
    const RngSeed seed = derive_seed(cfg.run_seed(), {kProbe, 1});
    for (std::size_t i = 0; i < std::min(cfg.sb_probe, order.size()); ++i) {
      probe.push_back(sample_negatives(split.train[order[i]], split, cfg.negatives, seed,
                                       cfg.negative_sampler));
    }
  }
  auto probe_records = [&]() {
    std::vector<LikelihoodRecord> records;
    records.reserve(probe.size());
    for (const PreferenceInstance& inst : probe) records.push_back(likelihood_record(model, ref, inst));
    return records;
  };

  const std::size_t batches_per_epoch = (split.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * cfg.po_epochs;
  std::vector<std::size_t> checkpoint_steps;
  const auto intervals = static_cast<std::size_t>(std::llround(1.0 / cfg.sb_interval));
  for (std::size_t j = 0; j <= intervals; ++j) {
    const auto step = std::min<std::size_t>(
        total_steps, static_cast<std::size_t>(std::llround(static_cast<double>(j) * cfg.sb_interval *
                                                           static_cast<double>(total_steps))));
    if (checkpoint_steps.empty() || step > checkpoint_steps.back()) checkpoint_steps.push_back(step);
  }
  if (checkpoint_steps.back() != total_steps) checkpoint_steps.push_back(total_steps);
  std::vector<SbCheckpoint> checkpoints;
  std::size_t next_checkpoint = 0;
  auto maybe_checkpoint = [&](std::size_t step) {
    if (next_checkpoint < checkpoint_steps.size() && checkpoint_steps[next_checkpoint] == step) {
      checkpoints.push_back({static_cast<double>(step) / static_cast<double>(total_steps), probe_records()});
      ++next_checkpoint;
    }
  };
  maybe_checkpoint(0);

  std::vector<SelectionLog> all_selections;
  double step_seconds = 0.0;
  std::size_t step = 0;
  std::vector<PreferenceInstance> batch;
  for (std::size_t epoch = 1; epoch <= cfg.po_epochs; ++epoch) {
    const RngSeed neg_seed =
        derive_seed(cfg.run_seed(), {kPoNegatives, cfg.fixed_negatives ? 0 : epoch});
    std::vector<PreferenceInstance> instances;
    instances.reserve(split.train.size());
    for (const SplitEntry& e : split.train) {
      instances.push_back(sample_negatives(e, split, cfg.negatives, neg_seed, cfg.negative_sampler));
    }
    const auto order = shuffled_indices(instances.size(), derive_seed(cfg.run_seed(), {kPoShuffle, epoch}));

    double epoch_loss = 0.0;
    EpochSelection sel_stats;
    sel_stats.epoch = epoch;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(instances[order[i]]);

      PoStepResult result;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        result = po_step(model, ref, batch, cfg.objective, cfg.variant, cfg.beta, opt);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Numerical && run_dir) {
          std::filesystem::create_directories(*run_dir);
          const auto dump = *run_dir / "nan_dump.txt";
          dump_batch(dump, model, ref, batch, epoch, step, e.what());
          throw Error(ErrorCode::Numerical, std::string(e.what()) + "; batch dumped to " + dump.string());
        }
        throw;
      }
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      step_seconds += seconds;
      outcome.step_seconds.push_back(seconds);
      ++step;

      epoch_loss += result.mean_loss * static_cast<double>(batch.size());
      for (const SelectionLog& s : result.selections) {
        sel_stats.mean_selected += static_cast<double>(s.selected);
        if (!s.stage) {
          sel_stats.unstaged_fraction += 1.0;
        } else if (*s.stage == SelectionStage::Violation) {
          sel_stats.violation_fraction += 1.0;
        } else if (*s.stage == SelectionStage::Cluster) {
          sel_stats.cluster_fraction += 1.0;
        } else {
          sel_stats.degenerate_fraction += 1.0;
        }
        ++counted;
      }
      all_selections.insert(all_selections.end(), result.selections.begin(), result.selections.end());
      maybe_checkpoint(step);
    }
    const double n = static_cast<double>(counted);
    sel_stats.mean_selected /= n;
    sel_stats.violation_fraction /= n;
    sel_stats.cluster_fraction /= n;
    sel_stats.degenerate_fraction /= n;
    sel_stats.unstaged_fraction /= n;
    outcome.selections.push_back(sel_stats);
    outcome.metrics.epoch_losses.push_back({"po", epoch, epoch_loss / static_cast<double>(instances.size())});
    outcome.epoch_models.push_back(model);
  }

  outcome.po_steps = step;
  outcome.final_po_loss = outcome.metrics.epoch_losses.back().mean_loss;
  outcome.metrics.epoch_losses.insert(outcome.metrics.epoch_losses.begin(), sft->losses.begin(),
                                      sft->losses.end());
  outcome.metrics.hit_ratio_at_1 = hit_ratio_at_1(model, cases);
  outcome.metrics.reward_win_rate =
      reward_win_rate(model, ref, win_rate_instances(split, cfg), cfg.beta.beta0);
  outcome.metrics.mean_selected_negatives = mean_selected_negatives(all_selections);
  outcome.metrics.sb_proportions = sb_proportion_curve(checkpoints, cfg.sb_threshold);
  outcome.metrics.per_step_seconds = step_seconds / static_cast<double>(step);
  return outcome;
}

LockstepTiming time_po_lockstep(std::span<const RunConfig> cfgs, const DatasetSplit& split,
                                const SftOutcome& sft) {
  if (cfgs.empty()) throw_invalid("lockstep timing needs at least one config");
  const RunConfig& lead = cfgs.front();
  for (const RunConfig& cfg : cfgs) {
    validate(cfg);
    if (cfg.seed != lead.seed || cfg.batch_size != lead.batch_size ||
        cfg.po_epochs != lead.po_epochs || cfg.negatives != lead.negatives) {
      throw_invalid("lockstep configs must share seed, batch_size, po_epochs and negatives");
    }
  }
  if (split.train.empty()) throw_invalid("dataset has no training entries");

  const ReferenceModel ref(sft.model);
  std::vector<PolicyModel> models(cfgs.size(), sft.model);
  std::vector<AdamOptimizer> opts;
  opts.reserve(cfgs.size());
  for (std::size_t c = 0; c < cfgs.size(); ++c) opts.emplace_back(models[c], AdamConfig{cfgs[c].po_lr});

  LockstepTiming out;
  out.step_seconds.resize(cfgs.size());
  std::vector<PreferenceInstance> batch;
  for (std::size_t epoch = 1; epoch <= lead.po_epochs; ++epoch) {
    const RngSeed neg_seed =
        derive_seed(lead.run_seed(), {kPoNegatives, lead.fixed_negatives ? 0 : epoch});
    std::vector<PreferenceInstance> instances;
    instances.reserve(split.train.size());
    for (const SplitEntry& e : split.train) {
      instances.push_back(sample_negatives(e, split, lead.negatives, neg_seed, lead.negative_sampler));
    }
    const auto order = shuffled_indices(instances.size(), derive_seed(lead.run_seed(), {kPoShuffle, epoch}));
    for (std::size_t start = 0; start < order.size(); start += lead.batch_size) {
      const std::size_t end = std::min(order.size(), start + lead.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(instances[order[i]]);
      for (std::size_t c = 0; c < cfgs.size(); ++c) {
        const auto t0 = std::chrono::steady_clock::now();
        po_step(models[c], ref, batch, cfgs[c].objective, cfgs[c].variant, cfgs[c].beta, opts[c]);
        out.step_seconds[c].push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      ++out.po_steps;
    }
  }
  return out;
}

std::string summary_row(const RunConfig& cfg, const RunOutcome& outcome) {
  std::ostringstream row;
  row << objective_name(cfg.objective) << ',' << variant_name(cfg.variant) << ','
      << cfg.variant.top_k << ',' << cfg.negatives << ',' << format_double(cfg.beta.beta0) << ','
      << format_double(cfg.beta.alpha) << ',' << format_double(cfg.beta.gamma) << ',' << cfg.seed
      << ',' << format_double(outcome.sft_hit_ratio_at_1) << ','
      << format_double(outcome.metrics.hit_ratio_at_1) << ','
      << format_double(outcome.metrics.reward_win_rate) << ','
      << format_double(outcome.metrics.mean_selected_negatives) << ','
      << format_double(outcome.final_po_loss) << ',' << outcome.po_steps;
  return row.str();
}

void write_run_outputs(const std::filesystem::path& run_dir, const RunConfig& cfg,
                       const RunOutcome& outcome) {
  std::filesystem::create_directories(run_dir);
  save_config(cfg, run_dir / "config.txt");
  save_checkpoint(outcome.reference, run_dir / "reference.ckpt");
  for (std::size_t e = 0; e < outcome.epoch_models.size(); ++e) {
    save_checkpoint(outcome.epoch_models[e], run_dir / ("po_epoch_" + std::to_string(e + 1) + ".ckpt"));
  }
  save_checkpoint(outcome.final_model, run_dir / "final.ckpt");

  std::ostringstream losses;
  write_epoch_losses_csv(outcome.metrics.epoch_losses, losses);
  write_text(run_dir / "epoch_losses.csv", losses.str());

  std::ostringstream curve;
  write_sb_curve_csv(outcome.metrics.sb_proportions, curve);
  write_text(run_dir / "sb_curve.csv", curve.str());

  std::ostringstream selections;
  selections << "epoch,mean_selected_negatives,violation_fraction,cluster_fraction,"
                "degenerate_fraction,unstaged_fraction\n";
  for (const EpochSelection& s : outcome.selections) {
    selections << s.epoch << ',' << format_double(s.mean_selected) << ','
               << format_double(s.violation_fraction) << ',' << format_double(s.cluster_fraction)
               << ',' << format_double(s.degenerate_fraction) << ','
               << format_double(s.unstaged_fraction) << '\n';
  }
  write_text(run_dir / "selections.csv", selections.str());

  write_text(run_dir / "summary.csv",
             std::string(kSummaryColumns) + "\n" + summary_row(cfg, outcome) + "\n");

  write_text(run_dir / "timing.csv", "po_steps,per_step_seconds\n" + std::to_string(outcome.po_steps) +
                                         "," + format_double(outcome.metrics.per_step_seconds) + "\n");
}

}  // namespace dynpo
