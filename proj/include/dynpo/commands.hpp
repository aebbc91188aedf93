#pragma once

// Command implementations behind the C API and the command-line tool.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynpo/config.hpp"
#include "dynpo/data.hpp"
#include "dynpo/experiment.hpp"

namespace dynpo {

// Reads cfg.data and splits it. Missing dataset -> ErrorCode::Io.
DatasetSplit load_split(const RunConfig& cfg);

struct GenerateResult {
  std::filesystem::path csv;
  std::filesystem::path manifest;
  std::size_t rows = 0;
};

// Writes <out_dir>/interactions.csv and <out_dir>/manifest.txt.
GenerateResult cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Full run into `run_dir`; returns the summary.csv data row.
std::string cmd_train(const RunConfig& cfg, const std::filesystem::path& run_dir);

struct SweepEntry {
  std::string label;
  RunConfig config;
};

// Grids: ksweep (values = negative counts, each with naive and dynamicpo),
// ablation (values ignored), topk (values = K, plus dynamicpo), alpha, gamma.
// Empty `values` selects the grid's defaults.
std::vector<SweepEntry> build_grid(const RunConfig& base, std::string_view grid,
                                   std::span<const double> values);

inline constexpr const char* kSweepColumns =
    "row,grid,label,objective,variant,top_k,negatives,alpha,gamma,status,sft_hit_ratio_at_1,"
    "hit_ratio_at_1,reward_win_rate,mean_selected_negatives,final_po_loss";

// Runs every grid entry (jobs worker threads) into <out_dir>/runs/ and writes
// <out_dir>/sweep.csv. A failing entry is recorded in its row's status column
// and the sweep continues. Returns the path of sweep.csv.
std::filesystem::path cmd_sweep(const RunConfig& base, std::string_view grid,
                                std::span<const double> values,
                                const std::filesystem::path& out_dir, std::size_t jobs = 1);

struct TimingReport {
  // Per PO step: the median over a run's steps, best run of the repeats.
  // Medians keep scheduler hiccups on a shared machine out of the ratio.
  double naive_seconds = 0.0;
  double dynamic_seconds = 0.0;
  double overhead = 0.0;  // (dynamic - naive) / naive
  double naive_mean_seconds = 0.0;    // per-step mean, best run
  double dynamic_mean_seconds = 0.0;  // per-step mean, best run
  std::size_t po_steps = 0;
};

// Naive and DynamicPO with identical seeds, trained in lockstep (see
// time_po_lockstep) `repeats` times.
// Writes <out_dir>/timing.csv (one row per run) and timing_summary.csv.
TimingReport cmd_timing(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        std::size_t repeats = 3);

struct EvalReport {
  double hit_ratio_at_1 = 0.0;
  std::optional<double> reward_win_rate;
};

EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                    const std::optional<std::filesystem::path>& reference = std::nullopt);

}  // namespace dynpo
