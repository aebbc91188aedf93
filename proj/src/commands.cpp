#include "dynpo/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace dynpo {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::size_t as_count(double v, std::string_view grid) {
  if (!(v >= 1.0) || std::floor(v) != v) {
    throw_invalid("grid '" + std::string(grid) + "' needs positive integer values, got " +
                  format_double(v));
  }
  return static_cast<std::size_t>(v);
}

double median_of(std::vector<double> samples) {
  if (samples.empty()) return 0.0;
  const auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  if (samples.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(samples.begin(), mid));
}

std::string csv_escape(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

}  // namespace

DatasetSplit load_split(const RunConfig& cfg) {
  if (cfg.data.empty()) throw Error(ErrorCode::Io, "no dataset configured (set data=<csv>)");
  if (!std::filesystem::exists(cfg.data)) throw Error(ErrorCode::Io, "dataset not found: " + cfg.data);
  return chronological_split(ingest_csv(cfg.data), cfg.history_len);
}

GenerateResult cmd_generate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  const SyntheticConfig synthetic = synthetic_config(cfg);
  const InteractionLog log = generate_synthetic(synthetic);
  std::filesystem::create_directories(out_dir);

  GenerateResult result;
  result.csv = out_dir / "interactions.csv";
  result.manifest = out_dir / "manifest.txt";
  result.rows = log.rows.size();
  export_csv(log, result.csv);

  std::ostringstream manifest;
  manifest << "seed = " << cfg.seed << '\n'
           << "users = " << synthetic.users << '\n'
           << "items = " << synthetic.items << '\n'
           << "latent_dim = " << synthetic.latent_dim << '\n'
           << "interactions_per_user = " << synthetic.interactions_per_user << '\n'
           << "noise = " << format_double(synthetic.noise) << '\n'
           << "temperature = " << format_double(synthetic.temperature) << '\n'
           << "rows = " << result.rows << '\n';
  write_file(result.manifest, manifest.str());
  return result;
}

std::string cmd_train(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  validate(cfg);
  const DatasetSplit split = load_split(cfg);
  const RunOutcome outcome = run_experiment(cfg, split, nullptr, run_dir);
  write_run_outputs(run_dir, cfg, outcome);
  return summary_row(cfg, outcome);
}

std::vector<SweepEntry> build_grid(const RunConfig& base, std::string_view grid,
                                   std::span<const double> values) {
  std::vector<SweepEntry> entries;
  auto add = [&](std::string label, auto&& edit) {
    RunConfig cfg = base;
    edit(cfg);
    entries.push_back({std::move(label), std::move(cfg)});
  };

  if (grid == "ksweep") {
    const std::vector<double> defaults{3, 5, 7, 9, 11, 13, 15};
    for (double v : values.empty() ? std::span<const double>(defaults) : values) {
      const std::size_t k = as_count(v, grid);
      for (const Variant& variant : {Variant::naive(), Variant::dynamic_po()}) {
        add("k" + std::to_string(k) + "_" + variant_name(variant), [&](RunConfig& c) {
          c.negatives = k;
          c.variant = variant;
        });
      }
    }
  } else if (grid == "ablation") {
    const std::pair<const char*, Variant> rows[] = {
        {"full", Variant::dynamic_po()},
        {"wo_stage1", Variant::without_stage1()},
        {"wo_stage2", Variant::without_stage2()},
        {"wo_stages", Variant::without_stages()},
        {"wo_beta", Variant::without_beta()},
    };
    for (const auto& [label, variant] : rows) {
      add(label, [&](RunConfig& c) { c.variant = variant; });
    }
  } else if (grid == "topk") {
    const std::vector<double> defaults{2, 3, 4};
    for (double v : values.empty() ? std::span<const double>(defaults) : values) {
      const std::size_t k = as_count(v, grid);
      add("topk" + std::to_string(k), [&](RunConfig& c) { c.variant = Variant::top_k_only(k); });
    }
    add("dynamicpo", [](RunConfig& c) { c.variant = Variant::dynamic_po(); });
  } else if (grid == "alpha" || grid == "gamma") {
    const bool alpha = grid == "alpha";
    const std::vector<double> defaults =
        alpha ? std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9} : std::vector<double>{2, 4, 6, 8, 10};
    for (double v : values.empty() ? std::span<const double>(defaults) : values) {
      add(std::string(grid) + format_double(v), [&](RunConfig& c) {
        c.variant = Variant::dynamic_po();
        (alpha ? c.beta.alpha : c.beta.gamma) = v;
      });
    }
  } else {
    throw_invalid("unknown grid '" + std::string(grid) +
                  "' (expected ksweep, ablation, topk, alpha, gamma)");
  }
  return entries;
}

std::filesystem::path cmd_sweep(const RunConfig& base, std::string_view grid,
                                std::span<const double> values,
                                const std::filesystem::path& out_dir, std::size_t jobs) {
  validate(base);
  const std::vector<SweepEntry> entries = build_grid(base, grid, values);
  const DatasetSplit split = load_split(base);
  // Grid axes never touch the supervised stage, so every entry shares it.
  const SftOutcome sft = run_sft(split, base);

  std::vector<std::string> rows(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const SweepEntry& entry = entries[i];
      const RunConfig& cfg = entry.config;
      std::ostringstream row;
      row << i << ',' << grid << ',' << entry.label << ',' << objective_name(cfg.objective) << ','
          << variant_name(cfg.variant) << ',' << cfg.variant.top_k << ',' << cfg.negatives << ','
          << format_double(cfg.beta.alpha) << ',' << format_double(cfg.beta.gamma) << ',';
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%02zu_", i);
      const auto run_dir = out_dir / "runs" / (prefix + entry.label);
      try {
        validate(cfg);
        const RunOutcome outcome = run_experiment(cfg, split, &sft, run_dir);
        write_run_outputs(run_dir, cfg, outcome);
        row << "ok," << format_double(outcome.sft_hit_ratio_at_1) << ','
            << format_double(outcome.metrics.hit_ratio_at_1) << ','
            << format_double(outcome.metrics.reward_win_rate) << ','
            << format_double(outcome.metrics.mean_selected_negatives) << ','
            << format_double(outcome.final_po_loss);
      } catch (const std::exception& e) {
        row << "error: " << csv_escape(e.what()) << ",,,,,";
      }
      rows[i] = row.str();
    }
  };

  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, entries.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::filesystem::create_directories(out_dir);
  std::string text = std::string(kSweepColumns) + "\n";
  for (const std::string& r : rows) text += r + "\n";
  const auto path = out_dir / "sweep.csv";
  write_file(path, text);
  return path;
}

TimingReport cmd_timing(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        std::size_t repeats) {
  validate(cfg);
  if (repeats == 0) throw_invalid("timing needs at least one repeat");
  const DatasetSplit split = load_split(cfg);
  const SftOutcome sft = run_sft(split, cfg);

  RunConfig naive = cfg;
  naive.variant = Variant::naive();
  RunConfig dynamic = cfg;
  dynamic.variant = Variant::dynamic_po();

  constexpr double kInf = std::numeric_limits<double>::infinity();
  TimingReport report;
  report.naive_seconds = report.dynamic_seconds = kInf;
  report.naive_mean_seconds = report.dynamic_mean_seconds = kInf;
  std::ostringstream csv;
  csv << "variant,repeat,po_steps,mean_step_seconds,median_step_seconds\n";
  // Alternate which variant steps first so neither always follows the other.
  for (std::size_t r = 0; r < repeats; ++r) {
    const bool naive_first = r % 2 == 0;
    const std::vector<RunConfig> pair =
        naive_first ? std::vector<RunConfig>{naive, dynamic} : std::vector<RunConfig>{dynamic, naive};
    const LockstepTiming timing = time_po_lockstep(pair, split, sft);
    report.po_steps = timing.po_steps;
    for (std::size_t c = 0; c < pair.size(); ++c) {
      const std::vector<double>& steps = timing.step_seconds[c];
      const double mean =
          std::accumulate(steps.begin(), steps.end(), 0.0) / static_cast<double>(steps.size());
      const double median = median_of(steps);
      const bool is_naive = (c == 0) == naive_first;
      double& best_median = is_naive ? report.naive_seconds : report.dynamic_seconds;
      double& best_mean = is_naive ? report.naive_mean_seconds : report.dynamic_mean_seconds;
      best_median = std::min(best_median, median);
      best_mean = std::min(best_mean, mean);
      csv << variant_name(pair[c].variant) << ',' << r << ',' << timing.po_steps << ','
          << format_double(mean) << ',' << format_double(median) << '\n';
    }
  }
  report.overhead = (report.dynamic_seconds - report.naive_seconds) / report.naive_seconds;

  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "timing.csv", csv.str());
  write_file(out_dir / "timing_summary.csv",
             "naive_median_step_seconds,dynamicpo_median_step_seconds,overhead_ratio,"
             "naive_mean_step_seconds,dynamicpo_mean_step_seconds\n" +
                 format_double(report.naive_seconds) + "," + format_double(report.dynamic_seconds) +
                 "," + format_double(report.overhead) + "," +
                 format_double(report.naive_mean_seconds) + "," +
                 format_double(report.dynamic_mean_seconds) + "\n");
  return report;
}

EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                    const std::optional<std::filesystem::path>& reference) {
  validate(cfg);
  const DatasetSplit split = load_split(cfg);
  const PolicyModel model = load_checkpoint(checkpoint);
  if (model.vocab_size() != split.vocab_size) {
    throw_invalid("checkpoint vocabulary (" + std::to_string(model.vocab_size()) +
                  ") does not match the dataset (" + std::to_string(split.vocab_size) + ")");
  }
  EvalReport report;
  report.hit_ratio_at_1 = hit_ratio_at_1(model, ranking_cases(split, cfg));
  if (reference) {
    const ReferenceModel ref(load_checkpoint(*reference));
    report.reward_win_rate =
        reward_win_rate(model, ref, win_rate_instances(split, cfg), cfg.beta.beta0);
  }
  return report;
}

}  // namespace dynpo
