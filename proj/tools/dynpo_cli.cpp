// dynpo command-line tool. Every RunConfig key is available as --<key> on each
// subcommand; values given on the command line override --config.

#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dynpo/dynpo.h"

namespace {

constexpr int kUsageExit = 64;

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

int report_failure(const char* code, const std::string& message, int exit_code) {
  std::fprintf(stderr, "error code=%s message=%s\n", code, quoted(message).c_str());
  return exit_code;
}

int report(dynpo_status status) {
  return report_failure(dynpo_status_name(status), dynpo_last_error(), static_cast<int>(status));
}

struct ConfigHandle {
  std::unique_ptr<dynpo_config, decltype(&dynpo_config_destroy)> ptr{nullptr,
                                                                     &dynpo_config_destroy};
};

struct Subcommand {
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(Subcommand& sub) {
  sub.app->add_option("--config", sub.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  for (std::size_t i = 0; i < dynpo_config_key_count(); ++i) {
    const std::string key = dynpo_config_key_name(i);
    sub.app->add_option("--" + key, sub.overrides[key], dynpo_config_key_help(i));
  }
}

dynpo_status build_config(const Subcommand& sub, const CLI::App& app, ConfigHandle& cfg) {
  dynpo_config* raw = nullptr;
  if (dynpo_status s = dynpo_config_create(&raw); s != DYNPO_OK) return s;
  cfg.ptr.reset(raw);
  if (!sub.config_path.empty()) {
    if (dynpo_status s = dynpo_config_load(raw, sub.config_path.c_str()); s != DYNPO_OK) return s;
  }
  // Apply in key order so that `variant` lands before `top_k`.
  for (std::size_t i = 0; i < dynpo_config_key_count(); ++i) {
    const std::string key = dynpo_config_key_name(i);
    if (app.count("--" + key) == 0) continue;
    if (dynpo_status s = dynpo_config_set(raw, key.c_str(), sub.overrides.at(key).c_str());
        s != DYNPO_OK) {
      return s;
    }
  }
  return dynpo_config_validate(raw);
}

std::string config_value(const dynpo_config* cfg, const char* key) {
  std::size_t len = 0;
  dynpo_config_get(cfg, key, nullptr, 0, &len);
  std::string out(len + 1, '\0');
  dynpo_config_get(cfg, key, out.data(), out.size(), &len);
  out.resize(len);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynpo: preference optimization with dynamic negative selection"};
  app.set_version_flag("--version", std::string(dynpo_version()));
  app.require_subcommand(1);

  Subcommand generate{app.add_subcommand("generate", "write a synthetic interaction log")};
  Subcommand train{app.add_subcommand("train", "SFT then preference optimization")};
  Subcommand sweep{app.add_subcommand("sweep", "run a grid of training configurations")};
  Subcommand timing{app.add_subcommand("timing", "per-step cost of naive vs dynamicpo")};
  Subcommand eval{app.add_subcommand("eval", "evaluate a checkpoint on the test split")};
  for (Subcommand* sub : {&generate, &train, &sweep, &timing, &eval}) add_config_flags(*sub);

  std::string grid;
  std::vector<double> values;
  std::size_t jobs = 1;
  sweep.app->add_option("--grid", grid, "ksweep | ablation | topk | alpha | gamma")->required();
  sweep.app->add_option("--values", values, "grid values (default: the grid's own)")
      ->delimiter(',');
  sweep.app->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  std::size_t repeats = 3;
  timing.app->add_option("--repeats", repeats, "alternated repeats per variant")
      ->check(CLI::PositiveNumber);

  std::string checkpoint;
  std::optional<std::string> reference;
  eval.app->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  eval.app->add_option("--reference", reference, "reference checkpoint (enables win rate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_failure("usage", e.what(), kUsageExit);
  }

  Subcommand* active = nullptr;
  for (Subcommand* sub : {&generate, &train, &sweep, &timing, &eval}) {
    if (sub->app->parsed()) active = sub;
  }
  ConfigHandle cfg;
  if (dynpo_status s = build_config(*active, *active->app, cfg); s != DYNPO_OK) return report(s);
  const dynpo_config* c = cfg.ptr.get();
  const std::string out = config_value(c, "out");

  if (active == &generate) {
    std::size_t rows = 0;
    if (dynpo_status s = dynpo_generate(c, out.c_str(), &rows); s != DYNPO_OK) return report(s);
    std::printf("wrote %s/interactions.csv (%zu rows)\n", out.c_str(), rows);
  } else if (active == &train) {
    std::size_t len = 0;
    std::string row(4096, '\0');
    dynpo_status s = dynpo_train(c, out.c_str(), row.data(), row.size(), &len);
    if (s != DYNPO_OK) return report(s);
    row.resize(len);
    std::printf("%s\n", row.c_str());
  } else if (active == &sweep) {
    dynpo_status s = dynpo_sweep(c, grid.c_str(), values.data(), values.size(), out.c_str(), jobs);
    if (s != DYNPO_OK) return report(s);
    std::printf("wrote %s/sweep.csv\n", out.c_str());
  } else if (active == &timing) {
    dynpo_timing_report r{};
    if (dynpo_status s = dynpo_timing(c, out.c_str(), repeats, &r); s != DYNPO_OK) return report(s);
    std::printf("naive_median_step_seconds=%.9g dynamicpo_median_step_seconds=%.9g "
                "overhead=%.4f naive_mean_step_seconds=%.9g dynamicpo_mean_step_seconds=%.9g\n",
                r.naive_seconds, r.dynamic_seconds, r.overhead, r.naive_mean_seconds,
                r.dynamic_mean_seconds);
  } else {
    dynpo_eval_report r{};
    dynpo_status s = dynpo_eval(c, checkpoint.c_str(), reference ? reference->c_str() : nullptr, &r);
    if (s != DYNPO_OK) return report(s);
    std::printf("hit_ratio_at_1=%.6f", r.hit_ratio_at_1);
    if (r.has_win_rate) std::printf(" reward_win_rate=%.6f", r.reward_win_rate);
    std::printf("\n");
  }
  return 0;
}
