#pragma once

// Run configuration and its flat `key = value` text format.
//
// One key per line, `#` starts a comment, blank lines are ignored. Keys not
// listed in config_keys() are rejected. Serialization writes every key in
// config_keys() order, so a written file reloads to an identical config.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dynpo/beta.hpp"
#include "dynpo/data.hpp"
#include "dynpo/losses.hpp"
#include "dynpo/preference.hpp"

namespace dynpo {

struct RunConfig {
  std::string data;  // interaction CSV; required by train, sweep, timing, eval
  SyntheticConfig synthetic;  // used by generate; its seed mirrors `seed`
  std::size_t history_len = 10;
  std::size_t dim = 8;
  std::size_t sft_epochs = 5;
  std::size_t po_epochs = 3;
  std::size_t negatives = 15;
  Objective objective = Objective::Dmpo;
  Variant variant = Variant::dynamic_po();
  BetaConfig beta;
  double sft_lr = 1e-3;
  double po_lr = 1e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  bool fixed_negatives = false;
  NegativeSampler negative_sampler = NegativeSampler::Uniform;
  double sb_threshold = 0.0;
  std::size_t sb_probe = 512;  // instances tracked for the S/B curve
  double sb_interval = 0.2;    // checkpoint spacing as a fraction of PO steps
  std::string out = "runs/default";

  RngSeed run_seed() const noexcept { return RngSeed{seed}; }
};

void validate(const RunConfig& cfg);

struct ConfigKey {
  std::string_view name;
  std::string_view help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;  // throws Parse/InvalidParameter
};

const std::vector<ConfigKey>& config_keys();

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

RunConfig parse_config(std::istream& in, const std::string& source_name = "<stream>");
void apply_config(RunConfig& cfg, std::istream& in, const std::string& source_name = "<stream>");
RunConfig load_config(const std::filesystem::path& path);
void write_config(const RunConfig& cfg, std::ostream& out);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace dynpo
