#pragma once

// Interaction logs, chronological splits, and sampled preference/evaluation
// instances.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dynpo/core.hpp"

namespace dynpo {

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

// Rows grouped by user (ascending) and ordered by timestamp within a user.
struct InteractionLog {
  std::vector<Interaction> rows;
  std::size_t vocab_size = 0;
  std::size_t user_count = 0;

  bool operator==(const InteractionLog&) const = default;
};

struct SyntheticConfig {
  std::size_t users = 500;
  std::size_t items = 200;
  std::size_t latent_dim = 8;
  std::size_t interactions_per_user = 30;
  double noise = 0.5;        // std of per-user Gaussian logit perturbation
  double temperature = 1.0;  // divides the latent affinity
  RngSeed seed{42};
};

void validate(const SyntheticConfig& cfg);

// Latent-factor users and items drawn from N(0, 1). Each user's sequence is
// a draw without replacement from softmax(u.v / temperature + noise * eps),
// produced in sampling order (Gumbel top-k); timestamps are positions.
InteractionLog generate_synthetic(const SyntheticConfig& cfg);

// CSV with header `user_id,item_id,timestamp`. Ids are densified to
// contiguous ranges in first-seen order; ids that already form a contiguous
// range from 0 are kept unchanged. Rows are stably sorted by (user, timestamp).
InteractionLog parse_csv(std::istream& in, const std::string& source_name = "<stream>");
InteractionLog ingest_csv(const std::filesystem::path& path);

// Same CSV format, rows sorted by (user, timestamp, item).
void write_csv(const InteractionLog& log, std::ostream& out);
void export_csv(const InteractionLog& log, const std::filesystem::path& path);

struct SplitEntry {
  Context context;
  ItemId positive = 0;
  std::size_t position = 0;  // index of the target in the user's sequence
};

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<SplitEntry> train;
  std::vector<SplitEntry> valid;
  std::vector<SplitEntry> test;
  std::size_t vocab_size = 0;
  std::size_t retained_users = 0;
  std::size_t dropped_users = 0;
  std::vector<std::vector<ItemId>> user_items;  // sorted full interaction set per user
  std::vector<double> item_counts;              // interactions per item
};

// Users with fewer than history_len + 3 interactions are dropped and counted.
// A user with T = n - history_len targets contributes max(1, floor(f_train*T))
// train targets, max(1, floor(f_test*T)) test targets, and the remainder to
// validation, in chronological order.
DatasetSplit chronological_split(const InteractionLog& log, std::size_t history_len,
                                 SplitFractions fractions = {});

enum class NegativeSampler {
  Uniform,
  Popularity,  // weight proportional to interaction count + 1
};

// k distinct negatives outside the user's interaction set (and != positive),
// drawn without replacement; deterministic per (seed, user, position).
PreferenceInstance sample_negatives(const SplitEntry& entry, const DatasetSplit& split,
                                    std::size_t k, RngSeed seed,
                                    NegativeSampler sampler = NegativeSampler::Uniform);

struct EvalCandidateSet {
  ItemId positive = 0;
  std::vector<ItemId> distractors;  // 20 distinct items, none equal to positive
};

inline constexpr std::size_t kEvalDistractors = 20;

EvalCandidateSet build_eval_candidates(const SplitEntry& entry, std::size_t vocab_size,
                                       RngSeed seed);

}  // namespace dynpo
