#include "dynpo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace dynpo {

namespace {

// Sub-stream tags for derive_seed.
constexpr std::uint64_t kUserFactors = 1;
constexpr std::uint64_t kItemFactors = 2;
constexpr std::uint64_t kSequences = 3;
constexpr std::uint64_t kNegatives = 4;
constexpr std::uint64_t kCandidates = 5;

}  // namespace

void validate(const SyntheticConfig& cfg) {
  if (cfg.users == 0 || cfg.items == 0 || cfg.latent_dim == 0 || cfg.interactions_per_user == 0) {
    throw_invalid("synthetic counts must be positive");
  }
  if (cfg.interactions_per_user > cfg.items) {
    throw_invalid("interactions_per_user cannot exceed the item count");
  }
  if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise)) throw_invalid("noise must be >= 0");
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw_invalid("temperature must be positive");
  }
}

InteractionLog generate_synthetic(const SyntheticConfig& cfg) {
  validate(cfg);
  const std::size_t dim = cfg.latent_dim;
  std::vector<double> users(cfg.users * dim);
  std::vector<double> items(cfg.items * dim);
  {
    Rng rng(derive_seed(cfg.seed, {kUserFactors}));
    for (double& x : users) x = rng.normal();
  }
  {
    Rng rng(derive_seed(cfg.seed, {kItemFactors}));
    for (double& x : items) x = rng.normal();
  }

  InteractionLog log;
  log.vocab_size = cfg.items;
  log.user_count = cfg.users;
  log.rows.reserve(cfg.users * cfg.interactions_per_user);
  std::vector<double> keys(cfg.items);
  std::vector<ItemId> order(cfg.items);
  for (std::size_t u = 0; u < cfg.users; ++u) {
    Rng rng(derive_seed(cfg.seed, {kSequences, u}));
    const double* uf = users.data() + u * dim;
    for (std::size_t i = 0; i < cfg.items; ++i) {
      const double* vf = items.data() + i * dim;
      double affinity = 0.0;
      for (std::size_t d = 0; d < dim; ++d) affinity += uf[d] * vf[d];
      const double logit = affinity / cfg.temperature + cfg.noise * rng.normal();
      // Gumbel(0, 1) perturbation from u in the open interval (0, 1).
      const double draw = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
      const double gumbel = -std::log(-std::log(draw));
      keys[i] = logit + gumbel;
    }
    std::iota(order.begin(), order.end(), ItemId{0});
    std::partial_sort(order.begin(), order.begin() + cfg.interactions_per_user, order.end(),
                      [&](ItemId a, ItemId b) { return keys[a] > keys[b] || (keys[a] == keys[b] && a < b); });
    for (std::size_t t = 0; t < cfg.interactions_per_user; ++t) {
      log.rows.push_back({static_cast<UserId>(u), order[t], static_cast<std::int64_t>(t)});
    }
  }
  return log;
}

namespace {

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::int64_t parse_field(std::string_view field, const std::string& where) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw Error(ErrorCode::Parse, where + ": non-integer field '" + std::string(field) + "'");
  }
  return value;
}

// Maps raw ids to dense ids: identity when they already cover 0..n-1,
// otherwise first-seen order.
std::vector<std::uint32_t> densify(const std::vector<std::int64_t>& raw, std::size_t& count) {
  std::unordered_map<std::int64_t, std::uint32_t> first_seen;
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  for (std::int64_t id : raw) {
    if (first_seen.emplace(id, static_cast<std::uint32_t>(first_seen.size())).second) {
      lo = first_seen.size() == 1 ? id : std::min(lo, id);
      hi = first_seen.size() == 1 ? id : std::max(hi, id);
    }
  }
  count = first_seen.size();
  const bool already_dense =
      count > 0 && lo == 0 && hi == static_cast<std::int64_t>(count) - 1;
  std::vector<std::uint32_t> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = already_dense ? static_cast<std::uint32_t>(raw[i]) : first_seen.at(raw[i]);
  }
  return out;
}

}  // namespace

InteractionLog parse_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::int64_t> raw_users, raw_items, stamps;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (!have_header) {
      if (view != "user_id,item_id,timestamp") {
        throw Error(ErrorCode::Parse, where + ": expected header 'user_id,item_id,timestamp'");
      }
      have_header = true;
      continue;
    }
    if (view.empty()) continue;
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const std::size_t comma = view.find(',', start);
      fields.push_back(view.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 3) {
      throw Error(ErrorCode::Parse, where + ": malformed row, expected 3 comma-separated fields");
    }
    raw_users.push_back(parse_field(fields[0], where));
    raw_items.push_back(parse_field(fields[1], where));
    stamps.push_back(parse_field(fields[2], where));
  }
  if (!have_header) throw Error(ErrorCode::Parse, source_name + ": empty file, missing header");

  InteractionLog log;
  const auto users = densify(raw_users, log.user_count);
  const auto items = densify(raw_items, log.vocab_size);
  log.rows.resize(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) log.rows[i] = {users[i], items[i], stamps[i]};
  std::stable_sort(log.rows.begin(), log.rows.end(), [](const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.timestamp < b.timestamp;
  });
  return log;
}

InteractionLog ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path.string());
  return parse_csv(in, path.string());
}

void write_csv(const InteractionLog& log, std::ostream& out) {
  std::vector<Interaction> rows = log.rows;
  std::sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.item < b.item;
  });
  out << "user_id,item_id,timestamp\n";
  for (const Interaction& r : rows) out << r.user << ',' << r.item << ',' << r.timestamp << '\n';
}

void export_csv(const InteractionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write dataset " + path.string());
  write_csv(log, out);
  if (!out) throw Error(ErrorCode::Io, "failed writing dataset " + path.string());
}

DatasetSplit chronological_split(const InteractionLog& log, std::size_t history_len,
                                 SplitFractions fractions) {
  if (history_len == 0) throw_invalid("history_len must be positive");
  if (!(fractions.train > 0.0 && fractions.valid >= 0.0 && fractions.test > 0.0) ||
      std::abs(fractions.train + fractions.valid + fractions.test - 1.0) > 1e-9) {
    throw_invalid("split fractions must be positive and sum to 1");
  }
  DatasetSplit split;
  split.vocab_size = log.vocab_size;
  split.user_items.resize(log.user_count);
  split.item_counts.assign(log.vocab_size, 0.0);

  std::size_t begin = 0;
  while (begin < log.rows.size()) {
    std::size_t end = begin;
    const UserId user = log.rows[begin].user;
    while (end < log.rows.size() && log.rows[end].user == user) ++end;

    std::vector<ItemId> sequence;
    for (std::size_t i = begin; i < end; ++i) {
      sequence.push_back(log.rows[i].item);
      split.item_counts.at(log.rows[i].item) += 1.0;
    }
    std::vector<ItemId>& owned = split.user_items.at(user);
    owned = sequence;
    std::sort(owned.begin(), owned.end());
    owned.erase(std::unique(owned.begin(), owned.end()), owned.end());

    if (sequence.size() < history_len + 3) {
      ++split.dropped_users;
    } else {
      ++split.retained_users;
      const std::size_t targets = sequence.size() - history_len;
      const double t = static_cast<double>(targets);
      const std::size_t n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fractions.train * t)));
      const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fractions.test * t)));
      const std::size_t n_valid = targets - std::min(targets, n_train + n_test);
      for (std::size_t j = 0; j < targets; ++j) {
        const std::size_t pos = history_len + j;
        SplitEntry entry;
        entry.context.user = user;
        entry.context.history.assign(sequence.begin() + static_cast<std::ptrdiff_t>(pos - history_len),
                                     sequence.begin() + static_cast<std::ptrdiff_t>(pos));
        entry.positive = sequence[pos];
        entry.position = pos;
        if (j < n_train) {
          split.train.push_back(std::move(entry));
        } else if (j < n_train + n_valid) {
          split.valid.push_back(std::move(entry));
        } else {
          split.test.push_back(std::move(entry));
        }
      }
    }
    begin = end;
  }
  return split;
}

PreferenceInstance sample_negatives(const SplitEntry& entry, const DatasetSplit& split,
                                    std::size_t k, RngSeed seed, NegativeSampler sampler) {
  if (k == 0) throw_invalid("number of negatives must be positive");
  if (entry.context.user >= split.user_items.size()) throw_invalid("unknown user");
  const std::vector<ItemId>& owned = split.user_items[entry.context.user];
  std::vector<ItemId> eligible;
  eligible.reserve(split.vocab_size);
  for (ItemId item = 0; item < split.vocab_size; ++item) {
    if (item != entry.positive && !std::binary_search(owned.begin(), owned.end(), item)) {
      eligible.push_back(item);
    }
  }
  if (eligible.size() < k) {
    throw_invalid("only " + std::to_string(eligible.size()) + " eligible negatives for user " +
                  std::to_string(entry.context.user) + ", need " + std::to_string(k));
  }

  Rng rng(derive_seed(seed, {kNegatives, entry.context.user, entry.position}));
  PreferenceInstance instance{entry.context, entry.positive, {}};
  if (sampler == NegativeSampler::Uniform) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
      std::swap(eligible[i], eligible[j]);
    }
    instance.negatives.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    // Efraimidis-Spirakis: keep the k largest log(u) / w.
    std::vector<std::pair<double, ItemId>> keyed;
    keyed.reserve(eligible.size());
    for (ItemId item : eligible) {
      const double w = split.item_counts.at(item) + 1.0;
      const double u = 1.0 - rng.uniform();  // (0, 1]
      keyed.emplace_back(std::log(u) / w, item);
    }
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k), keyed.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });
    for (std::size_t i = 0; i < k; ++i) instance.negatives.push_back(keyed[i].second);
  }
  return instance;
}

EvalCandidateSet build_eval_candidates(const SplitEntry& entry, std::size_t vocab_size,
                                       RngSeed seed) {
  if (vocab_size <= kEvalDistractors + 1) {
    throw_invalid("evaluation needs a vocabulary larger than " +
                  std::to_string(kEvalDistractors + 1) + " items");
  }
  if (entry.positive >= vocab_size) throw_invalid("positive item outside vocabulary");
  Rng rng(derive_seed(seed, {kCandidates, entry.context.user, entry.position}));
  EvalCandidateSet out;
  out.positive = entry.positive;
  // Rejection sampling; the vocabulary is much larger than 21 in practice.
  std::vector<bool> taken(vocab_size, false);
  taken[entry.positive] = true;
  while (out.distractors.size() < kEvalDistractors) {
    const auto item = static_cast<ItemId>(rng.below(vocab_size));
    if (taken[item]) continue;
    taken[item] = true;
    out.distractors.push_back(item);
  }
  return out;
}

}  // namespace dynpo
