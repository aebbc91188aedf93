#include "dynpo/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <unordered_set>

namespace dynpo {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter:
      return "invalid_parameter";
    case ErrorCode::Parse:
      return "parse";
    case ErrorCode::Io:
      return "io";
    case ErrorCode::Numerical:
      return "numerical";
  }
  return "unknown";
}

void throw_invalid(const std::string& message) {
  throw Error(ErrorCode::InvalidParameter, message);
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

void validate(const PreferenceInstance& instance, std::size_t vocab_size) {
  if (instance.context.history.empty()) throw_invalid("context history is empty");
  if (instance.negatives.empty()) throw_invalid("instance has no negatives");
  auto check_item = [vocab_size](ItemId item) {
    if (item >= vocab_size) {
      throw_invalid("item " + std::to_string(item) + " outside vocabulary of " +
                    std::to_string(vocab_size));
    }
  };
  for (ItemId item : instance.context.history) check_item(item);
  check_item(instance.positive);
  std::unordered_set<ItemId> seen;
  for (ItemId item : instance.negatives) {
    check_item(item);
    if (item == instance.positive) throw_invalid("positive item appears among negatives");
    if (!seen.insert(item).second) throw_invalid("duplicate negative item");
  }
}

void validate(const LikelihoodRecord& record) {
  if (record.neg_theta.size() != record.neg_ref.size()) {
    throw_invalid("likelihood record has mismatched negative lists");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(record.pos_theta) || !finite(record.pos_ref) ||
      !std::all_of(record.neg_theta.begin(), record.neg_theta.end(), finite) ||
      !std::all_of(record.neg_ref.begin(), record.neg_ref.end(), finite)) {
    throw Error(ErrorCode::Numerical, "likelihood record has non-finite entries");
  }
}

LogRatioSet log_ratios(const LikelihoodRecord& record) {
  LogRatioSet out;
  out.r_pos = record.pos_theta - record.pos_ref;
  out.r_neg.resize(record.k());
  for (std::size_t i = 0; i < record.k(); ++i) {
    out.r_neg[i] = record.neg_theta[i] - record.neg_ref[i];
  }
  return out;
}

std::vector<double> likelihood_gaps(const LikelihoodRecord& record) {
  std::vector<double> gaps(record.k());
  for (std::size_t i = 0; i < record.k(); ++i) {
    gaps[i] = record.pos_theta - record.neg_theta[i];
  }
  return gaps;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngSeed derive_seed(RngSeed base, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t state = mix64(base.value);
  for (std::uint64_t tag : path) state = mix64(state ^ mix64(tag + 0x632be59bd9b4e019ULL));
  return RngSeed{state};
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw_invalid("Rng::below requires a positive bound");
  // Rejection on the largest multiple of bound.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return draw % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

}  // namespace dynpo
