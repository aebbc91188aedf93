#pragma once

// Shared domain types, the seeded random stream, and log-ratio arithmetic.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynpo {

enum class ErrorCode {
  InvalidParameter,
  Parse,
  Io,
  Numerical,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void throw_invalid(const std::string& message);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

using ItemId = std::uint32_t;
using UserId = std::uint32_t;

struct Context {
  UserId user = 0;
  std::vector<ItemId> history;  // most recent last
};

struct PreferenceInstance {
  Context context;
  ItemId positive = 0;
  std::vector<ItemId> negatives;

  std::size_t k() const noexcept { return negatives.size(); }
};

// Throws InvalidParameter when the instance breaks its invariants for a
// vocabulary of `vocab_size` items.
void validate(const PreferenceInstance& instance, std::size_t vocab_size);

// Per-candidate natural-log likelihoods under the trained policy (theta) and
// the frozen reference.
struct LikelihoodRecord {
  double pos_theta = 0.0;
  double pos_ref = 0.0;
  std::vector<double> neg_theta;
  std::vector<double> neg_ref;

  std::size_t k() const noexcept { return neg_theta.size(); }
};

void validate(const LikelihoodRecord& record);

struct LogRatioSet {
  double r_pos = 0.0;
  std::vector<double> r_neg;

  std::size_t k() const noexcept { return r_neg.size(); }
};

LogRatioSet log_ratios(const LikelihoodRecord& record);

// pos_theta - neg_theta[i]; reference likelihoods are not consulted.
std::vector<double> likelihood_gaps(const LikelihoodRecord& record);

struct RngSeed {
  std::uint64_t value = 0;

  bool operator==(const RngSeed&) const = default;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Derives an independent child seed for a named sub-stream, e.g.
// derive_seed(run_seed, {kNegativeStream, epoch, user, position}).
RngSeed derive_seed(RngSeed base, std::initializer_list<std::uint64_t> path) noexcept;

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distributions are implemented here
// because the standard library's are implementation-defined.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(mix64(seed.value)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, bound), unbiased.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via the polar Box-Muller method.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dynpo
