#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "dynpo/core.hpp"

using namespace dynpo;

namespace {

LikelihoodRecord record(double pt, double pr, std::vector<double> nt, std::vector<double> nr) {
  LikelihoodRecord r;
  r.pos_theta = pt;
  r.pos_ref = pr;
  r.neg_theta = std::move(nt);
  r.neg_ref = std::move(nr);
  return r;
}

}  // namespace

TEST_CASE("log_ratios subtracts the reference") {
  const LogRatioSet zero = log_ratios(record(-1, -1, {-2}, {-2}));
  CHECK(zero.r_pos == 0.0);
  CHECK(zero.r_neg == std::vector<double>{0.0});

  const LogRatioSet r = log_ratios(record(-1, -2, {-3}, {-1}));
  CHECK(r.r_pos == 1.0);
  CHECK(r.r_neg == std::vector<double>{-2.0});
}

TEST_CASE("log_ratios ignores a common shift") {
  Rng rng(RngSeed{7});
  for (int t = 0; t < 200; ++t) {
    LikelihoodRecord a = record(-rng.uniform() * 5, -rng.uniform() * 5, {}, {});
    for (int i = 0; i < 4; ++i) {
      a.neg_theta.push_back(-rng.uniform() * 5);
      a.neg_ref.push_back(-rng.uniform() * 5);
    }
    // 0.25 keeps the shifted values exact for these magnitudes.
    LikelihoodRecord b = a;
    b.pos_theta -= 0.25;
    b.pos_ref -= 0.25;
    for (int i = 0; i < 4; ++i) {
      b.neg_theta[i] -= 0.25;
      b.neg_ref[i] -= 0.25;
    }
    const LogRatioSet ra = log_ratios(a), rb = log_ratios(b);
    CHECK(ra.r_pos == doctest::Approx(rb.r_pos).epsilon(1e-14));
    for (int i = 0; i < 4; ++i) CHECK(ra.r_neg[i] == doctest::Approx(rb.r_neg[i]).epsilon(1e-14));
  }
}

TEST_CASE("likelihood_gaps uses theta only") {
  CHECK(likelihood_gaps(record(-1, 0, {-1, -4}, {0, 0})) == std::vector<double>{0, 3});
  CHECK(likelihood_gaps(record(-2, 0, {-1}, {0})) == std::vector<double>{-1});
  CHECK(likelihood_gaps(record(-3, -9, {-3, -3}, {5, -5})) == std::vector<double>{0, 0});
}

TEST_CASE("record validation") {
  CHECK_NOTHROW(validate(record(-1, -1, {-2}, {-2})));
  CHECK_THROWS_AS(validate(record(-1, -1, {-2, -3}, {-2})), Error);
  try {
    validate(record(std::numeric_limits<double>::quiet_NaN(), -1, {-2}, {-2}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numerical);
  }
}

TEST_CASE("instance validation") {
  PreferenceInstance inst{{0, {1, 2}}, 3, {4, 5}};
  CHECK_NOTHROW(validate(inst, 6));
  CHECK_THROWS_AS(validate(inst, 5), Error);
  inst.negatives = {4, 3};
  CHECK_THROWS_AS(validate(inst, 6), Error);
  inst.negatives = {4, 4};
  CHECK_THROWS_AS(validate(inst, 6), Error);
  inst.negatives = {4};
  inst.context.history.clear();
  CHECK_THROWS_AS(validate(inst, 6), Error);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.0, 1e21}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(6.0) == "6");
}

TEST_CASE("Rng is reproducible and seed-sensitive") {
  Rng a(RngSeed{42}), b(RngSeed{42}), c(RngSeed{43});
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("derive_seed separates streams") {
  const RngSeed base{42};
  CHECK(derive_seed(base, {1, 2}) == derive_seed(base, {1, 2}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 50; ++i) {
    seen.insert(derive_seed(base, {i}).value);
    seen.insert(derive_seed(base, {0, i}).value);
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("Rng distributions") {
  Rng rng(RngSeed{1});
  constexpr int n = 200000;
  double sum = 0.0, sq = 0.0;
  int counts[7] = {};
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    ++counts[rng.below(7)];
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int c : counts) CHECK(std::abs(c - n / 7.0) < 5.0 * std::sqrt(n / 7.0));
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(RngSeed{3});
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 10);
}
