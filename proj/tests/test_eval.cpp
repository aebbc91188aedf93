#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dynpo/eval.hpp"

using namespace dynpo;

namespace {

std::vector<RankingCase> cases_for(std::size_t count, std::size_t vocab, std::uint64_t seed) {
  std::vector<RankingCase> out;
  Rng rng(RngSeed{seed});
  for (std::size_t i = 0; i < count; ++i) {
    const SplitEntry e{{0, {ItemId(rng.below(vocab)), ItemId(rng.below(vocab))}},
                       ItemId(rng.below(vocab)), 2};
    out.push_back({e.context, build_eval_candidates(e, vocab, RngSeed{seed * 1000003 + i})});
  }
  return out;
}

// A model whose score for item `favorite` is `lead` above every other item.
PolicyModel favoring(std::size_t vocab, ItemId favorite, double lead) {
  PolicyModel m(vocab, 1);
  for (ItemId i = 0; i < vocab; ++i) m.input_row(i)[0] = 1.0;
  m.output_row(favorite)[0] = lead;
  return m;
}

}  // namespace

TEST_CASE("hit ratio tie rule and oracle model") {
  const auto cases = cases_for(50, 40, 1);
  CHECK(hit_ratio_at_1(PolicyModel(40, 3), cases) == 0.0);

  std::vector<RankingCase> fixed = cases;
  for (RankingCase& c : fixed) {
    c.candidates = build_eval_candidates({c.context, 7, 2}, 40, RngSeed{3});
  }
  CHECK(hit_ratio_at_1(favoring(40, 7, 10.0), fixed) == 1.0);
  CHECK(hit_ratio_at_1(favoring(40, 8, 10.0), fixed) == 0.0);
  CHECK_THROWS_AS(hit_ratio_at_1(PolicyModel(40, 3), std::vector<RankingCase>{}), Error);
}

TEST_CASE("random model hits about one in 21") {
  const auto cases = cases_for(10000, 200, 2);
  const double hr = hit_ratio_at_1(PolicyModel::random(200, 8, RngSeed{4}, 1.0), cases);
  CHECK(std::abs(hr - 1.0 / 21.0) < 0.01);
}

TEST_CASE("reward win rate") {
  const PolicyModel base = PolicyModel::random(30, 4, RngSeed{1});
  const ReferenceModel ref(base);
  std::vector<PreferenceInstance> inst{{{0, {1, 2}}, 3, {4, 5, 6}}, {{0, {7}}, 8, {9, 10}}};
  CHECK(reward_win_rate(base, ref, inst) == 0.0);

  // Positive ratio +5, all negatives -5: every instance wins.
  const ReferenceModel flat(PolicyModel(30, 1));
  PolicyModel tuned(30, 1);
  for (ItemId i = 0; i < 30; ++i) tuned.input_row(i)[0] = 1.0;
  tuned.output_row(3)[0] = 5.0;
  tuned.output_row(8)[0] = 5.0;
  for (ItemId n : {4, 5, 6, 9, 10}) tuned.output_row(n)[0] = -5.0;
  CHECK(reward_win_rate(tuned, flat, inst) == 1.0);
  CHECK(reward_win_rate(tuned, flat, inst, 0.01) == 1.0);
  CHECK_THROWS_AS(reward_win_rate(base, ref, std::vector<PreferenceInstance>{}), Error);
}

TEST_CASE("metrics ignore a positive rescaling of beta0") {
  const ReferenceModel ref(PolicyModel::random(40, 4, RngSeed{2}));
  const PolicyModel m = PolicyModel::random(40, 4, RngSeed{3});
  std::vector<PreferenceInstance> inst;
  Rng rng(RngSeed{5});
  for (int i = 0; i < 300; ++i) {
    inst.push_back({{0, {ItemId(rng.below(10))}}, ItemId(10 + rng.below(10)), {20, 21, 22, 23, 24}});
  }
  const double w = reward_win_rate(m, ref, inst, 1.0);
  CHECK(w > 0.0);
  for (double b : {0.1, 0.5, 3.0, 100.0}) CHECK(reward_win_rate(m, ref, inst, b) == w);
}

TEST_CASE("sb proportion curve") {
  LikelihoodRecord far{0, 0, {-5, -6, -7}, {0, 0, 0}};
  LikelihoodRecord mixed{-2, 0, {-1, -2, -9}, {0, 0, 0}};
  const std::vector<SbCheckpoint> zeros{{0.0, {far, far}}, {0.5, {far}}, {1.0, {far}}};
  const auto flat = sb_proportion_curve(zeros);
  REQUIRE(flat.size() == 3);
  for (const SbPoint& p : flat) {
    CHECK(p.b_fraction == 0.0);
    CHECK(p.s_fraction == 1.0);
  }
  CHECK(flat[0].progress < flat[1].progress);

  const std::vector<SbCheckpoint> cps{{0.0, {far, mixed}}, {1.0, {mixed}}};
  const auto curve = sb_proportion_curve(cps);
  CHECK(curve[0].b_fraction == doctest::Approx(2.0 / 6.0));
  CHECK(curve[1].b_fraction == doctest::Approx(2.0 / 3.0));
  for (const SbPoint& p : curve) CHECK(p.b_fraction + p.s_fraction == 1.0);

  CHECK_THROWS_AS(sb_proportion_curve(std::vector<SbCheckpoint>{{0.0, {far}}}), Error);
  CHECK_THROWS_AS(sb_proportion_curve(std::vector<SbCheckpoint>{{0.5, {far}}, {0.2, {far}}}),
                  Error);
}

TEST_CASE("sb fraction of an untrained model equals a direct recount") {
  const PolicyModel m = PolicyModel::random(60, 4, RngSeed{11}, 1.0);
  const ReferenceModel ref(m);
  Rng rng(RngSeed{12});
  std::vector<LikelihoodRecord> records;
  std::size_t nonpositive = 0, total = 0;
  for (int i = 0; i < 100; ++i) {
    const PreferenceInstance inst{{0, {ItemId(rng.below(20))}}, ItemId(20 + rng.below(20)),
                                  {40, 41, 42, 43, 44, 45, 46}};
    LikelihoodRecord r = likelihood_record(m, ref, inst);
    for (ItemId n : inst.negatives) {
      nonpositive += m.log_prob(inst.context, inst.positive) - m.log_prob(inst.context, n) <= 0.0;
      ++total;
    }
    records.push_back(std::move(r));
  }
  const auto curve = sb_proportion_curve(std::vector<SbCheckpoint>{{0.0, records}, {1.0, records}});
  CHECK(curve[0].b_fraction == doctest::Approx(double(nonpositive) / double(total)).epsilon(1e-15));
}

TEST_CASE("mean selected negatives") {
  BoundarySelection a, b;
  a.boundary = {0, 1, 2};
  b.boundary = {1, 2, 3, 4};
  CHECK(mean_selected_negatives(std::vector<BoundarySelection>{a, b}) == 3.5);
  BoundarySelection d;
  d.boundary = {4};
  d.stage = SelectionStage::Degenerate;
  CHECK(mean_selected_negatives(std::vector<BoundarySelection>{d, d, d}) == 1.0);
  CHECK(mean_selected_negatives(std::vector<SelectionLog>{{2, {}}, {5, {}}}) == 3.5);
}

TEST_CASE("metric csv schemas") {
  std::ostringstream losses, curve;
  write_epoch_losses_csv(std::vector<EpochLoss>{{"sft", 1, 0.5}, {"po", 2, 0.25}}, losses);
  CHECK(losses.str() == "stage,epoch,mean_loss\nsft,1,0.5\npo,2,0.25\n");
  write_sb_curve_csv(std::vector<SbPoint>{{0.0, 0.25, 0.75}}, curve);
  CHECK(curve.str() == "progress,b_fraction,s_fraction\n0,0.25,0.75\n");
}
