#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dynpo/losses.hpp"
#include "oracles.hpp"

using namespace dynpo;

namespace {

const double kLn2 = std::log(2.0);

LogRatioSet ratios(double r_pos, std::vector<double> r_neg) { return {r_pos, std::move(r_neg)}; }

std::vector<std::size_t> all_of(std::size_t k) {
  std::vector<std::size_t> v(k);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Loss value as a function of the theta log-likelihoods, reference fixed at 0.
double value_at(Objective obj, double pos, const std::vector<double>& neg,
                const std::vector<double>& betas, const std::vector<std::size_t>& active) {
  return evaluate_loss(obj, ratios(pos, neg), betas, active).value;
}

}  // namespace

TEST_CASE("dpo_loss values") {
  CHECK(dpo_loss(ratios(0, {0}), 1.0).value == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(dpo_loss(ratios(1, {-1}), 1.0).value ==
        doctest::Approx(oracle::neg_log_sigmoid(2.0)).epsilon(1e-13));
  CHECK(dpo_loss(ratios(1, {-1}), 1.0).value == doctest::Approx(0.126928).epsilon(1e-6));

  double prev = dpo_loss(ratios(1, {0}), 0.5).value;
  for (double beta : {1.0, 2.0, 5.0, 20.0, 100.0}) {
    const double v = dpo_loss(ratios(1, {0}), beta).value;
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-40);
}

TEST_CASE("dpo_loss rejects bad arguments") {
  CHECK_THROWS_AS(dpo_loss(ratios(0, {0}), 0.0), Error);
  CHECK_THROWS_AS(dpo_loss(ratios(0, {0}), -1.0), Error);
  CHECK_THROWS_AS(dpo_loss(ratios(0, {0, 0}), 1.0), Error);
}

TEST_CASE("dmpo_loss values") {
  const std::vector<double> ones15(15, 1.0);
  CHECK(dmpo_loss(ratios(0, std::vector<double>(15, 0.0)), ones15, all_of(15)).value ==
        doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(dmpo_loss(ratios(1, {0, 2}), std::vector<double>{1, 1}, all_of(2)).value ==
        doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(dmpo_loss(ratios(2, {0, 1, -1}), std::vector<double>{1, 1, 1}, all_of(3)).value ==
        doctest::Approx(oracle::neg_log_sigmoid(2.0)).epsilon(1e-13));
  CHECK_THROWS_AS(dmpo_loss(ratios(0, {0}), std::vector<double>{}, std::vector<std::size_t>{}),
                  Error);
}

TEST_CASE("sdpo_style_loss values") {
  const std::vector<double> one{1.0};
  CHECK(sdpo_style_loss(ratios(0.3, {0.3}), one, all_of(1)).value ==
        doctest::Approx(kLn2).epsilon(1e-15));
  const double expected = oracle::neg_log_sigmoid(1.0 - kLn2);
  CHECK(sdpo_style_loss(ratios(1, {0, 0}), std::vector<double>{1, 1}, all_of(2)).value ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK(expected == doctest::Approx(0.551445).epsilon(1e-6));
  CHECK_THROWS_AS(sdpo_style_loss(ratios(0, {0}), std::vector<double>{}, std::vector<std::size_t>{}),
                  Error);
}

TEST_CASE("mppo_style_loss values") {
  const double expected = (oracle::neg_log_sigmoid(2.0) + oracle::neg_log_sigmoid(4.0)) / 2.0;
  CHECK(mppo_style_loss(ratios(2, {0, -2}), std::vector<double>{1, 1}, all_of(2)).value ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK(expected == doctest::Approx(0.072539).epsilon(1e-5));
  CHECK(mppo_style_loss(ratios(0, {0, 0, 0}), std::vector<double>{0.5, 1, 2}, all_of(3)).value ==
        doctest::Approx(kLn2).epsilon(1e-15));
}

TEST_CASE("single active negative reduces to dpo") {
  Rng rng(RngSeed{11});
  for (int t = 0; t < 500; ++t) {
    const double rp = rng.uniform() * 20 - 10, rn = rng.uniform() * 20 - 10;
    const double beta = 0.1 + rng.uniform() * 2;
    const LossOutput ref = dpo_loss(ratios(rp, {rn}), beta);
    for (auto fn : {&dmpo_loss, &sdpo_style_loss, &mppo_style_loss}) {
      const LossOutput out = fn(ratios(rp, {rn}), std::vector<double>{beta}, all_of(1));
      CHECK(std::abs(out.value - ref.value) <= 1e-12);
      CHECK(std::abs(out.grad_pos - ref.grad_pos) <= 1e-12);
      CHECK(std::abs(out.grad_neg[0] - ref.grad_neg[0]) <= 1e-12);
    }
  }
}

TEST_CASE("inactive negatives get exactly zero gradient") {
  const std::vector<std::size_t> active{1, 3};
  const std::vector<double> betas{1.0, 0.7};
  for (auto fn : {&dmpo_loss, &sdpo_style_loss, &mppo_style_loss}) {
    const LossOutput out = fn(ratios(0.2, {0.5, -0.1, 2.0, 0.3}), betas, active);
    CHECK(out.grad_neg.size() == 4);
    CHECK(out.grad_neg[0] == 0.0);
    CHECK(out.grad_neg[2] == 0.0);
    CHECK(out.grad_neg[1] > 0.0);
    CHECK(out.grad_neg[3] > 0.0);
    CHECK(out.grad_pos < 0.0);
  }
}

TEST_CASE("active set validation") {
  const std::vector<double> two{1, 1};
  CHECK_THROWS_AS(dmpo_loss(ratios(0, {0, 0}), two, std::vector<std::size_t>{0, 0}), Error);
  CHECK_THROWS_AS(dmpo_loss(ratios(0, {0, 0}), two, std::vector<std::size_t>{0, 2}), Error);
  CHECK_THROWS_AS(dmpo_loss(ratios(0, {0, 0}), std::vector<double>{1}, all_of(2)), Error);
  CHECK_THROWS_AS(dmpo_loss(ratios(0, {0, 0}), std::vector<double>{1, 0}, all_of(2)), Error);
}

TEST_CASE("gradients match central differences") {
  Rng rng(RngSeed{2024});
  const Objective objectives[] = {Objective::Dpo, Objective::Dmpo, Objective::Sdpo,
                                  Objective::Mppo};
  for (int t = 0; t < 200; ++t) {
    for (Objective obj : objectives) {
      const std::size_t k = obj == Objective::Dpo ? 1 : 1 + rng.below(15);
      std::vector<double> neg(k);
      for (double& v : neg) v = rng.uniform() * 20 - 10;
      const double pos = rng.uniform() * 20 - 10;
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < k; ++i) {
        if (obj == Objective::Dpo || rng.uniform() < 0.6) active.push_back(i);
      }
      if (active.empty()) active.push_back(rng.below(k));
      std::vector<double> betas(active.size());
      for (double& b : betas) b = 0.25 + rng.uniform() * 1.25;

      const LossOutput out = evaluate_loss(obj, ratios(pos, neg), betas, active);
      const double gp = oracle::central_difference(
          [&](double x) { return value_at(obj, x, neg, betas, active); }, pos);
      CHECK(oracle::rel_err(out.grad_pos, gp) < 1e-5);
      for (std::size_t i = 0; i < k; ++i) {
        const double gn = oracle::central_difference(
            [&](double x) {
              std::vector<double> moved = neg;
              moved[i] = x;
              return value_at(obj, pos, moved, betas, active);
            },
            neg[i]);
        CHECK(oracle::rel_err(out.grad_neg[i], gn) < 1e-5);
      }
    }
  }
}

TEST_CASE("shift invariance and dmpo translation") {
  const std::vector<double> betas{0.5, 1.0, 1.5};
  const LossOutput a = dmpo_loss(ratios(0.3, {0.1, -0.4, 0.9}), betas, all_of(3));
  // Shifting theta and ref together leaves the ratios, hence the loss, unchanged.
  LikelihoodRecord rec{-1.2, -1.5, {-2.0, -3.1, -0.6}, {-2.1, -2.7, -1.5}};
  const LossOutput b = dmpo_loss(log_ratios(rec), betas, all_of(3));
  for (double& v : rec.neg_theta) v += 0.75;
  for (double& v : rec.neg_ref) v += 0.75;
  rec.pos_theta += 0.75;
  rec.pos_ref += 0.75;
  CHECK(dmpo_loss(log_ratios(rec), betas, all_of(3)).value ==
        doctest::Approx(b.value).epsilon(1e-13));

  // Raising r_pos by c raises the sigmoid argument by mean(beta) * c.
  const double c = 0.37;
  const LossOutput shifted = dmpo_loss(ratios(0.3 + c, {0.1, -0.4, 0.9}), betas, all_of(3));
  const double arg = (0.5 * 0.2 + 1.0 * 0.7 + 1.5 * -0.6) / 3.0;
  CHECK(a.value == doctest::Approx(oracle::neg_log_sigmoid(arg)).epsilon(1e-13));
  CHECK(shifted.value == doctest::Approx(oracle::neg_log_sigmoid(arg + c)).epsilon(1e-13));
}

TEST_CASE("large margins stay finite") {
  const std::vector<double> betas{1.5, 1.5};
  for (auto fn : {&dmpo_loss, &sdpo_style_loss, &mppo_style_loss}) {
    const LossOutput hi = fn(ratios(400, {-400, -400}), betas, all_of(2));
    const LossOutput lo = fn(ratios(-400, {400, 400}), betas, all_of(2));
    CHECK(std::isfinite(hi.value));
    CHECK(std::isfinite(lo.value));
    CHECK(lo.value > 1000.0);
    CHECK(std::isfinite(lo.grad_pos));
  }
}

TEST_CASE("gradient decomposition") {
  const std::vector<double> g{1, 1, 1, 3};
  const auto d = neg_gradient_decomposition(g, std::vector<std::size_t>{0, 1, 2},
                                            std::vector<std::size_t>{3});
  CHECK(d.s_term == doctest::Approx(0.75));
  CHECK(d.b_term == doctest::Approx(0.75));
  CHECK(d.reconstruction == doctest::Approx(1.5));

  const auto empty_b = neg_gradient_decomposition(g, all_of(4), std::vector<std::size_t>{});
  CHECK(empty_b.b_term == 0.0);
  CHECK(empty_b.s_term == doctest::Approx(1.5));

  CHECK_THROWS_AS(neg_gradient_decomposition(g, std::vector<std::size_t>{0, 1},
                                             std::vector<std::size_t>{1, 2, 3}),
                  Error);
  CHECK_THROWS_AS(neg_gradient_decomposition(g, std::vector<std::size_t>{0, 1},
                                             std::vector<std::size_t>{3}),
                  Error);
}

TEST_CASE("objective names") {
  for (Objective o : {Objective::Dpo, Objective::Dmpo, Objective::Sdpo, Objective::Mppo}) {
    CHECK(parse_objective(objective_name(o)) == o);
  }
  CHECK_THROWS_AS(parse_objective("ipo"), Error);
}
