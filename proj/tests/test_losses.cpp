#include <doctest.h>

#include <cmath>

#include "hrsim/losses.hpp"
#include "support.hpp"

using namespace hrsim;
using namespace hrsim::test;

namespace {

MatrixD uniform_log_probs(int t, int v) { return MatrixD::Constant(t, v, std::log(1.0 / v)); }

}  // namespace

TEST_CASE("ctc: hand-evaluated examples") {
  const CtcInstance one{uniform_log_probs(1, 2), {1}};
  CHECK(ctc_loss(one) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(ctc_brute_force(one) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const CtcInstance two{uniform_log_probs(2, 2), {1}};
  CHECK(ctc_loss(two) == doctest::Approx(-std::log(0.75)).epsilon(1e-14));
  CHECK(ctc_brute_force(two) == doctest::Approx(0.287682).epsilon(1e-6));
}

TEST_CASE("ctc: repeated labels need a blank between them") {
  CHECK(ctc_min_frames({1, 1}) == 3);
  CHECK(ctc_min_frames({1, 2, 2, 2}) == 6);
  CHECK(ctc_min_frames({3}) == 1);
  // T=3, label [1,1]: only path 1,0,1.
  const CtcInstance inst{uniform_log_probs(3, 2), {1, 1}};
  CHECK(ctc_loss(inst) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(ctc_loss({uniform_log_probs(2, 2), {1, 1}}), DataError);
  CHECK_THROWS_AS(ctc_brute_force({uniform_log_probs(1, 3), {1, 2}}), DataError);
}

TEST_CASE("ctc: collapse") {
  CHECK(ctc_collapse({0, 1, 1, 0, 1, 2, 2, 0}) == std::vector<int>{1, 1, 2});
  CHECK(ctc_collapse({0, 0}).empty());
  CHECK(ctc_collapse({2, 2, 2}) == std::vector<int>{2});
}

TEST_CASE("ctc: instance validation") {
  CHECK_THROWS_AS(ctc_loss({MatrixD::Constant(2, 2, std::log(0.4)), {1}}), DataError);
  CHECK_THROWS(ctc_loss({uniform_log_probs(2, 2), {}}));
  CHECK_THROWS(ctc_loss({uniform_log_probs(2, 2), {0}}));
  CHECK_THROWS(ctc_loss({uniform_log_probs(2, 2), {2}}));
}

TEST_CASE("ctc: long sequences stay finite in log space") {
  Rng rng(31);
  const int t = 400, v = 30;
  MatrixD lp = random_matrix(rng, t, v).cast<double>() * 3.0;
  for (int i = 0; i < t; ++i) {
    const double lse = std::log(lp.row(i).array().exp().sum());
    lp.row(i).array() -= lse;
  }
  std::vector<int> labels;
  for (int k = 0; k < 60; ++k) labels.push_back(1 + (k * 7) % (v - 1));
  const double loss = ctc_loss({lp, labels});
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
}

TEST_CASE("seq2seq: KL examples") {
  MatrixD p(2, 3);
  p << 0.2, 0.3, 0.5, 0.6, 0.4, 0.0;
  CHECK(seq2seq_loss(p, p) == 0.0);
  MatrixD t1(1, 2), q1(1, 2);
  t1 << 1.0, 0.0;
  q1 << 0.5, 0.5;
  CHECK(seq2seq_loss(t1, q1) == doctest::Approx(0.693147).epsilon(1e-6));
  MatrixD t2(1, 2), q2(1, 2);
  t2 << 0.5, 0.5;
  q2 << 0.9, 0.1;
  CHECK(seq2seq_loss(t2, q2) == doctest::Approx(0.510826).epsilon(1e-6));
  MatrixD q3(1, 2);
  q3 << 1.0, 0.0;
  CHECK_THROWS_AS(seq2seq_loss(t2, q3), DataError);
  CHECK_THROWS(seq2seq_loss(p, q1));
}

TEST_CASE("joint loss") {
  CHECK(joint_loss(2.0, 1.0, {0.0}) == 1.0);
  CHECK(joint_loss(2.0, 1.0, {1.0}) == 2.0);
  CHECK(joint_loss(2.0, 1.0, {0.3}) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(JointLossConfig{}.lambda == JointLossConfig::kTrainingLambda);
  CHECK(JointLossConfig::kDecodingLambda == 0.4);
  CHECK_THROWS(joint_loss(1.0, 1.0, {1.5}));
}
