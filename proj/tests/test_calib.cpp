#include <doctest.h>

#include <cmath>
#include <cstring>

#include "hrsim/calib.hpp"
#include "support.hpp"

using namespace hrsim;
using namespace hrsim::test;

namespace {

std::vector<std::pair<double, double>> sample_logistic(const LogisticParams& p, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < n; ++i) {
    const double x = u(rng);
    out.emplace_back(x, logistic(x, p));
  }
  return out;
}

double mapping_rmse(const std::vector<std::pair<double, double>>& pairs, const LogisticParams& p) {
  std::vector<double> pred, truth;
  for (const auto& [x, y] : pairs) {
    pred.push_back(logistic(x, p));
    truth.push_back(y);
  }
  return rmse(pred, truth);
}

PredictionRecord rec(const std::string& sig, const std::string& listener, const std::string& system, double raw,
                     double mapped, double wcs) {
  return {sig, listener, system, raw, mapped, wcs};
}

}  // namespace

TEST_CASE("logistic examples and saturation") {
  CHECK(logistic(3.7, {0, 0}) == 0.5);
  CHECK(logistic(0.5, {-2, 1}) == 0.5);
  CHECK(logistic(2.0, {-1, 0}) == doctest::Approx(0.8807971).epsilon(1e-7));
  CHECK(logistic(1e6, {-1, 0}) == 1.0);
  CHECK(logistic(1e6, {1, 0}) == 0.0);
  CHECK(std::isfinite(logistic(-1e308, {10, 0})));
}

TEST_CASE("fit: recovers several generating maps") {
  for (const LogisticParams truth : {LogisticParams{-8, 4}, LogisticParams{-20, 9}, LogisticParams{-3, 1}}) {
    const auto pairs = sample_logistic(truth, 50, 61);
    CHECK(mapping_rmse(pairs, fit_logistic(pairs)) <= 1e-4);
  }
}

TEST_CASE("fit: constant WCS is matched") {
  Rng rng(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 40; ++i) pairs.emplace_back(u(rng), 0.37);
  CHECK(mapping_rmse(pairs, fit_logistic(pairs)) <= 1e-9);
}

TEST_CASE("fit: affine reparametrization of raw scores") {
  Rng rng(63);
  std::normal_distribution<double> noise(0.0, 0.05);
  auto pairs = sample_logistic({-6, 3}, 60, 64);
  for (auto& [x, y] : pairs) y = std::clamp(y + noise(rng), 0.0, 1.0);
  const LogisticParams p = fit_logistic(pairs);
  auto shifted = pairs;
  for (auto& [x, y] : shifted) x = 2.5 * x + 0.7;
  const LogisticParams q = fit_logistic(shifted);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    CHECK(logistic(shifted[i].first, q) == doctest::Approx(logistic(pairs[i].first, p)).epsilon(1e-4));
}

TEST_CASE("fit: errors and determinism") {
  const std::vector<std::pair<double, double>> two{{0.1, 0.2}, {0.3, 0.4}};
  CHECK_THROWS_AS(fit_logistic(two), DataError);
  const std::vector<std::pair<double, double>> flat{{0.5, 0.2}, {0.5, 0.4}, {0.5, 0.9}};
  CHECK_THROWS_AS(fit_logistic(flat), DataError);
  const auto pairs = sample_logistic({-5, 2}, 30, 65);
  const LogisticParams a = fit_logistic(pairs), b = fit_logistic(pairs);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("rmse and ncc examples") {
  const std::vector<double> a{1, 0}, z{0, 0};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, z) == doctest::Approx(0.7071068).epsilon(1e-7));
  const std::vector<double> x{1, 2, 3}, y{1, 2, 4}, neg{-1, -2, -3};
  CHECK(ncc(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ncc(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ncc(x, y) == doctest::Approx(0.98198).epsilon(1e-5));
  CHECK_THROWS_AS(ncc(x, std::vector<double>{2, 2, 2}), DataError);
  CHECK_THROWS(rmse(x, a));
}

TEST_CASE("ncc agrees with the raw-sum formula on random data") {
  Rng rng(66);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(3 + i * 7), y(x.size());
    std::normal_distribution<double> n(3.0, 2.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = n(rng);
      y[k] = 0.5 * x[k] + n(rng);
    }
    CHECK(std::abs(ncc(x, y) - pearson_sums(x, y)) <= 1e-12);
  }
}

TEST_CASE("kendall tau") {
  const std::vector<double> inc{1, 2, 3, 4, 5}, dec{5, 4, 3, 2, 1};
  CHECK(kendall_tau(inc, inc) == 1.0);
  CHECK(kendall_tau(inc, dec) == -1.0);
  const std::vector<double> p{1, 2, 2, 3}, t{1, 2, 3, 3};
  CHECK(kendall_tau(p, t) == kendall_tau_b_pairs(p, t));
  CHECK(kendall_tau(p, t, TauVariant::A) == doctest::Approx(4.0 / 6.0));
  CHECK_THROWS_AS(kendall_tau(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DataError);

  Rng rng(67);
  for (int i = 0; i < 40; ++i) {
    const int n = 2 + (i * 29) % 300;
    std::uniform_int_distribution<int> level(0, 1 + i % 9);
    std::vector<double> x(n), y(n);
    for (int k = 0; k < n; ++k) {
      x[k] = level(rng);
      y[k] = level(rng) + 0.5 * x[k];
    }
    const double oracle = kendall_tau_b_pairs(x, y);
    if (std::isfinite(oracle)) CHECK(kendall_tau(x, y) == oracle);
  }
}

TEST_CASE("grouping names") {
  CHECK(parse_grouping("listener") == Grouping::Listener);
  CHECK(to_string(Grouping::System) == "system");
  CHECK_THROWS_AS(parse_grouping("room"), UsageError);
}

TEST_CASE("trial report: perfect predictions") {
  std::vector<PredictionRecord> r;
  for (int i = 0; i < 6; ++i) r.push_back(rec("s" + std::to_string(i), "L", "S", i * 0.1, i * 0.15, i * 0.15));
  const EvalReport rep = trial_report(r);
  CHECK(*rep.rmse == 0.0);
  CHECK(*rep.ncc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*rep.kt == 1.0);
  CHECK(rep.n_points == 6);
}

TEST_CASE("group aggregate: means, standard errors, undefined metrics") {
  const std::vector<PredictionRecord> r{rec("a", "L1", "S1", 0.1, 0.2, 0.25), rec("b", "L1", "S2", 0.3, 0.4, 0.35),
                                        rec("c", "L2", "S1", 0.9, 0.8, 0.7)};
  const EvalReport by_listener = group_aggregate(r, Grouping::Listener);
  REQUIRE(by_listener.groups.size() == 2);
  CHECK(by_listener.groups[0].id == "L1");
  CHECK(by_listener.groups[0].mean_pred == doctest::Approx(0.3));
  CHECK(by_listener.groups[1].mean_pred == doctest::Approx(0.8));
  CHECK(by_listener.groups[0].se_pred == doctest::Approx(std::sqrt(0.02) / std::sqrt(2.0)));
  CHECK(by_listener.groups[1].se_pred == 0.0);
  CHECK(by_listener.groups[1].se_wcs == 0.0);
  CHECK(*by_listener.rmse == doctest::Approx(std::sqrt((0.0 * 0.0 + 0.1 * 0.1) / 2.0)));
  CHECK(by_listener.n_points == 2);
  CHECK(by_listener.n_trials == 3);

  const std::vector<PredictionRecord> one_group{rec("a", "L", "S", 0.1, 0.2, 0.3), rec("b", "L", "S", 0.5, 0.6, 0.7)};
  const EvalReport single = group_aggregate(one_group, Grouping::System);
  CHECK(single.groups[0].mean_wcs == doctest::Approx(0.5));
  CHECK_FALSE(single.ncc.has_value());
  CHECK_FALSE(single.kt.has_value());
}

TEST_CASE("group aggregate: singleton groups reproduce trial metrics") {
  std::vector<PredictionRecord> r;
  Rng rng(68);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    const std::string id = "s" + std::to_string(i);
    r.push_back(rec(id, "L" + std::to_string(i), "S" + std::to_string(i), u(rng), u(rng), u(rng)));
  }
  const EvalReport trial = trial_report(r), grouped = group_aggregate(r, Grouping::Listener);
  CHECK(*grouped.rmse == *trial.rmse);
  CHECK(*grouped.ncc == *trial.ncc);
  CHECK(*grouped.kt == *trial.kt);
}
