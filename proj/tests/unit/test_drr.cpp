#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rqsvr/drr.hpp"
#include "rqsvr/quadrangle.hpp"

using namespace rqsvr;

namespace {

// Fractional knapsack: fill the largest |z| first at the cap until mass 1.
double greedy_worst_case(std::vector<double> z, double alpha) {
  for (auto& v : z) v = std::abs(v);
  std::sort(z.begin(), z.end(), std::greater<>());
  const double cap = 1.0 / (static_cast<double>(z.size()) * (1.0 - alpha));
  double left = 1.0, total = 0.0;
  for (double v : z) {
    double take = std::min(cap, left);
    total += take * v;
    left -= take;
    if (left <= 0) break;
  }
  return total;
}

std::vector<double> random_residuals(std::mt19937_64& rng, std::size_t l, bool ties) {
  std::normal_distribution<double> g(0, 2);
  std::uniform_int_distribution<int> ui(-3, 3);
  std::vector<double> z(l);
  for (auto& v : z) v = ties ? ui(rng) : g(rng);
  return z;
}

// Quantiles of shift + Exp(rate), written independently of the library.
double exp_quantile(double p, double rate, double shift) { return shift - std::log(1.0 - p) / rate; }

}  // namespace

TEST_CASE("optimal_weights examples") {
  auto w = optimal_weights(EmpiricalSample::equiprobable({1, 2, 3, 4}), 0.5);
  CHECK(w.weights[0] == 0.0);
  CHECK(w.weights[1] == 0.0);
  CHECK(w.weights[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w.weights[3] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(worst_case_objective(EmpiricalSample::equiprobable({1, 2, 3, 4}), 0.5) == doctest::Approx(3.5));
  // sign does not matter
  CHECK(worst_case_objective(EmpiricalSample::equiprobable({-1, 2, -3, 4}), 0.5) == doctest::Approx(3.5));

  auto u = optimal_weights(EmpiricalSample::equiprobable({3, -1, 2, 5, 0.5}), 0.0);
  for (double q : u.weights) CHECK(q == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(worst_case_objective(EmpiricalSample::equiprobable({3, -1, 2, 5, 0.5}), 0.0) ==
        doctest::Approx(11.5 / 5));

  auto t = optimal_weights(EmpiricalSample::equiprobable({2, -2, 2, 2, -2, 2}), 0.7);
  for (double q : t.weights) CHECK(q == doctest::Approx(1.0 / 6).epsilon(1e-14));

  std::vector<double> distinct{0.3, -1.7, 2.2, 0.9, -4.1};
  CHECK(worst_case_objective(EmpiricalSample::equiprobable(distinct), 0.999) == doctest::Approx(4.1));
  CHECK(worst_case_lp(EmpiricalSample::equiprobable(distinct), 0.999).value ==
        doctest::Approx(4.1).epsilon(1e-8));

  CHECK_THROWS_AS(optimal_weights(EmpiricalSample({1, 2, 3}, {0.5, 0.25, 0.25}), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(optimal_weights(EmpiricalSample::equiprobable({1, 2}), 1.0), std::domain_error);
}

TEST_CASE("k_from_alpha and stable regression") {
  CHECK(k_from_alpha(1000, 0.6) == 400);
  CHECK(k_from_alpha(4, 0.5) == 2);
  CHECK(k_from_alpha(5, 0.5) == 2);
  CHECK(k_is_exact(1000, 0.6));
  CHECK(k_is_exact(4, 0.5));
  CHECK_FALSE(k_is_exact(5, 0.5));
  CHECK(k_from_alpha(10, 0.7) == 3);  // 10 * (1 - 0.7) is not exactly 3 in floating point

  auto s4 = EmpiricalSample::equiprobable({1, -2, 3, 4});
  CHECK(stable_regression_objective(s4, 2) == 7.0);
  CHECK(worst_case_objective(s4, 0.5) * 0.5 * 4 == doctest::Approx(7.0));

  auto s5 = EmpiricalSample::equiprobable({1, 2, 3, 4, 5});
  // l (1 - alpha) = 2.5: Q_alpha takes 4 and 5 in full and half of 3.
  CHECK(stable_regression_objective(s5, k_from_alpha(5, 0.5)) == 9.0);
  CHECK(worst_case_objective(s5, 0.5) * 0.5 * 5 == doctest::Approx(10.5));
  CHECK(worst_case_lp(s5, 0.5).value * 2.5 == doctest::Approx(10.5).epsilon(1e-8));
}

TEST_CASE("property: worst case equals cvar, the greedy oracle and the LP") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 40);
  QpSettings tight;
  tight.tolerance = 1e-10;
  for (int trial = 0; trial < 60; ++trial) {
    auto z = random_residuals(rng, static_cast<std::size_t>(len(rng)), trial % 2 == 0);
    auto s = EmpiricalSample::equiprobable(z);
    oracle::Atoms a{oracle::abs(z), std::vector<double>(z.size(), 1.0 / static_cast<double>(z.size()))};
    for (double alpha : {0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 0.9, 0.99}) {
      auto q = optimal_weights(s, alpha);
      double wc = worst_case_objective(s, alpha);
      CHECK(std::abs(wc - cvar(s.abs(), alpha)) <= 1e-10);
      CHECK(std::abs(wc - oracle::cvar(a, alpha)) <= 1e-10);
      CHECK(std::abs(wc - greedy_worst_case(z, alpha)) <= 1e-10);
      CHECK(std::abs(q.sum() - 1.0) <= 1e-12);
      const double cap = 1.0 / (static_cast<double>(z.size()) * (1.0 - alpha));
      for (double v : q.weights) {
        CHECK(v >= 0.0);
        CHECK(v <= cap + 1e-12);
      }
      auto lp = worst_case_lp(s, alpha, tight);
      REQUIRE(lp.solution.status == QpStatus::Optimal);
      CHECK(std::abs(lp.value - wc) <= 1e-8);

      // sparsity: nonzeros <= ceil(l (1 - alpha)) + m
      double qa = quantile_interval(s.abs(), alpha).hi;
      auto m = std::count_if(z.begin(), z.end(), [&](double v) { return std::abs(v) == qa; });
      CHECK(q.nonzeros() <= static_cast<Eigen::Index>(std::ceil(z.size() * (1.0 - alpha))) + m);

      Eigen::Index l = static_cast<Eigen::Index>(z.size());
      if (k_is_exact(l, alpha))
        CHECK(std::abs(wc * (1 - alpha) * static_cast<double>(l) -
                       stable_regression_objective(s, k_from_alpha(l, alpha))) <= 1e-9);
    }
  }
}

TEST_CASE("nu-SVR solution minimizes the rescaled DRR objective") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  Matrix X(30, 2);
  for (auto& v : X.reshaped()) v = g(rng);
  Vector y = X.col(0) - 0.5 * X.col(1);
  for (auto& v : y) v += g(rng);
  Dataset d(X, y);
  const double alpha = 0.6, lambda = 0.05;
  SvrConfig cfg;
  cfg.formulation = Formulation::NuPrimal;
  cfg.parameter = SvrParameter::alpha(alpha);
  cfg.regularization = Regularization::lambda(lambda);
  auto m = train(d, cfg);
  const double ld = drr_lambda_from_svr(lambda, alpha);
  const double at = drr_objective(d, *m.weights, m.intercept, alpha, ld);
  CHECK(at == doctest::Approx(m.objective / (1 - alpha)).epsilon(1e-10));
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 50; ++k) {
    Vector w = *m.weights;
    for (auto& v : w) v += 0.01 * u(rng);
    double b = m.intercept + 0.01 * u(rng);
    double other = drr_objective(d, w, b, alpha, ld);
    CHECK(other == doctest::Approx(nu_objective(d, w, b, alpha, lambda) / (1 - alpha)).epsilon(1e-10));
    CHECK(other >= at - 1e-9);
  }
}

TEST_CASE("noise laws") {
  NoiseModel lap = LaplaceNoise{0.0, 1.0};
  CHECK(noise_quantile(lap, 0.8).lo == doctest::Approx(-std::log(0.4)));
  CHECK(noise_quantile(lap, 0.2).lo == doctest::Approx(std::log(0.4)));
  CHECK(noise_abs_cdf(lap, -std::log(0.4)) == doctest::Approx(0.6));
  NoiseModel gauss = GaussianNoise{1.0, 2.0};
  CHECK(noise_quantile(gauss, 0.975).lo == doctest::Approx(1.0 + 2.0 * 1.959963984540054));
  CHECK(noise_abs_cdf(GaussianNoise{0, 1}, 1.959963984540054) == doctest::Approx(0.95));
  NoiseModel ex = ShiftedExponentialNoise{2.0, 1.0};
  CHECK(noise_mean(ex) == 1.5);
  CHECK(noise_quantile(ex, 0.5).lo == doctest::Approx(exp_quantile(0.5, 2.0, 1.0)));
  CHECK_THROWS_AS(validate(LaplaceNoise{0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(GaussianNoise{0.0, -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ShiftedExponentialNoise{0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("select_alpha") {
  auto lap = select_alpha(LaplaceNoise{0.0, 1.0}, 0.6);
  CHECK(lap.symmetric);
  CHECK(lap.alpha == 0.6);
  CHECK(lap.eps == doctest::Approx(-std::log(0.4)).epsilon(1e-12));
  CHECK(lap.alpha_star == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(lap.nu == doctest::Approx(0.4).epsilon(1e-12));

  for (double mu : {-3.0, 0.0, 2.5}) {
    auto gs = select_alpha(GaussianNoise{mu, 1.5}, 0.3);
    CHECK(gs.symmetric);
    CHECK(gs.alpha == 0.3);
  }

  // shift + Exp(rate): (q_{(1+a)/2} + q_{(1-a)/2}) / 2 = mean  <=>  (1 - a^2) / 4 = e^-2
  const double root = std::sqrt(1.0 - 4.0 / std::exp(2.0));
  for (auto [rate, shift] : {std::pair{1.0, 0.0}, std::pair{2.0, 1.0}, std::pair{0.5, -3.0}}) {
    auto ex = select_alpha(ShiftedExponentialNoise{rate, shift});
    CHECK_FALSE(ex.symmetric);
    CHECK(std::abs(ex.alpha - root) <= 1e-9);
    double qa = exp_quantile(0.5 * (1 + ex.alpha), rate, shift);
    double qb = exp_quantile(0.5 * (1 - ex.alpha), rate, shift);
    CHECK(std::abs(0.5 * (qa + qb) - (shift + 1.0 / rate)) <= 1e-8);
    CHECK(ex.eps == doctest::Approx(0.5 * (qa - qb)).epsilon(1e-9));
    // P(|e| <= eps) straight from the exponential cdf
    auto F = [&](double t) { return t <= shift ? 0.0 : 1.0 - std::exp(-rate * (t - shift)); };
    CHECK(ex.alpha_star == doctest::Approx(F(ex.eps) - F(-ex.eps)).epsilon(1e-12));
    CHECK(ex.nu == doctest::Approx(1 - ex.alpha_star));
  }
}

TEST_CASE("select_alpha on empirical noise") {
  // {0, 0, 0, 1}: mean 0.25; the quantile average first reaches it at alpha = 0.5
  auto e = select_alpha(EmpiricalNoise{EmpiricalSample::equiprobable({0, 0, 0, 1})});
  CHECK_FALSE(e.symmetric);
  CHECK(e.alpha == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(statistic_avg_quantiles(EmpiricalSample::equiprobable({0, 0, 0, 1}), e.alpha).contains(0.25, 1e-12));

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    auto z = random_residuals(rng, 3 + trial % 9, trial % 2 == 0);
    auto s = EmpiricalSample::equiprobable(z);
    auto sel = select_alpha(EmpiricalNoise{s});
    double scale = std::max({1.0, std::abs(s.min()), std::abs(s.max())});
    CHECK(statistic_avg_quantiles(s, sel.alpha).contains(s.mean(), 1e-12 * scale));
    CHECK(sel.alpha_star == doctest::Approx(cdf_pair(s.abs(), sel.eps).second));

    // mirrored about c: symmetric, and the root condition holds at every alpha
    std::vector<double> mirrored = z;
    const double c = 0.75;
    for (double v : z) mirrored.push_back(2 * c - v);
    auto ms = EmpiricalSample::equiprobable(mirrored);
    CHECK(select_alpha(EmpiricalNoise{ms}, 0.4).symmetric);
    for (int k = 0; k < 100; ++k) {
      double a = k / 100.0;
      CHECK(statistic_avg_quantiles(ms, a).contains(ms.mean(), 1e-12 * std::max(1.0, std::abs(ms.max()) + std::abs(ms.min()))));
    }
  }
}
