#include <doctest.h>

#include <random>

#include "rqsvr/quadrangle.hpp"
#include "rqsvr/svr.hpp"

using namespace rqsvr;

namespace {

Dataset five_points() {
  Matrix X(5, 1);
  X << 0.0, 0.25, 0.5, 0.75, 1.0;
  Vector y(5);
  y << 0.1, 0.2, 0.9, 0.6, 1.3;
  return Dataset(X, y);
}

Dataset random_dataset(std::mt19937_64& rng, int l, int n) {
  std::normal_distribution<double> g;
  Matrix X(l, n);
  for (auto& v : X.reshaped()) v = g(rng);
  Vector w(n);
  for (auto& v : w) v = g(rng);
  Vector y = X * w;
  for (auto& v : y) v += 0.5 * g(rng) + 0.3;
  return Dataset(X, y);
}

SvrConfig config(Formulation f, double alpha_or_eps, Regularization reg) {
  SvrConfig c;
  c.formulation = f;
  c.parameter = f == Formulation::EpsPrimal ? SvrParameter::epsilon(alpha_or_eps)
                                            : SvrParameter::alpha(alpha_or_eps);
  c.regularization = reg;
  return c;
}

// Exhaustive (w, b) grid on [-3, 3]^2 with step 1e-3.
double grid_min_eps(const Dataset& d, double eps, double lambda) {
  double best = 1e300;
  const int steps = 6000;
  for (int i = 0; i <= steps; ++i) {
    double w = -3.0 + 6.0 * i / steps;
    double pen = 0.5 * lambda * w * w;
    for (int j = 0; j <= steps; ++j) {
      double b = -3.0 + 6.0 * j / steps;
      double e = 0;
      for (Eigen::Index k = 0; k < d.size(); ++k)
        e += std::max(0.0, std::abs(d.targets[k] - w * d.features(k, 0) - b) - eps);
      best = std::min(best, e / static_cast<double>(d.size()) + pen);
    }
  }
  return best;
}

SvrModel model_with_residuals(std::vector<double> z) {
  SvrModel m;
  m.residuals = EmpiricalSample::equiprobable(std::move(z));
  return m;
}

}  // namespace

TEST_CASE("dataset validation and fingerprint") {
  CHECK_THROWS_AS(Dataset(Matrix::Zero(1, 1), Vector::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(Dataset(Matrix::Zero(3, 1), Vector::Zero(2)), std::invalid_argument);
  Matrix X = Matrix::Zero(2, 1);
  X(0, 0) = NAN;
  CHECK_THROWS_AS(Dataset(X, Vector::Zero(2)), std::invalid_argument);
  auto a = five_points(), b = five_points();
  CHECK(a.fingerprint() == b.fingerprint());
  b.targets[0] += 1e-12;
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("kernel specs") {
  CHECK(KernelSpec::parse("linear").is_linear());
  auto r = KernelSpec::parse("rbf:0.5");
  CHECK(r.kind == KernelSpec::Kind::Rbf);
  CHECK(r.gamma == 0.5);
  auto p = KernelSpec::parse("poly:3,1.5");
  CHECK(p.degree == 3);
  CHECK(p.offset == 1.5);
  CHECK(KernelSpec::parse(p.to_string()).offset == 1.5);
  CHECK_THROWS_AS(KernelSpec::parse("rbf:-1"), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::parse("poly:0,1"), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::parse("sigmoid"), std::invalid_argument);
  Vector a(2), b(2);
  a << 1, 2;
  b << 3, -1;
  CHECK(kernel_value(KernelSpec::linear(), a, b) == 1.0);
  CHECK(kernel_value(KernelSpec::rbf(0.1), a, b) == doctest::Approx(std::exp(-1.3)));
  CHECK(kernel_value(KernelSpec::polynomial(2, 1.0), a, b) == doctest::Approx(4.0));
}

TEST_CASE("QP dimensions") {
  Matrix X(3, 1);
  X << 0, 1, 2;
  Vector y(3);
  y << 1, 0, 2;
  Dataset d(X, y);
  auto e = build_eps_primal_qp(d, 0.1, 1.0);
  CHECK(e.num_variables() == 8);
  CHECK(e.num_inequalities() == 12);
  CHECK(build_nu_primal_qp(d, 0.5, 1.0).num_variables() == 9);
  CHECK(build_deviation_qp(d, 0.5, 1.0).num_variables() == 9);
  CHECK(build_dual_qp(d, 0.5, 1.0, KernelSpec::linear()).num_variables() == 6);
  CHECK(Matrix(build_dual_qp(d, 0.5, 1.0, KernelSpec::linear()).P()).topLeftCorner(3, 3).isApprox(X * X.transpose()));
}

TEST_CASE("constant targets") {
  Matrix X(4, 1);
  X << 0, 1, 2, 3;
  Vector y = Vector::Constant(4, 2.5);
  Dataset d(X, y);
  auto sol = solve_qp(build_eps_primal_qp(d, 0.0, 0.3));
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(sol.x[1] == doctest::Approx(2.5).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-7));
  for (auto f : {Formulation::NuPrimal, Formulation::NuDeviation, Formulation::NuDual}) {
    auto m = train(d, config(f, 0.4, Regularization::lambda(0.3)));
    REQUIRE(m.weights);
    CHECK(std::abs((*m.weights)[0]) <= 1e-6);
    CHECK(m.intercept == doctest::Approx(2.5).epsilon(1e-6));
    if (f == Formulation::NuDual) CHECK(std::abs(m.objective) <= 1e-7);
    if (f == Formulation::NuDeviation) CHECK(std::abs(m.objective) <= 1e-7);
  }
  // eps must stay below half the target range, which is zero here.
  CHECK_THROWS_AS(train(d, config(Formulation::EpsPrimal, 0.0, Regularization::lambda(1))), std::domain_error);
}

TEST_CASE("eps-primal matches an exhaustive grid") {
  auto d = five_points();
  auto m = train(d, config(Formulation::EpsPrimal, 0.3, Regularization::lambda(0.1)));
  const double grid = grid_min_eps(d, 0.3, 0.1);
  CHECK(m.objective == doctest::Approx(grid).epsilon(1e-3));
  CHECK(m.objective <= grid + 1e-9);
  CHECK(m.objective == doctest::Approx(eps_objective(d, *m.weights, m.intercept, 0.3, 0.1)));
}

TEST_CASE("nu-primal self-consistency and deviation agreement") {
  auto d = five_points();
  auto nu = train(d, config(Formulation::NuPrimal, 0.5, Regularization::lambda(0.1)));
  double direct = (1 - 0.5) * cvar(nu.residuals.abs(), 0.5) + 0.05 * nu.weights->squaredNorm();
  CHECK(std::abs(nu.objective - direct) <= 1e-8);
  CHECK(std::abs(nu.solver_objective - direct) <= 1e-8);
  CHECK(*nu.eps >= -1e-9);
  CHECK(eps_from_alpha(nu, 0.5).contains(*nu.eps, 1e-7));

  auto dev = train(d, config(Formulation::NuDeviation, 0.5, Regularization::lambda(0.1)));
  CHECK(std::abs((*dev.weights)[0] - (*nu.weights)[0]) <= 1e-4);
  REQUIRE(dev.intercept_interval);
  // nu-primal's intercept lies in the statistic and every point of it is optimal.
  CHECK(dev.intercept_interval->contains(nu.intercept, 1e-5));
  for (double t : {0.0, 0.5, 1.0}) {
    double b = dev.intercept_interval->lo + t * dev.intercept_interval->width();
    CHECK(std::abs(nu_objective(d, *dev.weights, b, 0.5, 0.1) - dev.error_form_objective) <= 1e-9);
  }
  CHECK(std::abs(dev.error_form_objective - nu.objective) <= 1e-6);
}

TEST_CASE("alpha = 0 gives L1 regression") {
  auto d = five_points();
  auto m = train(d, config(Formulation::NuPrimal, 0.0, Regularization::lambda(0.1)));
  double l1 = 0;
  for (int i = 0; i < 5; ++i) l1 += std::abs(d.targets[i] - (*m.weights)[0] * d.features(i, 0) - m.intercept);
  CHECK(m.objective == doctest::Approx(l1 / 5 + 0.05 * m.weights->squaredNorm()));
}

TEST_CASE("intercept_from_statistic") {
  auto [iv, b] = intercept_from_statistic(EmpiricalSample::equiprobable({1, 2, 3, 4}), 0.5);
  CHECK(iv == QuantileInterval{2, 3});
  CHECK(b == 2.5);
  CHECK(intercept_from_statistic(EmpiricalSample::equiprobable({-2, -1, 1, 2}), 0.3).second == 0.0);
  auto [m_iv, m_b] = intercept_from_statistic(EmpiricalSample::equiprobable({5, 1, 4, 2}), 0.0);
  CHECK(m_iv == QuantileInterval{2, 4});
  CHECK(m_b == 3.0);
}

TEST_CASE("dual: strong duality under the proposition scaling") {
  auto d = five_points();
  const double C = 1.0, alpha = 0.5;
  SvrConfig dual_cfg = config(Formulation::NuDual, alpha, Regularization::cap_c(C));
  dual_cfg.dual_scaling = DualScaling::Proposition;
  auto dual = train(d, dual_cfg);
  // p* = C (1 - alpha) cvar(|z|, alpha) + |w|^2 / 2 = C * nu-objective with lambda = 1 / C.
  auto primal = train(d, config(Formulation::NuPrimal, alpha, Regularization::lambda(1.0 / C)));
  double pstar = C * primal.objective;
  CHECK(std::abs(dual.objective - pstar) <= 1e-6);
  // Same pair under the case-study scaling: d* = C l p* with lambda = 1 / (C l).
  auto dual_cs = train(d, config(Formulation::NuDual, alpha, Regularization::cap_c(C)));
  auto primal_cs = train(d, config(Formulation::NuPrimal, alpha, Regularization::cap_c(C)));
  CHECK(primal_cs.lambda == doctest::Approx(1.0 / (C * 5)));
  CHECK(std::abs(dual_cs.objective - C * 5 * primal_cs.objective) <= 1e-6 * (1 + dual_cs.objective));
}

TEST_CASE("recover_primal_from_dual") {
  auto d = five_points();
  auto zero = recover_primal_from_dual(Vector::Zero(5), d, KernelSpec::linear(), 0.5);
  CHECK(zero.weights->norm() == 0.0);
  CHECK(zero.intercept == statistic_avg_quantiles(EmpiricalSample::equiprobable({0.1, 0.2, 0.9, 0.6, 1.3}), 0.5).midpoint());
  Vector mu(5);
  mu << 0.3, -0.1, 0.2, -0.5, 0.1;
  auto m = recover_primal_from_dual(mu, d, KernelSpec::linear(), 0.5);
  Vector expect = d.features.transpose() * mu;
  CHECK((*m.weights)[0] == expect[0]);
  // residual atoms are pre-intercept atoms minus b
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(m.residuals.values()[i] == m.pre_intercept_residuals.values()[i] - m.intercept);
}

TEST_CASE("eps_from_alpha and alpha_from_eps") {
  CHECK(eps_from_alpha(model_with_residuals({-1, 1}), 0.0) == QuantileInterval{1, 1});
  CHECK(eps_from_alpha(model_with_residuals({0, 0, 0}), 0.7) == QuantileInterval{0, 0});
  auto m = model_with_residuals({-1, 0.5, 2, -3});
  auto big = alpha_from_eps(m, 10.0);
  CHECK(big.interval.lo == 1.0);
  CHECK(big.interval.hi == 1.0);
  CHECK_FALSE(big.interval.hi_inclusive);
  CHECK(big.midpoint == 1.0);
  CHECK(big.degenerate);
  auto zero = alpha_from_eps(m, 0.0);
  CHECK(zero.interval.lo == 0.0);
  CHECK(zero.degenerate);
  auto at = alpha_from_eps(m, 1.0);
  CHECK(at.interval.lo == 0.25);
  CHECK(at.interval.hi == 0.5);
  CHECK(at.midpoint == 0.375);
  CHECK_FALSE(at.degenerate);
  CHECK_THROWS_AS(alpha_from_eps(m, -1.0), std::domain_error);
}

TEST_CASE("predict") {
  auto d = five_points();
  SvrModel zero;
  zero.weights = Vector::Zero(1);
  zero.intercept = 0.7;
  Vector x(1);
  x << 3.0;
  CHECK(predict(zero, x, d, KernelSpec::linear()) == 0.7);
  SvrModel lin;
  lin.weights = Vector::Constant(1, 2.0);
  lin.intercept = 1.0;
  CHECK(predict(lin, x, d, KernelSpec::linear()) == 7.0);
  Vector bad(2);
  CHECK_THROWS_AS(predict(lin, bad, d, KernelSpec::linear()), std::invalid_argument);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Vector mu(5);
  for (auto& v : mu) v = g(rng);
  SvrModel kern;
  kern.kernel = KernelSpec::rbf(1.0);
  kern.dual_coeffs = mu;
  kern.intercept = 0.2;
  Vector w = d.features.transpose() * mu;
  // kernel path with the linear kernel
  SvrModel only_mu;
  only_mu.dual_coeffs = mu;
  only_mu.intercept = 0.2;
  CHECK(predict(only_mu, x, d, KernelSpec::polynomial(1, 0.0)) == doctest::Approx(w[0] * 3.0 + 0.2));
  CHECK(std::isfinite(predict(kern, x, d, kern.kernel)));
}

TEST_CASE("configuration rules") {
  auto d = five_points();
  SvrConfig bad = config(Formulation::EpsPrimal, 0.3, Regularization::lambda(1));
  bad.parameter = SvrParameter::alpha(0.5);
  CHECK_THROWS_AS(train(d, bad), std::invalid_argument);
  SvrConfig bad2 = config(Formulation::NuDual, 0.5, Regularization::lambda(1));
  bad2.parameter = SvrParameter::epsilon(0.1);
  CHECK_THROWS_AS(train(d, bad2), std::invalid_argument);
  SvrConfig bad3 = config(Formulation::NuPrimal, 0.5, Regularization::lambda(1));
  bad3.kernel = KernelSpec::rbf(1.0);
  CHECK_THROWS_AS(train(d, bad3), std::invalid_argument);
  CHECK_THROWS_AS(train(d, config(Formulation::EpsPrimal, 0.6, Regularization::lambda(1))), std::domain_error);
  CHECK_THROWS_AS(train(d, config(Formulation::NuPrimal, 1.0, Regularization::lambda(1))), std::domain_error);
}

TEST_CASE("kernel dual trains and predicts") {
  std::mt19937_64 rng(8);
  auto d = random_dataset(rng, 30, 2);
  auto cfg = config(Formulation::NuDual, 0.5, Regularization::cap_c(1.0));
  cfg.kernel = KernelSpec::rbf(0.5);
  auto m = train(d, cfg);
  REQUIRE(m.dual_coeffs);
  CHECK_FALSE(m.weights);
  Vector f = fitted_without_intercept(m, d);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    CHECK(predict(m, d.features.row(i).transpose(), d, cfg.kernel) == doctest::Approx(f[i] + m.intercept));
  CHECK(std::abs(m.dual_coeffs->sum()) <= 1e-7);
}

TEST_CASE("property: cross-formulation agreement, round trip, intercept optimality") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    auto d = random_dataset(rng, 40 + 10 * trial, 1 + trial % 3);
    for (double alpha : {0.25, 0.5, 0.75}) {
      auto reg = Regularization::cap_c(1.0);
      auto nu = train(d, config(Formulation::NuPrimal, alpha, reg));
      auto dev = train(d, config(Formulation::NuDeviation, alpha, reg));
      auto dual = train(d, config(Formulation::NuDual, alpha, reg));
      CHECK((*nu.weights - *dev.weights).lpNorm<Eigen::Infinity>() <= 1e-3);
      CHECK((*nu.weights - *dual.weights).lpNorm<Eigen::Infinity>() <= 1e-3);
      // nu-primal may return any optimal intercept; the statistic-based ones take the midpoint.
      CHECK(dev.intercept_interval->contains(nu.intercept, 1e-3));
      CHECK(std::abs(dev.intercept - dual.intercept) <= 1e-3);
      const double tol = 1e-6 * (1 + nu.error_form_objective);
      CHECK(std::abs(nu.error_form_objective - dev.error_form_objective) <= tol);
      CHECK(std::abs(nu.error_form_objective - dual.error_form_objective) <= tol);

      // eps <-> alpha round trip
      double eps = nu.linked_eps.midpoint();
      auto em = train(d, config(Formulation::EpsPrimal, eps, reg));
      CHECK((*em.weights - *nu.weights).lpNorm<Eigen::Infinity>() <= 1e-3);
      // (w, b, eps) from the eps fit is jointly optimal for the nu problem
      CHECK(std::abs(nu_objective(d, *em.weights, em.intercept, alpha, em.lambda) - nu.objective) <= tol);
      // closure of the alpha interval; residuals on the tube edge sit at eps only to solver precision
      auto abs_em = em.residuals.abs();
      CHECK(alpha >= cdf_pair(abs_em, eps - 1e-6).first - 1e-9);
      CHECK(alpha <= cdf_pair(abs_em, eps + 1e-6).second + 1e-9);

      // moving b off the statistic interval increases the objective
      const auto& iv = *dev.intercept_interval;
      double base = nu_objective(d, *dev.weights, dev.intercept, alpha, dev.lambda);
      CHECK(nu_objective(d, *dev.weights, iv.hi + 1e-3, alpha, dev.lambda) > base);
      CHECK(nu_objective(d, *dev.weights, iv.lo - 1e-3, alpha, dev.lambda) > base);

      // nu-property
      const double nu_frac = 1 - alpha, l = static_cast<double>(d.size());
      const double C = *dual.cap_c;
      int at_bound = 0, outside = 0;
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (std::abs(std::abs((*dual.dual_coeffs)[i]) - C) <= 1e-6) ++at_bound;
        if (std::abs(nu.residuals.values()[static_cast<std::size_t>(i)]) > *nu.eps + 1e-7) ++outside;
      }
      CHECK(at_bound / l <= nu_frac + 2 / l);
      CHECK(outside / l <= nu_frac + 2 / l);
    }
  }
}

TEST_CASE("vapnik_intercept_set") {
  Vector z(4);
  z << 0, 1, 2, 3;
  CHECK(vapnik_intercept_set(z, 0.5) == QuantileInterval{1.5, 1.5});
  // the whole sample fits in the tube for any C in [max - eps, min + eps]
  CHECK(vapnik_intercept_set(z, 2.0) == QuantileInterval{1.0, 2.0});
  // eps = 0: median set
  CHECK(vapnik_intercept_set(z, 0.0) == QuantileInterval{1.0, 2.0});
}

TEST_CASE("primal intercepts: solver b is optimal and the midpoint is reported") {
  std::mt19937_64 rng(19);
  auto d = random_dataset(rng, 20, 1);
  auto nu = train(d, config(Formulation::NuPrimal, 0.6, Regularization::cap_c(1.0)));
  REQUIRE(nu.intercept_interval);
  CHECK(nu.intercept_interval->contains(nu.solver_intercept, 1e-6));
  CHECK(nu.intercept == nu.intercept_interval->midpoint());
  CHECK(std::abs(nu_objective(d, *nu.weights, nu.solver_intercept, 0.6, nu.lambda) - nu.objective) <= 1e-7);
  auto ep = train(d, config(Formulation::EpsPrimal, nu.linked_eps.midpoint(), Regularization::cap_c(1.0)));
  REQUIRE(ep.intercept_interval);
  CHECK(ep.intercept_interval->contains(ep.solver_intercept, 1e-6));
  CHECK(std::abs(eps_objective(d, *ep.weights, ep.solver_intercept, *ep.eps, ep.lambda) - ep.objective) <= 1e-7);
  auto dual = train(d, config(Formulation::NuDual, 0.6, Regularization::cap_c(1.0)));
  CHECK(std::isnan(dual.solver_intercept));
}
