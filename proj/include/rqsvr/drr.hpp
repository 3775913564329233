#pragma once

// Distributionally robust view of nu-SVR.
//
// For equiprobable residuals z the ambiguity set is
//   Q_alpha = {q : sum q = 1, 0 <= q_i <= 1 / (l (1 - alpha))}
// and max_{q in Q_alpha} sum q_i |z_i| = cvar(|z|, alpha), the scaled CVaR norm.
// The non-scaled norm used by nu-SVR is (1 - alpha) times that, so
//   (1 - alpha) cvar(|z|, alpha) + (lambda/2)|w|^2
// and
//   worst_case(z) + lambda_drr |w|^2,  lambda_drr = lambda / (2 (1 - alpha))
// have the same minimizers.

#include <stdexcept>
#include <variant>

#include "rqsvr/distribution.hpp"
#include "rqsvr/qp.hpp"
#include "rqsvr/svr.hpp"

namespace rqsvr {

struct WeightVector {
  Vector weights;
  double alpha = 0.0;

  double sum() const;
  Eigen::Index nonzeros() const;
};

/// Worst-case weights over Q_alpha. Levels above q+_alpha(|z|) get the cap
/// 1 / (l (1 - alpha)); the m atoms tied at it share (P_q - alpha) / (m (1 - alpha)).
/// Throws std::invalid_argument unless the residuals are equiprobable.
WeightVector optimal_weights(const EmpiricalSample& residuals, double alpha);

/// sum_i q_i |z_i| at optimal_weights; equals cvar(|z|, alpha).
double worst_case_objective(const EmpiricalSample& residuals, double alpha);

struct LpWorstCase {
  double value = 0.0;
  Vector weights;
  QpSolution solution;
};

/// Independent check: solve max q'|z| over Q_alpha as an LP with the QP engine.
LpWorstCase worst_case_lp(const EmpiricalSample& residuals, double alpha,
                          const QpSettings& settings = {});

/// floor(l (1 - alpha)), rounding l (1 - alpha) to the nearest integer first
/// when it is within 1e-9 of one.
Eigen::Index k_from_alpha(Eigen::Index l, double alpha);
/// True when l (1 - alpha) is an integer, up to the same rounding.
bool k_is_exact(Eigen::Index l, double alpha);

/// max over Q_k = {sum q = k, 0 <= q <= 1} of q'|z|: the sum of the k largest |z_i|.
double stable_regression_objective(const EmpiricalSample& residuals, Eigen::Index k);

double drr_lambda_from_svr(double lambda, double alpha);
/// worst_case(y - Xw - b) + lambda_drr |w|^2.
double drr_objective(const Dataset& d, const Vector& w, double b, double alpha, double lambda_drr);

struct LaplaceNoise {
  double location = 0.0;
  double scale = 1.0;  // density exp(-|x - location| / scale) / (2 scale)
};
struct GaussianNoise {
  double mean = 0.0;
  double sd = 1.0;
};
struct ShiftedExponentialNoise {
  double rate = 1.0;
  double shift = 0.0;  // shift + Exp(rate)
};
struct EmpiricalNoise {
  EmpiricalSample sample;
};

using NoiseModel = std::variant<LaplaceNoise, GaussianNoise, ShiftedExponentialNoise, EmpiricalNoise>;

/// Throws std::invalid_argument on a nonpositive scale, sd or rate.
void validate(const NoiseModel& noise);
double noise_mean(const NoiseModel& noise);
/// Quantile interval at p in [0, 1]; degenerate for the parametric laws on (0, 1).
QuantileInterval noise_quantile(const NoiseModel& noise, double p);
/// P(|e| <= x).
double noise_abs_cdf(const NoiseModel& noise, double x);
/// Laplace and Gaussian always; Empirical when its atoms mirror about the mean.
bool noise_is_symmetric(const NoiseModel& noise);

struct NoFeasibleAlpha : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AlphaSelection {
  double alpha = 0.0;       // root of the quantile-average condition (or the default)
  double alpha_star = 0.0;  // P(|e| <= eps)
  double nu = 0.0;          // 1 - alpha_star
  double eps = 0.0;         // half inter-quantile width at alpha
  bool symmetric = false;
};

/// Steps of the optimal-alpha recipe for a known noise law:
///   mu = E[e]; find alpha with q_{(1+a)/2} + q_{(1-a)/2} = 2 mu;
///   eps = (q_{(1+a)/2} - q_{(1-a)/2}) / 2; alpha* = P(|e| <= eps); nu = 1 - alpha*.
/// Symmetric laws skip the root search and use default_alpha. Parametric laws
/// are bisected to 1e-10 in alpha; empirical ones are scanned over the quantile
/// breakpoints with interval membership. Throws NoFeasibleAlpha without a root.
AlphaSelection select_alpha(const NoiseModel& noise, double default_alpha = 0.6);

/// q_{(1+a)/2} + q_{(1-a)/2} - 2 mu using interval midpoints.
double quantile_average_residual(const NoiseModel& noise, double alpha);

}  // namespace rqsvr
