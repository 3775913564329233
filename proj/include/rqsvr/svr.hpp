#pragma once

// Support vector regression in four equivalent forms:
//
//   EpsPrimal    E[|Z| - eps]_+ + (lambda/2)|w|^2
//   NuPrimal     (1 - alpha) cvar(|Z|, alpha) + (lambda/2)|w|^2
//   NuDeviation  D_alpha(Y - w'X) + (lambda/2)|w|^2, intercept from the statistic
//   NuDual       max mu'y - mu'K mu / 2 over an l1 ball and a box, mu'1 = 0
//
// lambda always multiplies |w|^2 / 2. A regularization given as C maps to
// lambda = 1 / (C l): with that penalty the primal is equivalent to the dual
// with box C and l1 bound C l (1 - alpha).

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "rqsvr/distribution.hpp"
#include "rqsvr/kernel.hpp"
#include "rqsvr/qp.hpp"

namespace rqsvr {

struct Dataset {
  Matrix features;  // l x n
  Vector targets;   // l

  /// Throws std::invalid_argument unless l >= 2, sizes agree and all entries are finite.
  Dataset(Matrix features, Vector targets);

  Eigen::Index size() const { return targets.size(); }
  Eigen::Index dimension() const { return features.cols(); }

  /// FNV-1a hash of the dimensions and the raw bytes of features and targets.
  std::uint64_t fingerprint() const;
};

enum class Formulation { EpsPrimal, NuPrimal, NuDeviation, NuDual };
const char* to_string(Formulation f);
Formulation parse_formulation(const std::string& text);

enum class DualScaling {
  CaseStudy,    // box C, l1 bound C l (1 - alpha)  <=> lambda = 1 / (C l)
  Proposition,  // box C / l, l1 bound C (1 - alpha) <=> lambda = 1 / C
};

struct SvrParameter {
  enum class Kind { Alpha, Epsilon };
  Kind kind = Kind::Alpha;
  double value = 0.0;

  static SvrParameter alpha(double a) { return {Kind::Alpha, a}; }
  static SvrParameter epsilon(double e) { return {Kind::Epsilon, e}; }
};

struct Regularization {
  enum class Kind { Lambda, CapC };
  Kind kind = Kind::CapC;
  double value = 1.0;

  static Regularization lambda(double v) { return {Kind::Lambda, v}; }
  static Regularization cap_c(double v) { return {Kind::CapC, v}; }
};

struct SvrConfig {
  SvrParameter parameter;
  Regularization regularization;
  Formulation formulation = Formulation::NuPrimal;
  KernelSpec kernel;
  DualScaling dual_scaling = DualScaling::CaseStudy;
  QpSettings qp;
};

/// Canonical lambda (coefficient of |w|^2 / 2) implied by a regularization.
double canonical_lambda(const Regularization& r, Eigen::Index l,
                        DualScaling scaling = DualScaling::CaseStudy);
/// C implied by a regularization for the given dual scaling.
double canonical_c(const Regularization& r, Eigen::Index l,
                   DualScaling scaling = DualScaling::CaseStudy);

struct AlphaLink {
  AlphaInterval interval;  // [P(|Z| < eps), P(|Z| <= eps))
  double midpoint = 0.0;
  bool degenerate = false;
};

struct SvrModel {
  Formulation formulation = Formulation::NuPrimal;
  KernelSpec kernel;
  DualScaling dual_scaling = DualScaling::CaseStudy;

  std::optional<Vector> weights;       // linear models
  std::optional<Vector> dual_coeffs;   // NuDual
  double intercept = 0.0;  // midpoint of intercept_interval
  // Optimal intercepts for the fitted w: the statistic for the alpha forms,
  // argmin_C E[|Z - C| - eps]_+ for EpsPrimal.
  std::optional<QuantileInterval> intercept_interval;
  double solver_intercept = std::numeric_limits<double>::quiet_NaN();  // b returned by the primal QP; NaN when it has none

  EmpiricalSample residuals = EmpiricalSample::equiprobable({0.0});
  EmpiricalSample pre_intercept_residuals = EmpiricalSample::equiprobable({0.0});

  QuantileInterval linked_eps;
  AlphaLink linked_alpha;

  std::optional<double> alpha;
  std::optional<double> eps;  // given eps (EpsPrimal) or the optimal eps variable (NuPrimal)
  double lambda = 0.0;
  std::optional<double> cap_c;

  /// Objective recomputed from (w, b) or mu: the primal objective of the
  /// formulation, or the dual objective (maximized) for NuDual.
  double objective = 0.0;
  /// (1 - alpha) cvar(|Z|, alpha) + (lambda/2)|w|^2 at the model, for every
  /// alpha-parameterized formulation; the common yardstick for comparisons.
  /// NaN for EpsPrimal.
  double error_form_objective = 0.0;
  double solver_objective = 0.0;

  QpStatus status = QpStatus::Optimal;
  double kkt_residual = 0.0;
  int iterations = 0;
  double solve_seconds = 0.0;
  std::uint64_t fingerprint = 0;
};

ConvexQp build_eps_primal_qp(const Dataset& d, double eps, double lambda);
ConvexQp build_nu_primal_qp(const Dataset& d, double alpha, double lambda);
ConvexQp build_deviation_qp(const Dataset& d, double alpha, double lambda);
ConvexQp build_dual_qp(const Dataset& d, double alpha, double cap_c, const KernelSpec& kernel,
                       DualScaling scaling = DualScaling::CaseStudy);

/// argmin over C of E[|z - C| - eps]_+ for the pre-intercept residuals z.
QuantileInterval vapnik_intercept_set(const Vector& pre_intercept_residuals, double eps);

/// (statistic_avg_quantiles(z, alpha), its midpoint).
std::pair<QuantileInterval, double> intercept_from_statistic(const EmpiricalSample& z,
                                                             double alpha);

SvrModel recover_primal_from_dual(const Vector& mu, const Dataset& d, const KernelSpec& kernel,
                                  double alpha);

QuantileInterval eps_from_alpha(const SvrModel& model, double alpha);
AlphaLink alpha_from_eps(const SvrModel& model, double eps);

/// f(x) without intercept for every training row.
Vector fitted_without_intercept(const SvrModel& model, const Dataset& d);

SvrModel train(const Dataset& d, const SvrConfig& cfg);

double predict(const SvrModel& model, const Eigen::Ref<const Vector>& x, const Dataset& d_train,
               const KernelSpec& kernel);

/// E[|Z| - eps]_+ + (lambda/2)|w|^2 with Z = y - w'x - b.
double eps_objective(const Dataset& d, const Vector& w, double b, double eps, double lambda);
/// (1 - alpha) cvar(|Z|, alpha) + (lambda/2)|w|^2.
double nu_objective(const Dataset& d, const Vector& w, double b, double alpha, double lambda);
/// mu'y - mu'K mu / 2.
double dual_objective(const Vector& mu, const Vector& y, const Matrix& K);

}  // namespace rqsvr
