#pragma once

// CVaR norm quadrangle and quantile symmetric average (Vapnik) quadrangle.

#include <stdexcept>
#include <string>
#include <vector>

#include "rqsvr/distribution.hpp"

namespace rqsvr {

struct QuadrangleParameter {
  enum class Kind { Alpha, Epsilon };
  Kind kind = Kind::Alpha;
  double value = 0.0;
};

struct QuadrangleQuartet {
  double risk = 0.0;
  double deviation = 0.0;
  double regret = 0.0;
  double error = 0.0;
  // Merged disjoint intervals sorted by lo.
  std::vector<QuantileInterval> statistic;
  QuadrangleParameter parameter;
};

struct EpsilonAlphaSet {
  std::vector<AlphaInterval> intervals;

  bool empty() const { return intervals.empty(); }
  bool contains(double alpha, double tol = 0.0) const;
};

/// Raised when eps lies outside [0, (max - min) / 2).
class EmptyAlphaSetError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// (q_{(1-a)/2} + q_{(1+a)/2}) / 2 as a Minkowski average of quantile intervals.
QuantileInterval statistic_avg_quantiles(const EmpiricalSample& s, double alpha);

/// R_a(X) = ((1+a) cvar_{(1-a)/2}(X) + (1-a) cvar_{(1+a)/2}(X)) / 2.
double avg_cvar_risk(const EmpiricalSample& s, double alpha);

QuadrangleQuartet cvar_norm_quadrangle(const EmpiricalSample& s, double alpha);

/// Every alpha in [0, 1) with
///   (q-_{(1+a)/2} - q+_{(1-a)/2}) / 2 <= eps <= (q+_{(1+a)/2} - q-_{(1-a)/2}) / 2,
/// found by testing each quantile breakpoint and each open segment between them.
EpsilonAlphaSet alpha_set(const EmpiricalSample& s, double eps);

/// Quadrangle generated by the Vapnik error E[|X| - eps]_+.
///
/// The statistic is argmin_C E[|X - C| - eps]_+, computed from the saddle-point
/// condition C in S_a(X), a in [P(|X - C| < eps), P(|X - C| <= eps)] for a
/// representative a of alpha_set. For discrete samples this can be strictly
/// smaller than the union of S_a over the whole set.
QuadrangleQuartet qsa_quadrangle(const EmpiricalSample& s, double eps);

/// Representative alpha (lower end of the first interval of alpha_set).
double qsa_alpha(const EmpiricalSample& s, double eps);

bool statistic_contains_zero(const EmpiricalSample& s, double alpha, double tol);

struct IdentityCheck {
  std::string name;
  double residual = 0.0;
  bool pass = false;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  double tolerance = 1e-8;

  bool all_pass() const;
};

/// Error functional of the quartet's quadrangle evaluated at X.
double quadrangle_error(const EmpiricalSample& s, const QuadrangleParameter& p);

/// Relationship formulae checked against an exact finite minimization over C.
/// Candidate C values: atoms, pairwise atom midpoints, atoms +- eps for the
/// Vapnik quadrangle, and the statistic endpoints. The error is piecewise linear
/// in C with kinks in that set, so the minimum and the hull of the minimizers
/// are exact. Residuals are scaled by max(1, max |atom|).
IdentityReport check_quadrangle_identities(const EmpiricalSample& s,
                                           const QuadrangleQuartet& quartet,
                                           double tolerance = 1e-8);

}  // namespace rqsvr
