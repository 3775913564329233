#pragma once

// Quantile / CVaR calculus on finite weighted discrete distributions.
//
// Every random variable in the library is an EmpiricalSample: a list of atoms
// with strictly positive probabilities summing to one. All integrals become
// finite sums over the sorted, duplicate-merged atom ladder, so quantile
// intervals and superquantiles are computed exactly (up to rounding).

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace rqsvr {

// Absolute tolerance used when comparing a cumulative probability with a
// requested confidence level. Cumulative sums of non-equiprobable weights are
// not exact in floating point; this keeps alpha == F(atom) decisions stable.
inline constexpr double kProbabilityTolerance = 1e-12;

/// Closed real interval [lo, hi] housing a set-valued quantile.
struct QuantileInterval {
  double lo = 0.0;
  double hi = 0.0;

  double midpoint() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool degenerate() const { return lo == hi; }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }

  /// Minkowski sum.
  friend QuantileInterval operator+(const QuantileInterval& a, const QuantileInterval& b) {
    return {a.lo + b.lo, a.hi + b.hi};
  }
  /// Minkowski difference a - b = a + (-1) b.
  friend QuantileInterval operator-(const QuantileInterval& a, const QuantileInterval& b) {
    return {a.lo - b.hi, a.hi - b.lo};
  }
  /// Scaling by any real; a negative factor swaps the endpoints.
  QuantileInterval scaled(double factor) const {
    return factor >= 0 ? QuantileInterval{factor * lo, factor * hi}
                       : QuantileInterval{factor * hi, factor * lo};
  }
  QuantileInterval shifted(double c) const { return {lo + c, hi + c}; }

  friend bool operator==(const QuantileInterval&, const QuantileInterval&) = default;
};

/// Interval of probability levels. The lower end is always closed; the upper
/// end is open when hi_inclusive is false (e.g. the [P(|Z|<e), P(|Z|<=e)) set).
struct AlphaInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool hi_inclusive = true;

  bool empty() const { return hi < lo || (!hi_inclusive && hi == lo); }
  bool contains(double a, double tol = 0.0) const {
    if (a < lo - tol) return false;
    return hi_inclusive ? a <= hi + tol : a < hi + tol;
  }
  double midpoint() const { return 0.5 * (lo + hi); }

  friend bool operator==(const AlphaInterval&, const AlphaInterval&) = default;
};

/// Finite weighted discrete distribution.
///
/// The raw (input-order) atoms are retained so that callers can map results
/// back to observations; a canonical sorted ladder with merged duplicates and
/// cumulative probabilities is built once on construction.
class EmpiricalSample {
 public:
  /// Throws std::invalid_argument unless weights are strictly positive, sum to
  /// one within 1e-12, values are finite and the sample is nonempty.
  EmpiricalSample(std::vector<double> values, std::vector<double> weights);

  /// Atoms with probability 1/size each.
  static EmpiricalSample equiprobable(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return values_.size(); }
  bool is_equiprobable() const { return equiprobable_; }

  // Canonical ladder: strictly increasing atoms, their masses, and F(atom).
  std::span<const double> atoms() const { return ladder_->atoms; }
  std::span<const double> masses() const { return ladder_->masses; }
  std::span<const double> cumulative() const { return ladder_->cumulative; }

  /// Sorted, duplicate-merged form of this sample. Idempotent.
  EmpiricalSample canonical() const;
  bool is_canonical() const;

  double mean() const;
  double min() const { return ladder_->atoms.front(); }
  double max() const { return ladder_->atoms.back(); }

  /// |X|, X + c and lambda * X, keeping the observation order and weights.
  EmpiricalSample abs() const;
  EmpiricalSample shifted(double c) const;
  EmpiricalSample scaled(double lambda) const;

 private:
  struct Ladder {
    std::vector<double> atoms;
    std::vector<double> masses;
    std::vector<double> cumulative;
  };

  EmpiricalSample(std::vector<double> values, std::vector<double> weights, bool equiprobable);
  void build_ladder();

  std::vector<double> values_;
  std::vector<double> weights_;
  bool equiprobable_ = false;
  std::shared_ptr<const Ladder> ladder_;
};

/// (P(X < x), P(X <= x)).
std::pair<double, double> cdf_pair(const EmpiricalSample& s, double x);

/// [q-(alpha), q+(alpha)] with the essential inf/sup conventions at alpha = 0, 1.
QuantileInterval quantile_interval(const EmpiricalSample& s, double alpha);

/// Superquantile (CVaR) by exact summation of the tail of the quantile function.
/// cvar(s, 0) is the mean and cvar(s, 1) the largest atom.
double cvar(const EmpiricalSample& s, double alpha);

struct CvarMinimum {
  double value = 0.0;
  QuantileInterval argmin;
};

/// min_C { C + E[X - C]_+ / (1 - alpha) } evaluated over the atoms, for
/// alpha in (0, 1). The minimizer set is reported as the hull of the atoms that
/// attain the minimum.
CvarMinimum cvar_via_min(const EmpiricalSample& s, double alpha);

/// E[X - x]_+.
double mean_excess(const EmpiricalSample& s, double x);

struct CvarDualMaximum {
  double value = 0.0;
  AlphaInterval argmax;
};

/// max over alpha in [0, 1] of (1 - alpha)(cvar(s, alpha) - x). The objective is
/// piecewise linear in alpha with breakpoints at the cumulative probabilities,
/// so it is maximized over that finite grid.
CvarDualMaximum dual_cvar_max(const EmpiricalSample& s, double x);

/// Scaled norm cvar(|X|, alpha), or the non-scaled (1 - alpha) cvar(|X|, alpha).
/// The non-scaled version is undefined at alpha = 1.
double cvar_norm(const EmpiricalSample& s, double alpha, bool scaled);

/// E[|X| - eps]_+ (expected epsilon-insensitive loss).
double vapnik_error(const EmpiricalSample& s, double eps);

}  // namespace rqsvr
