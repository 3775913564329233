#include "rqsvr/drr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "rqsvr/quadrangle.hpp"

namespace rqsvr {

using Eigen::Index;

double WeightVector::sum() const { return weights.sum(); }

Index WeightVector::nonzeros() const { return (weights.array() != 0.0).count(); }

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in [0, 1)");
}

void check_equiprobable(const EmpiricalSample& s) {
  if (s.is_equiprobable()) return;
  const double w0 = 1.0 / static_cast<double>(s.size());
  for (double w : s.weights())
    if (std::abs(w - w0) > kProbabilityTolerance)
      throw std::invalid_argument("residuals must be equiprobable");
}

Vector abs_values(const EmpiricalSample& s) {
  Vector a(static_cast<Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) a[static_cast<Index>(i)] = std::abs(s.values()[i]);
  return a;
}

}  // namespace

WeightVector optimal_weights(const EmpiricalSample& residuals, double alpha) {
  check_alpha(alpha);
  check_equiprobable(residuals);
  const Vector z = abs_values(residuals);
  const Index l = z.size();
  const double ld = static_cast<double>(l);
  const double q = quantile_interval(residuals.abs(), alpha).hi;

  Index at = 0, at_or_below = 0;
  for (double v : z) {
    if (v == q) ++at;
    if (v <= q) ++at_or_below;
  }
  const double cap = 1.0 / (ld * (1.0 - alpha));
  const double tie = (static_cast<double>(at_or_below) / ld - alpha) /
                     (static_cast<double>(at) * (1.0 - alpha));

  WeightVector out;
  out.alpha = alpha;
  out.weights.resize(l);
  for (Index i = 0; i < l; ++i) out.weights[i] = z[i] > q ? cap : z[i] == q ? tie : 0.0;
  return out;
}

double worst_case_objective(const EmpiricalSample& residuals, double alpha) {
  return optimal_weights(residuals, alpha).weights.dot(abs_values(residuals));
}

LpWorstCase worst_case_lp(const EmpiricalSample& residuals, double alpha,
                          const QpSettings& settings) {
  check_alpha(alpha);
  check_equiprobable(residuals);
  const Vector z = abs_values(residuals);
  const Index l = z.size();
  const double cap = 1.0 / (static_cast<double>(l) * (1.0 - alpha));

  QpBuilder b(l);
  std::vector<std::pair<Index, double>> ones;
  for (Index i = 0; i < l; ++i) {
    b.add_linear(i, -z[i]);
    b.add_inequality({{i, -1.0}}, 0.0);
    b.add_inequality({{i, 1.0}}, cap);
    ones.emplace_back(i, 1.0);
  }
  b.add_equality(ones, 1.0);

  LpWorstCase out;
  out.solution = solve_qp(b.build(), settings);
  out.weights = out.solution.x;
  out.value = -out.solution.objective;
  return out;
}

namespace {

double snapped_count(Index l, double alpha) {
  double x = static_cast<double>(l) * (1.0 - alpha);
  double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : x;
}

}  // namespace

Index k_from_alpha(Index l, double alpha) {
  if (l < 1) throw std::invalid_argument("k_from_alpha: l must be positive");
  check_alpha(alpha);
  return static_cast<Index>(std::floor(snapped_count(l, alpha)));
}

bool k_is_exact(Index l, double alpha) {
  double x = snapped_count(l, alpha);
  return x == std::floor(x);
}

double stable_regression_objective(const EmpiricalSample& residuals, Index k) {
  Vector z = abs_values(residuals);
  if (k < 0 || k > z.size()) throw std::invalid_argument("stable regression: k outside [0, l]");
  std::sort(z.begin(), z.end(), std::greater<>());
  return z.head(k).sum();
}

double drr_lambda_from_svr(double lambda, double alpha) {
  check_alpha(alpha);
  return lambda / (2.0 * (1.0 - alpha));
}

double drr_objective(const Dataset& d, const Vector& w, double b, double alpha, double lambda_drr) {
  Vector z = (d.targets - d.features * w).array() - b;
  auto s = EmpiricalSample::equiprobable(std::vector<double>(z.data(), z.data() + z.size()));
  return worst_case_objective(s, alpha) + lambda_drr * w.squaredNorm();
}

// Noise laws

void validate(const NoiseModel& noise) {
  std::visit(
      [](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
        if constexpr (std::is_same_v<T, LaplaceNoise>) {
          if (!positive(n.scale) || !std::isfinite(n.location))
            throw std::invalid_argument("laplace noise: scale must be positive");
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (!positive(n.sd) || !std::isfinite(n.mean))
            throw std::invalid_argument("gaussian noise: sd must be positive");
        } else if constexpr (std::is_same_v<T, ShiftedExponentialNoise>) {
          if (!positive(n.rate) || !std::isfinite(n.shift))
            throw std::invalid_argument("shifted exponential noise: rate must be positive");
        }
      },
      noise);
}

double noise_mean(const NoiseModel& noise) {
  return std::visit(
      [](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LaplaceNoise>) return n.location;
        else if constexpr (std::is_same_v<T, GaussianNoise>) return n.mean;
        else if constexpr (std::is_same_v<T, ShiftedExponentialNoise>) return n.shift + 1.0 / n.rate;
        else return n.sample.mean();
      },
      noise);
}

QuantileInterval noise_quantile(const NoiseModel& noise, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile level outside [0, 1]");
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      [p](const auto& n) -> QuantileInterval {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, EmpiricalNoise>) {
          return quantile_interval(n.sample, p);
        } else {
          double v;
          if constexpr (std::is_same_v<T, LaplaceNoise>) {
            if (p == 0.0) v = -inf;
            else if (p == 1.0) v = inf;
            else v = p < 0.5 ? n.location + n.scale * std::log(2.0 * p)
                             : n.location - n.scale * std::log(2.0 * (1.0 - p));
          } else if constexpr (std::is_same_v<T, GaussianNoise>) {
            if (p == 0.0) v = -inf;
            else if (p == 1.0) v = inf;
            else v = boost::math::quantile(boost::math::normal(n.mean, n.sd), p);
          } else {
            v = p == 1.0 ? inf : n.shift - std::log1p(-p) / n.rate;
          }
          return {v, v};
        }
      },
      noise);
}

double noise_abs_cdf(const NoiseModel& noise, double x) {
  if (x < 0.0) return 0.0;
  return std::visit(
      [x](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LaplaceNoise>) {
          auto F = [&](double t) {
            double u = (t - n.location) / n.scale;
            return u < 0 ? 0.5 * std::exp(u) : 1.0 - 0.5 * std::exp(-u);
          };
          return F(x) - F(-x);
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          boost::math::normal g(n.mean, n.sd);
          return boost::math::cdf(g, x) - boost::math::cdf(g, -x);
        } else if constexpr (std::is_same_v<T, ShiftedExponentialNoise>) {
          auto F = [&](double t) { return t <= n.shift ? 0.0 : -std::expm1(-n.rate * (t - n.shift)); };
          return F(x) - F(-x);
        } else {
          return cdf_pair(n.sample.abs(), x).second;
        }
      },
      noise);
}

bool noise_is_symmetric(const NoiseModel& noise) {
  const auto* e = std::get_if<EmpiricalNoise>(&noise);
  if (!e) return !std::holds_alternative<ShiftedExponentialNoise>(noise);
  const auto& atoms = e->sample.atoms();
  const auto& masses = e->sample.masses();
  const double mu = e->sample.mean();
  const double scale = std::max({1.0, std::abs(e->sample.min()), std::abs(e->sample.max())});
  const std::size_t k = atoms.size();
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = k - 1 - i;
    if (std::abs(atoms[i] + atoms[j] - 2.0 * mu) > 1e-12 * scale) return false;
    if (std::abs(masses[i] - masses[j]) > kProbabilityTolerance) return false;
  }
  return true;
}

double quantile_average_residual(const NoiseModel& noise, double alpha) {
  check_alpha(alpha);
  return noise_quantile(noise, 0.5 * (1.0 + alpha)).midpoint() +
         noise_quantile(noise, 0.5 * (1.0 - alpha)).midpoint() - 2.0 * noise_mean(noise);
}

namespace {

double bisect_root(const NoiseModel& noise) {
  double lo = 0.0, hi = 1.0 - 1e-12;
  double glo = quantile_average_residual(noise, lo);
  double ghi = quantile_average_residual(noise, hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if ((glo > 0) == (ghi > 0) || !std::isfinite(glo) || !std::isfinite(ghi))
    throw NoFeasibleAlpha("no alpha in [0, 1) equates the quantile average with the mean");
  while (hi - lo > 1e-10) {
    double mid = 0.5 * (lo + hi);
    double g = quantile_average_residual(noise, mid);
    if (g == 0.0) return mid;
    if ((g > 0) == (glo > 0)) {
      lo = mid;
      glo = g;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Smallest alpha whose statistic interval contains the mean. Quantiles are
// constant between breakpoints 2F - 1 and 1 - 2F, so testing every breakpoint
// and one point inside every gap is exhaustive.
double scan_empirical_root(const EmpiricalSample& s) {
  const double mu = s.mean();
  const double scale = std::max({1.0, std::abs(s.min()), std::abs(s.max())});
  std::vector<double> pts{0.0};
  for (double F : s.cumulative())
    for (double a : {2.0 * F - 1.0, 1.0 - 2.0 * F})
      if (a > 0.0 && a < 1.0) pts.push_back(a);
  pts.push_back(1.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    for (double a : {pts[i], 0.5 * (pts[i] + pts[i + 1])})
      if (statistic_avg_quantiles(s, a).contains(mu, 1e-12 * scale)) return a;
  throw NoFeasibleAlpha("no alpha in [0, 1) puts the mean in the quantile-average interval");
}

}  // namespace

AlphaSelection select_alpha(const NoiseModel& noise, double default_alpha) {
  validate(noise);
  check_alpha(default_alpha);
  AlphaSelection out;
  out.symmetric = noise_is_symmetric(noise);
  if (out.symmetric) {
    out.alpha = default_alpha;
  } else if (const auto* e = std::get_if<EmpiricalNoise>(&noise)) {
    out.alpha = scan_empirical_root(e->sample);
  } else {
    out.alpha = bisect_root(noise);
  }
  out.eps = 0.5 * (noise_quantile(noise, 0.5 * (1.0 + out.alpha)).midpoint() -
                   noise_quantile(noise, 0.5 * (1.0 - out.alpha)).midpoint());
  out.alpha_star = noise_abs_cdf(noise, out.eps);
  out.nu = 1.0 - out.alpha_star;
  return out;
}

}  // namespace rqsvr
