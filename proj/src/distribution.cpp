#include "rqsvr/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rqsvr {

namespace {

void check_alpha(double alpha, const char* what) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::domain_error(std::string(what) + ": alpha must lie in [0, 1], got " +
                            std::to_string(alpha));
}

// Neumaier-compensated sum.
double stable_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

EmpiricalSample::EmpiricalSample(std::vector<double> values, std::vector<double> weights)
    : EmpiricalSample(std::move(values), std::move(weights), false) {}

EmpiricalSample::EmpiricalSample(std::vector<double> values, std::vector<double> weights,
                                 bool equiprobable)
    : values_(std::move(values)), weights_(std::move(weights)), equiprobable_(equiprobable) {
  if (values_.empty()) throw std::invalid_argument("EmpiricalSample: no atoms");
  if (values_.size() != weights_.size())
    throw std::invalid_argument("EmpiricalSample: values and weights differ in length");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalSample: non-finite value");
  for (double w : weights_)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("EmpiricalSample: weights must be strictly positive");
  if (!equiprobable_) {
    double total = stable_sum(weights_);
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("EmpiricalSample: weights sum to " + std::to_string(total) +
                                  ", expected 1");
    equiprobable_ = std::all_of(weights_.begin(), weights_.end(),
                                [&](double w) { return w == weights_.front(); });
  }
  build_ladder();
}

EmpiricalSample EmpiricalSample::equiprobable(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("EmpiricalSample: no atoms");
  std::vector<double> w(values.size(), 1.0 / static_cast<double>(values.size()));
  return EmpiricalSample(std::move(values), std::move(w), true);
}

void EmpiricalSample::build_ladder() {
  const std::size_t k = values_.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values_[a] < values_[b]; });

  auto ladder = std::make_shared<Ladder>();
  std::vector<std::size_t> counts;
  for (std::size_t idx : order) {
    double v = values_[idx];
    if (!ladder->atoms.empty() && ladder->atoms.back() == v) {
      ladder->masses.back() += weights_[idx];
      counts.back() += 1;
    } else {
      ladder->atoms.push_back(v);
      ladder->masses.push_back(weights_[idx]);
      counts.push_back(1);
    }
  }

  const std::size_t m = ladder->atoms.size();
  ladder->cumulative.resize(m);
  if (equiprobable_) {
    // count / k is exact enough to make alpha == F(atom) tests reliable.
    std::size_t running = 0;
    for (std::size_t j = 0; j < m; ++j) {
      running += counts[j];
      ladder->masses[j] = static_cast<double>(counts[j]) / static_cast<double>(k);
      ladder->cumulative[j] = static_cast<double>(running) / static_cast<double>(k);
    }
  } else {
    double sum = 0.0, comp = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double x = ladder->masses[j];
      double t = sum + x;
      if (std::abs(sum) >= std::abs(x))
        comp += (sum - t) + x;
      else
        comp += (x - t) + sum;
      sum = t;
      ladder->cumulative[j] = std::min(1.0, sum + comp);
    }
    ladder->cumulative.back() = 1.0;
  }
  ladder_ = std::move(ladder);
}

EmpiricalSample EmpiricalSample::canonical() const {
  std::vector<double> a(ladder_->atoms), m(ladder_->masses);
  bool eq = std::all_of(m.begin(), m.end(), [&](double w) { return w == m.front(); });
  return EmpiricalSample(std::move(a), std::move(m), eq);
}

bool EmpiricalSample::is_canonical() const {
  if (values_.size() != ladder_->atoms.size()) return false;
  return std::equal(values_.begin(), values_.end(), ladder_->atoms.begin());
}

double EmpiricalSample::mean() const {
  std::vector<double> terms(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) terms[i] = values_[i] * weights_[i];
  return stable_sum(terms);
}

EmpiricalSample EmpiricalSample::abs() const {
  std::vector<double> v(values_);
  for (double& x : v) x = std::abs(x);
  return EmpiricalSample(std::move(v), weights_, equiprobable_);
}

EmpiricalSample EmpiricalSample::shifted(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x += c;
  return EmpiricalSample(std::move(v), weights_, equiprobable_);
}

EmpiricalSample EmpiricalSample::scaled(double lambda) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= lambda;
  return EmpiricalSample(std::move(v), weights_, equiprobable_);
}

std::pair<double, double> cdf_pair(const EmpiricalSample& s, double x) {
  auto atoms = s.atoms();
  auto cum = s.cumulative();
  auto it = std::lower_bound(atoms.begin(), atoms.end(), x);
  std::size_t j = static_cast<std::size_t>(it - atoms.begin());
  double below = j == 0 ? 0.0 : cum[j - 1];
  double upto = (it != atoms.end() && *it == x) ? cum[j] : below;
  return {below, upto};
}

QuantileInterval quantile_interval(const EmpiricalSample& s, double alpha) {
  check_alpha(alpha, "quantile_interval");
  auto atoms = s.atoms();
  auto cum = s.cumulative();
  const std::size_t m = atoms.size();
  if (alpha == 0.0) return {atoms.front(), atoms.front()};
  if (alpha == 1.0) return {atoms.back(), atoms.back()};

  // q-: sup{x : F(x) < alpha} is the first atom with F >= alpha.
  // q+: inf{x : F(x) > alpha} is the first atom with F > alpha.
  std::size_t lo = 0;
  while (lo + 1 < m && cum[lo] < alpha - kProbabilityTolerance) ++lo;
  std::size_t hi = lo;
  while (hi + 1 < m && cum[hi] <= alpha + kProbabilityTolerance) ++hi;
  return {atoms[lo], atoms[hi]};
}

double cvar(const EmpiricalSample& s, double alpha) {
  check_alpha(alpha, "cvar");
  if (alpha == 1.0) return s.max();
  if (alpha == 0.0) return s.mean();
  auto atoms = s.atoms();
  auto masses = s.masses();
  auto cum = s.cumulative();
  std::vector<double> terms;
  terms.reserve(atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    double left = j == 0 ? 0.0 : cum[j - 1];
    if (cum[j] <= alpha + kProbabilityTolerance) continue;
    double len = left >= alpha ? masses[j] : cum[j] - alpha;
    terms.push_back(atoms[j] * len);
  }
  return stable_sum(terms) / (1.0 - alpha);
}

double mean_excess(const EmpiricalSample& s, double x) {
  auto atoms = s.atoms();
  auto masses = s.masses();
  std::vector<double> terms;
  for (std::size_t j = 0; j < atoms.size(); ++j)
    if (atoms[j] > x) terms.push_back(masses[j] * (atoms[j] - x));
  return stable_sum(terms);
}

CvarMinimum cvar_via_min(const EmpiricalSample& s, double alpha) {
  check_alpha(alpha, "cvar_via_min");
  if (alpha == 0.0 || alpha == 1.0)
    throw std::domain_error("cvar_via_min: alpha must lie in (0, 1)");
  auto atoms = s.atoms();
  auto masses = s.masses();
  const std::size_t m = atoms.size();

  // Suffix sums give E[X - v_j]_+ for every atom in one pass:
  // E[X - v_j]_+ = sum_{i>j} m_i v_i - v_j sum_{i>j} m_i.
  std::vector<double> mass_above(m, 0.0), moment_above(m, 0.0);
  for (std::size_t j = m - 1; j-- > 0;) {
    mass_above[j] = mass_above[j + 1] + masses[j + 1];
    moment_above[j] = moment_above[j + 1] + masses[j + 1] * atoms[j + 1];
  }
  std::vector<double> vals(m);
  for (std::size_t j = 0; j < m; ++j) {
    double excess = std::max(0.0, moment_above[j] - atoms[j] * mass_above[j]);
    vals[j] = atoms[j] + excess / (1.0 - alpha);
  }
  double best = *std::min_element(vals.begin(), vals.end());
  double scale = std::max({1.0, std::abs(atoms.front()), std::abs(atoms.back())});
  double tol = 1e-12 * scale;
  CvarMinimum out;
  out.value = best;
  bool found = false;
  for (std::size_t j = 0; j < m; ++j) {
    if (vals[j] <= best + tol) {
      if (!found) out.argmin.lo = atoms[j];
      out.argmin.hi = atoms[j];
      found = true;
    }
  }
  return out;
}

CvarDualMaximum dual_cvar_max(const EmpiricalSample& s, double x) {
  auto atoms = s.atoms();
  auto masses = s.masses();
  auto cum = s.cumulative();
  const std::size_t m = atoms.size();

  // g(alpha) = (1 - alpha)(cvar(alpha) - x) is the integral of q(p) - x over
  // [alpha, 1], linear between consecutive cumulative levels. levels[j] is the
  // cumulative probability below atom j and values[j] the tail integral there.
  std::vector<double> levels(m + 1), values(m + 1);
  levels[m] = 1.0;
  values[m] = 0.0;
  double tail = 0.0, comp = 0.0;
  for (std::size_t j = m; j-- > 0;) {
    double term = masses[j] * (atoms[j] - x);
    double t = tail + term;
    comp += std::abs(tail) >= std::abs(term) ? (tail - t) + term : (term - t) + tail;
    tail = t;
    levels[j] = j == 0 ? 0.0 : cum[j - 1];
    values[j] = tail + comp;
  }
  double best = *std::max_element(values.begin(), values.end());
  double scale = std::max({1.0, std::abs(x), std::abs(atoms.front()), std::abs(atoms.back())});
  double tol = 1e-12 * scale;

  CvarDualMaximum out;
  out.value = best;
  bool found = false;
  for (std::size_t j = 0; j <= m; ++j) {
    if (values[j] >= best - tol) {
      if (!found) out.argmax.lo = levels[j];
      out.argmax.hi = levels[j];
      found = true;
    }
  }
  out.argmax.hi_inclusive = true;
  return out;
}

double cvar_norm(const EmpiricalSample& s, double alpha, bool scaled) {
  check_alpha(alpha, "cvar_norm");
  if (!scaled && alpha == 1.0)
    throw std::domain_error("cvar_norm: non-scaled norm is undefined at alpha = 1");
  double v = cvar(s.abs(), alpha);
  return scaled ? v : (1.0 - alpha) * v;
}

double vapnik_error(const EmpiricalSample& s, double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps))
    throw std::domain_error("vapnik_error: eps must be nonnegative");
  return mean_excess(s.abs(), eps);
}

}  // namespace rqsvr
