#include "rqsvr/quadrangle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rqsvr {

namespace {

void check_open_alpha(double alpha, const char* what) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::domain_error(std::string(what) + ": alpha must lie in [0, 1)");
}

double magnitude(const EmpiricalSample& s) {
  return std::max({1.0, std::abs(s.min()), std::abs(s.max())});
}

struct AlphaTest {
  double lower_gap;  // (q-_{(1+a)/2} - q+_{(1-a)/2}) / 2
  double upper_gap;  // (q+_{(1+a)/2} - q-_{(1-a)/2}) / 2
};

AlphaTest gaps(const EmpiricalSample& s, double alpha) {
  auto left = quantile_interval(s, 0.5 * (1.0 - alpha));
  auto right = quantile_interval(s, 0.5 * (1.0 + alpha));
  return {0.5 * (right.lo - left.hi), 0.5 * (right.hi - left.lo)};
}

}  // namespace

bool EpsilonAlphaSet::contains(double alpha, double tol) const {
  return std::any_of(intervals.begin(), intervals.end(),
                     [&](const AlphaInterval& iv) { return iv.contains(alpha, tol); });
}

QuantileInterval statistic_avg_quantiles(const EmpiricalSample& s, double alpha) {
  check_open_alpha(alpha, "statistic_avg_quantiles");
  auto left = quantile_interval(s, 0.5 * (1.0 - alpha));
  auto right = quantile_interval(s, 0.5 * (1.0 + alpha));
  return (left + right).scaled(0.5);
}

double avg_cvar_risk(const EmpiricalSample& s, double alpha) {
  check_open_alpha(alpha, "avg_cvar_risk");
  return 0.5 * ((1.0 + alpha) * cvar(s, 0.5 * (1.0 - alpha)) +
                (1.0 - alpha) * cvar(s, 0.5 * (1.0 + alpha)));
}

QuadrangleQuartet cvar_norm_quadrangle(const EmpiricalSample& s, double alpha) {
  check_open_alpha(alpha, "cvar_norm_quadrangle");
  QuadrangleQuartet q;
  double mean = s.mean();
  q.risk = avg_cvar_risk(s, alpha);
  q.deviation = q.risk - mean;
  q.error = cvar_norm(s, alpha, false);
  q.regret = q.error + mean;
  q.statistic = {statistic_avg_quantiles(s, alpha)};
  q.parameter = {QuadrangleParameter::Kind::Alpha, alpha};
  return q;
}

EpsilonAlphaSet alpha_set(const EmpiricalSample& s, double eps) {
  double half_range = 0.5 * (s.max() - s.min());
  if (!(eps >= 0.0) || !(eps < half_range))
    throw EmptyAlphaSetError("alpha_set: eps must lie in [0, (max - min) / 2)");

  std::vector<double> bps{0.0};
  for (double f : s.cumulative()) {
    for (double b : {2.0 * f - 1.0, 1.0 - 2.0 * f})
      if (b > kProbabilityTolerance && b < 1.0 - kProbabilityTolerance) bps.push_back(b);
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end(),
                        [](double a, double b) { return b - a <= kProbabilityTolerance; }),
            bps.end());

  const double vtol = 1e-14 * magnitude(s);
  auto ok = [&](double a) {
    auto g = gaps(s, a);
    return g.lower_gap <= eps + vtol && eps <= g.upper_gap + vtol;
  };

  // Pieces alternate point, open segment, point, ... ending with (b_last, 1).
  EpsilonAlphaSet out;
  bool open = false;
  AlphaInterval cur;
  for (std::size_t i = 0; i < bps.size(); ++i) {
    double b = bps[i];
    double next = i + 1 < bps.size() ? bps[i + 1] : 1.0;
    bool point_in = ok(b);
    bool seg_in = ok(0.5 * (b + next));
    if (point_in) {
      if (!open) cur = {b, b, true}, open = true;
      cur.hi = b;
      cur.hi_inclusive = true;
    } else if (open) {
      out.intervals.push_back(cur);
      open = false;
    }
    if (seg_in) {
      if (!open) cur = {b, next, false}, open = true;
      cur.hi = next;
      cur.hi_inclusive = false;
    } else if (open) {
      out.intervals.push_back(cur);
      open = false;
    }
  }
  if (open) out.intervals.push_back(cur);
  if (out.intervals.empty())
    throw EmptyAlphaSetError("alpha_set: no alpha satisfies the quantile inequality");
  return out;
}

double qsa_alpha(const EmpiricalSample& s, double eps) {
  return alpha_set(s, eps).intervals.front().lo;
}

QuadrangleQuartet qsa_quadrangle(const EmpiricalSample& s, double eps) {
  double alpha = qsa_alpha(s, eps);
  double mean = s.mean();
  QuadrangleQuartet q;
  q.risk = avg_cvar_risk(s, alpha) - (1.0 - alpha) * eps;
  q.deviation = q.risk - mean;
  q.error = vapnik_error(s, eps);
  q.regret = q.error + mean;
  q.parameter = {QuadrangleParameter::Kind::Epsilon, eps};

  auto sa = statistic_avg_quantiles(s, alpha);
  std::vector<double> cands{sa.lo, sa.hi};
  for (double v : s.atoms())
    for (double c : {v - eps, v + eps})
      if (c > sa.lo && c < sa.hi) cands.push_back(c);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  std::size_t kinks = cands.size();
  for (std::size_t i = 0; i + 1 < kinks; ++i) cands.push_back(0.5 * (cands[i] + cands[i + 1]));

  // The rounding of v +- eps can push |v - C| one ulp across eps at a kink.
  const double delta = 1e-12 * std::max(magnitude(s), eps);
  auto atoms = s.atoms();
  auto masses = s.masses();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double c : cands) {
    double strict = 0.0, loose = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      double d = std::abs(atoms[j] - c);
      if (d < eps - delta) strict += masses[j];
      if (d <= eps + delta) loose += masses[j];
    }
    if (strict <= alpha + kProbabilityTolerance && loose >= alpha - kProbabilityTolerance) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  if (!(lo <= hi)) throw std::logic_error("qsa_quadrangle: saddle condition has no solution");
  q.statistic = {QuantileInterval{lo, hi}};
  return q;
}

bool statistic_contains_zero(const EmpiricalSample& s, double alpha, double tol) {
  if (!(tol >= 0.0)) throw std::domain_error("statistic_contains_zero: tol must be >= 0");
  return statistic_avg_quantiles(s, alpha).contains(0.0, tol);
}

bool IdentityReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.pass; });
}

double quadrangle_error(const EmpiricalSample& s, const QuadrangleParameter& p) {
  return p.kind == QuadrangleParameter::Kind::Alpha ? cvar_norm(s, p.value, false)
                                                    : vapnik_error(s, p.value);
}

IdentityReport check_quadrangle_identities(const EmpiricalSample& s,
                                           const QuadrangleQuartet& quartet,
                                           double tolerance) {
  const auto& param = quartet.parameter;
  const bool vapnik = param.kind == QuadrangleParameter::Kind::Epsilon;
  const double mean = s.mean();
  const double scale = std::max(magnitude(s), vapnik ? param.value : 0.0);

  auto atoms = s.atoms();
  std::vector<double> cands(atoms.begin(), atoms.end());
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j) cands.push_back(0.5 * (atoms[i] + atoms[j]));
  if (vapnik)
    for (double v : atoms) {
      cands.push_back(v - param.value);
      cands.push_back(v + param.value);
    }
  for (const auto& iv : quartet.statistic) {
    cands.push_back(iv.lo);
    cands.push_back(iv.hi);
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  std::vector<double> errs(cands.size()), risks(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double c = cands[i];
    auto shifted = s.shifted(-c);
    errs[i] = quadrangle_error(shifted, param);
    double regret = errs[i] + (mean - c);
    risks[i] = c + regret;
  }
  double dmin = *std::min_element(errs.begin(), errs.end());
  double rmin = *std::min_element(risks.begin(), risks.end());
  double arg_lo = std::numeric_limits<double>::infinity(), arg_hi = -arg_lo;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (errs[i] <= dmin + 1e-11 * scale) {
      arg_lo = std::min(arg_lo, cands[i]);
      arg_hi = std::max(arg_hi, cands[i]);
    }
  }
  double st_lo = std::numeric_limits<double>::infinity(), st_hi = -st_lo;
  for (const auto& iv : quartet.statistic) {
    st_lo = std::min(st_lo, iv.lo);
    st_hi = std::max(st_hi, iv.hi);
  }

  IdentityReport rep;
  rep.tolerance = tolerance;
  auto add = [&](std::string name, double residual) {
    double r = residual / scale;
    rep.checks.push_back({std::move(name), r, r <= tolerance});
  };
  add("deviation = min_C error(X - C)", std::abs(quartet.deviation - dmin));
  add("risk = min_C {C + regret(X - C)}", std::abs(quartet.risk - rmin));
  add("deviation = risk - mean", std::abs(quartet.deviation - (quartet.risk - mean)));
  add("error = regret - mean", std::abs(quartet.error - (quartet.regret - mean)));
  add("error recomputed", std::abs(quartet.error - quadrangle_error(s, param)));
  add("deviation >= 0", std::max(0.0, -quartet.deviation));
  add("error >= 0", std::max(0.0, -quartet.error));
  add("argmin_C error(X - C) = statistic",
      quartet.statistic.empty() ? std::numeric_limits<double>::infinity()
                                : std::max(std::abs(arg_lo - st_lo), std::abs(arg_hi - st_hi)));
  return rep;
}

}  // namespace rqsvr
