#include "rqsvr/svr.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "rqsvr/quadrangle.hpp"

namespace rqsvr {

using Index = Eigen::Index;

Dataset::Dataset(Matrix f, Vector t) : features(std::move(f)), targets(std::move(t)) {
  if (targets.size() < 2) throw std::invalid_argument("Dataset: need at least two observations");
  if (features.rows() != targets.size())
    throw std::invalid_argument("Dataset: features and targets differ in length");
  if (features.cols() < 1) throw std::invalid_argument("Dataset: need at least one feature");
  if (!features.allFinite() || !targets.allFinite())
    throw std::invalid_argument("Dataset: non-finite entry");
}

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  std::int64_t dims[2] = {static_cast<std::int64_t>(features.rows()),
                          static_cast<std::int64_t>(features.cols())};
  mix(dims, sizeof dims);
  mix(features.data(), sizeof(double) * static_cast<std::size_t>(features.size()));
  mix(targets.data(), sizeof(double) * static_cast<std::size_t>(targets.size()));
  return h;
}

const char* to_string(Formulation f) {
  switch (f) {
    case Formulation::EpsPrimal: return "eps-primal";
    case Formulation::NuPrimal: return "nu-primal";
    case Formulation::NuDeviation: return "nu-deviation";
    case Formulation::NuDual: return "nu-dual";
  }
  return "unknown";
}

Formulation parse_formulation(const std::string& text) {
  for (auto f : {Formulation::EpsPrimal, Formulation::NuPrimal, Formulation::NuDeviation,
                 Formulation::NuDual})
    if (text == to_string(f)) return f;
  throw std::invalid_argument("unknown formulation '" + text +
                              "' (expected eps-primal, nu-primal, nu-deviation or nu-dual)");
}

double canonical_lambda(const Regularization& r, Index l, DualScaling scaling) {
  if (!(r.value > 0.0) || !std::isfinite(r.value))
    throw std::invalid_argument("regularization must be positive");
  if (r.kind == Regularization::Kind::Lambda) return r.value;
  return scaling == DualScaling::CaseStudy ? 1.0 / (r.value * static_cast<double>(l))
                                           : 1.0 / r.value;
}

double canonical_c(const Regularization& r, Index l, DualScaling scaling) {
  if (!(r.value > 0.0) || !std::isfinite(r.value))
    throw std::invalid_argument("regularization must be positive");
  if (r.kind == Regularization::Kind::CapC) return r.value;
  return scaling == DualScaling::CaseStudy ? 1.0 / (r.value * static_cast<double>(l))
                                           : 1.0 / r.value;
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in [0, 1)");
}
void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::domain_error("lambda must be positive");
}

// Adds (lambda/2)|w|^2 over w = variables [0, n).
void add_ridge(QpBuilder& b, Index n, double lambda) {
  for (Index j = 0; j < n; ++j) {
    b.add_quadratic(j, j, lambda);
    b.set_name(j, "w" + std::to_string(j + 1));
  }
}

std::vector<std::pair<Index, double>> feature_row(const Dataset& d, Index i, double sign) {
  std::vector<std::pair<Index, double>> row;
  row.reserve(static_cast<std::size_t>(d.dimension()) + 4);
  for (Index j = 0; j < d.dimension(); ++j)
    if (d.features(i, j) != 0.0) row.emplace_back(j, sign * d.features(i, j));
  return row;
}

// Gram matrix made PSD for the QP: symmetrized, then shifted by
// 1e-10 + |lambda_min| when lambda_min lies in (-1e-8, 0).
Matrix jittered_gram(const KernelSpec& kernel, const Matrix& X) {
  Matrix K = gram_matrix(kernel, X);
  Eigen::SelfAdjointEigenSolver<Matrix> es(K, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin <= -1e-8) throw std::invalid_argument("kernel Gram matrix is not positive semidefinite");
  if (lmin < 0.0) K.diagonal().array() += 1e-10 - lmin;
  return K;
}

}  // namespace

ConvexQp build_eps_primal_qp(const Dataset& d, double eps, double lambda) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::domain_error("eps must be nonnegative");
  check_lambda(lambda);
  const Index n = d.dimension(), l = d.size();
  const Index ib = n, ixi = n + 1, ixs = n + 1 + l;
  QpBuilder b(n + 1 + 2 * l);
  add_ridge(b, n, lambda);
  b.set_name(ib, "b");
  const double inv_l = 1.0 / static_cast<double>(l);
  for (Index i = 0; i < l; ++i) {
    b.set_name(ixi + i, "xi" + std::to_string(i + 1));
    b.set_name(ixs + i, "xi*" + std::to_string(i + 1));
    b.add_linear(ixi + i, inv_l);
    b.add_linear(ixs + i, inv_l);
    // y - w'x - b <= eps + xi
    auto r1 = feature_row(d, i, -1.0);
    r1.emplace_back(ib, -1.0);
    r1.emplace_back(ixi + i, -1.0);
    b.add_inequality(r1, eps - d.targets[i]);
    // w'x + b - y <= eps + xi*
    auto r2 = feature_row(d, i, 1.0);
    r2.emplace_back(ib, 1.0);
    r2.emplace_back(ixs + i, -1.0);
    b.add_inequality(r2, eps + d.targets[i]);
  }
  for (Index i = 0; i < l; ++i) b.add_inequality({{ixi + i, -1.0}}, 0.0);
  for (Index i = 0; i < l; ++i) b.add_inequality({{ixs + i, -1.0}}, 0.0);
  return b.build();
}

ConvexQp build_nu_primal_qp(const Dataset& d, double alpha, double lambda) {
  check_alpha(alpha);
  check_lambda(lambda);
  const Index n = d.dimension(), l = d.size();
  const Index ib = n, ie = n + 1, ixi = n + 2, ixs = n + 2 + l;
  QpBuilder b(n + 2 + 2 * l);
  add_ridge(b, n, lambda);
  b.set_name(ib, "b");
  b.set_name(ie, "eps");
  b.add_linear(ie, 1.0 - alpha);
  const double inv_l = 1.0 / static_cast<double>(l);
  for (Index i = 0; i < l; ++i) {
    b.set_name(ixi + i, "xi" + std::to_string(i + 1));
    b.set_name(ixs + i, "xi*" + std::to_string(i + 1));
    b.add_linear(ixi + i, inv_l);
    b.add_linear(ixs + i, inv_l);
    auto r1 = feature_row(d, i, -1.0);
    r1.emplace_back(ib, -1.0);
    r1.emplace_back(ie, -1.0);
    r1.emplace_back(ixi + i, -1.0);
    b.add_inequality(r1, -d.targets[i]);
    auto r2 = feature_row(d, i, 1.0);
    r2.emplace_back(ib, 1.0);
    r2.emplace_back(ie, -1.0);
    r2.emplace_back(ixs + i, -1.0);
    b.add_inequality(r2, d.targets[i]);
  }
  for (Index i = 0; i < l; ++i) b.add_inequality({{ixi + i, -1.0}}, 0.0);
  for (Index i = 0; i < l; ++i) b.add_inequality({{ixs + i, -1.0}}, 0.0);
  return b.build();
}

ConvexQp build_deviation_qp(const Dataset& d, double alpha, double lambda) {
  check_alpha(alpha);
  check_lambda(lambda);
  const Index n = d.dimension(), l = d.size();
  const Index ic1 = n, ic2 = n + 1, is1 = n + 2, is2 = n + 2 + l;
  QpBuilder b(n + 2 + 2 * l);
  add_ridge(b, n, lambda);
  b.set_name(ic1, "C1");
  b.set_name(ic2, "C2");
  // R_a(Zbar) = (1+a)/2 C1 + (1-a)/2 C2 + E[Zbar - C1]_+ + E[Zbar - C2]_+ at the
  // optimal C1, C2; the deviation subtracts mean(Zbar) = mean(y) - mean(x)'w.
  b.add_linear(ic1, 0.5 * (1.0 + alpha));
  b.add_linear(ic2, 0.5 * (1.0 - alpha));
  Vector xbar = d.features.colwise().mean().transpose();
  for (Index j = 0; j < n; ++j) b.add_linear(j, xbar[j]);
  b.add_constant(-d.targets.mean());
  const double inv_l = 1.0 / static_cast<double>(l);
  for (Index i = 0; i < l; ++i) {
    b.set_name(is1 + i, "s1_" + std::to_string(i + 1));
    b.set_name(is2 + i, "s2_" + std::to_string(i + 1));
    b.add_linear(is1 + i, inv_l);
    b.add_linear(is2 + i, inv_l);
    // y - w'x - C <= s
    auto r1 = feature_row(d, i, -1.0);
    r1.emplace_back(ic1, -1.0);
    r1.emplace_back(is1 + i, -1.0);
    b.add_inequality(r1, -d.targets[i]);
    auto r2 = feature_row(d, i, -1.0);
    r2.emplace_back(ic2, -1.0);
    r2.emplace_back(is2 + i, -1.0);
    b.add_inequality(r2, -d.targets[i]);
  }
  for (Index i = 0; i < l; ++i) b.add_inequality({{is1 + i, -1.0}}, 0.0);
  for (Index i = 0; i < l; ++i) b.add_inequality({{is2 + i, -1.0}}, 0.0);
  return b.build();
}

namespace {

ConvexQp build_dual_from_gram(const Matrix& K, const Vector& y, double alpha, double cap_c,
                              DualScaling scaling) {
  const Index l = y.size();
  const double dl = static_cast<double>(l);
  const double box = scaling == DualScaling::CaseStudy ? cap_c : cap_c / dl;
  const double bound = scaling == DualScaling::CaseStudy ? cap_c * dl * (1.0 - alpha)
                                                         : cap_c * (1.0 - alpha);
  QpBuilder b(2 * l);
  b.add_quadratic_block(0, K);
  std::vector<std::pair<Index, double>> sum_mu, sum_t;
  for (Index i = 0; i < l; ++i) {
    b.set_name(i, "mu" + std::to_string(i + 1));
    b.set_name(l + i, "t" + std::to_string(i + 1));
    b.add_linear(i, -y[i]);
    sum_mu.emplace_back(i, 1.0);
    sum_t.emplace_back(l + i, 1.0);
  }
  b.add_equality(sum_mu, 0.0);
  for (Index i = 0; i < l; ++i) {
    b.add_inequality({{i, 1.0}, {l + i, -1.0}}, 0.0);
    b.add_inequality({{i, -1.0}, {l + i, -1.0}}, 0.0);
  }
  b.add_inequality(sum_t, bound);
  for (Index i = 0; i < l; ++i) {
    b.add_inequality({{i, 1.0}}, box);
    b.add_inequality({{i, -1.0}}, box);
  }
  return b.build();
}

}  // namespace

ConvexQp build_dual_qp(const Dataset& d, double alpha, double cap_c, const KernelSpec& kernel,
                       DualScaling scaling) {
  check_alpha(alpha);
  if (!(cap_c > 0.0) || !std::isfinite(cap_c)) throw std::domain_error("C must be positive");
  return build_dual_from_gram(jittered_gram(kernel, d.features), d.targets, alpha, cap_c, scaling);
}

std::pair<QuantileInterval, double> intercept_from_statistic(const EmpiricalSample& z,
                                                             double alpha) {
  auto iv = statistic_avg_quantiles(z, alpha);
  return {iv, iv.midpoint()};
}

QuantileInterval eps_from_alpha(const SvrModel& model, double alpha) {
  return quantile_interval(model.residuals.abs(), alpha);
}

AlphaLink alpha_from_eps(const SvrModel& model, double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::domain_error("eps must be nonnegative");
  auto [lt, le] = cdf_pair(model.residuals.abs(), eps);
  AlphaLink link;
  link.interval = {lt, le, false};
  link.midpoint = 0.5 * (lt + le);
  link.degenerate = lt == le;
  return link;
}

double eps_objective(const Dataset& d, const Vector& w, double b, double eps, double lambda) {
  Vector z = d.targets - d.features * w;
  z.array() -= b;
  auto s = EmpiricalSample::equiprobable(std::vector<double>(z.data(), z.data() + z.size()));
  return vapnik_error(s, eps) + 0.5 * lambda * w.squaredNorm();
}

double nu_objective(const Dataset& d, const Vector& w, double b, double alpha, double lambda) {
  Vector z = d.targets - d.features * w;
  z.array() -= b;
  auto s = EmpiricalSample::equiprobable(std::vector<double>(z.data(), z.data() + z.size()));
  return cvar_norm(s, alpha, false) + 0.5 * lambda * w.squaredNorm();
}

double dual_objective(const Vector& mu, const Vector& y, const Matrix& K) {
  return mu.dot(y) - 0.5 * mu.dot(K * mu);
}

Vector fitted_without_intercept(const SvrModel& model, const Dataset& d) {
  if (model.weights && model.kernel.is_linear()) return d.features * *model.weights;
  if (!model.dual_coeffs) throw std::invalid_argument("model has neither weights nor dual coefficients");
  return gram_matrix(model.kernel, d.features) * *model.dual_coeffs;
}

namespace {

EmpiricalSample to_sample(const Vector& v) {
  return EmpiricalSample::equiprobable(std::vector<double>(v.data(), v.data() + v.size()));
}

void set_residuals(SvrModel& m, const Vector& pre, double b) {
  Vector z = pre.array() - b;
  m.pre_intercept_residuals = to_sample(pre);
  m.residuals = to_sample(z);
}

}  // namespace

QuantileInterval vapnik_intercept_set(const Vector& pre, double eps) {
  // E[|z - C| - eps]_+ is convex piecewise linear in C with kinks at z_i +- eps,
  // so its minimizers form the interval between the extreme minimizing kinks.
  std::vector<double> kinks;
  kinks.reserve(2 * static_cast<std::size_t>(pre.size()));
  for (double z : pre) {
    kinks.push_back(z - eps);
    kinks.push_back(z + eps);
  }
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());
  const double scale = std::max(1.0, pre.cwiseAbs().maxCoeff() + eps);
  std::vector<double> f(kinks.size());
  for (std::size_t k = 0; k < kinks.size(); ++k)
    f[k] = ((pre.array() - kinks[k]).abs() - eps).max(0.0).sum() / static_cast<double>(pre.size());
  const double best = *std::min_element(f.begin(), f.end());
  QuantileInterval iv{kinks.back(), kinks.front()};
  for (std::size_t k = 0; k < kinks.size(); ++k)
    if (f[k] <= best + 1e-12 * scale) {
      iv.lo = std::min(iv.lo, kinks[k]);
      iv.hi = std::max(iv.hi, kinks[k]);
    }
  return iv;
}

SvrModel recover_primal_from_dual(const Vector& mu, const Dataset& d, const KernelSpec& kernel,
                                  double alpha) {
  check_alpha(alpha);
  if (mu.size() != d.size()) throw std::invalid_argument("recover_primal_from_dual: mu has wrong length");
  SvrModel m;
  m.formulation = Formulation::NuDual;
  m.kernel = kernel;
  m.alpha = alpha;
  m.dual_coeffs = mu;
  Vector pre;
  if (kernel.is_linear()) {
    m.weights = d.features.transpose() * mu;
    pre = d.targets - d.features * *m.weights;
  } else {
    pre = d.targets - gram_matrix(kernel, d.features) * mu;
  }
  auto [iv, b] = intercept_from_statistic(to_sample(pre), alpha);
  m.intercept_interval = iv;
  m.intercept = b;
  set_residuals(m, pre, b);
  m.linked_eps = eps_from_alpha(m, alpha);
  m.linked_alpha = alpha_from_eps(m, m.linked_eps.midpoint());
  m.fingerprint = d.fingerprint();
  return m;
}

SvrModel train(const Dataset& d, const SvrConfig& cfg) {
  const Index l = d.size(), n = d.dimension();
  const bool by_alpha = cfg.parameter.kind == SvrParameter::Kind::Alpha;
  if (cfg.formulation == Formulation::EpsPrimal && by_alpha)
    throw std::invalid_argument("eps-primal requires an epsilon parameter");
  if (cfg.formulation != Formulation::EpsPrimal && !by_alpha)
    throw std::invalid_argument(std::string(to_string(cfg.formulation)) + " requires an alpha parameter");
  if (cfg.formulation != Formulation::NuDual && !cfg.kernel.is_linear())
    throw std::invalid_argument("primal formulations support only the linear kernel");
  if (by_alpha) check_alpha(cfg.parameter.value);

  const double lambda = canonical_lambda(cfg.regularization, l, cfg.dual_scaling);
  const double cap_c = canonical_c(cfg.regularization, l, cfg.dual_scaling);

  if (cfg.formulation == Formulation::EpsPrimal) {
    double eps = cfg.parameter.value;
    double half_range = 0.5 * (d.targets.maxCoeff() - d.targets.minCoeff());
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::domain_error("eps must be nonnegative");
    if (!(eps < half_range))
      throw std::domain_error("eps must be below half the range of the targets");
  }

  Matrix K;
  ConvexQp qp = [&] {
    switch (cfg.formulation) {
      case Formulation::EpsPrimal: return build_eps_primal_qp(d, cfg.parameter.value, lambda);
      case Formulation::NuPrimal: return build_nu_primal_qp(d, cfg.parameter.value, lambda);
      case Formulation::NuDeviation: return build_deviation_qp(d, cfg.parameter.value, lambda);
      case Formulation::NuDual:
        K = jittered_gram(cfg.kernel, d.features);
        return build_dual_from_gram(K, d.targets, cfg.parameter.value, cap_c, cfg.dual_scaling);
    }
    throw std::logic_error("unreachable");
  }();

  auto t0 = std::chrono::steady_clock::now();
  QpSolution sol = solve_qp(qp, cfg.qp);
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (sol.status != QpStatus::Optimal)
    throw SolverError(std::string(to_string(cfg.formulation)) + ": solver returned " +
                          to_string(sol.status) + " (kkt residual " +
                          std::to_string(sol.kkt_residual) + ")",
                      sol.status);

  SvrModel m;
  if (cfg.formulation == Formulation::NuDual) {
    m = recover_primal_from_dual(sol.x.head(l), d, cfg.kernel, cfg.parameter.value);
  } else {
    m.formulation = cfg.formulation;
    m.kernel = cfg.kernel;
    Vector w = sol.x.head(n);
    m.weights = w;
    Vector pre = d.targets - d.features * w;
    // Every point of the optimal intercept set for this w is optimal; take its
    // midpoint so that all formulations break the tie the same way.
    m.solver_intercept = cfg.formulation == Formulation::NuDeviation ? NAN : sol.x[n];
    auto iv = cfg.formulation == Formulation::EpsPrimal
                  ? vapnik_intercept_set(pre, cfg.parameter.value)
                  : statistic_avg_quantiles(to_sample(pre), cfg.parameter.value);
    m.intercept_interval = iv;
    m.intercept = iv.midpoint();
    set_residuals(m, pre, m.intercept);
  }
  m.formulation = cfg.formulation;
  m.dual_scaling = cfg.dual_scaling;
  m.lambda = lambda;
  m.cap_c = cap_c;
  m.solver_objective = sol.objective;
  m.status = sol.status;
  m.kkt_residual = sol.kkt_residual;
  m.iterations = sol.iterations;
  m.solve_seconds = seconds;
  m.fingerprint = d.fingerprint();

  // |w|^2 in feature space; mu'K mu for kernel models.
  double wnorm2 = m.weights && cfg.kernel.is_linear()
                      ? m.weights->squaredNorm()
                      : m.dual_coeffs->dot(gram_matrix(cfg.kernel, d.features) * *m.dual_coeffs);
  auto abs_res = m.residuals.abs();

  double recomputed = 0.0, expected = sol.objective;
  if (by_alpha) {
    double alpha = cfg.parameter.value;
    m.alpha = alpha;
    m.linked_eps = eps_from_alpha(m, alpha);
    m.linked_alpha = alpha_from_eps(m, m.linked_eps.midpoint());
    m.error_form_objective = (1.0 - alpha) * cvar(abs_res, alpha) + 0.5 * lambda * wnorm2;
    switch (cfg.formulation) {
      case Formulation::NuPrimal:
        m.eps = sol.x[n + 1];
        m.objective = m.error_form_objective;
        recomputed = m.objective;
        break;
      case Formulation::NuDeviation: {
        double dev = avg_cvar_risk(m.pre_intercept_residuals, alpha) - m.pre_intercept_residuals.mean();
        m.objective = dev + 0.5 * lambda * wnorm2;
        recomputed = m.objective;
        break;
      }
      case Formulation::NuDual: {
        m.objective = dual_objective(*m.dual_coeffs, d.targets, gram_matrix(cfg.kernel, d.features));
        recomputed = dual_objective(*m.dual_coeffs, d.targets, K);
        expected = -sol.objective;
        break;
      }
      default: break;
    }
  } else {
    double eps = cfg.parameter.value;
    m.eps = eps;
    m.linked_eps = {eps, eps};
    m.linked_alpha = alpha_from_eps(m, eps);
    m.objective = vapnik_error(m.residuals, eps) + 0.5 * lambda * wnorm2;
    m.error_form_objective = std::numeric_limits<double>::quiet_NaN();
    recomputed = m.objective;
  }
  if (std::abs(recomputed - expected) > 1e-8 * (1.0 + std::abs(expected)))
    throw SolverError(std::string(to_string(cfg.formulation)) +
                          ": recomputed objective " + std::to_string(recomputed) +
                          " differs from solver objective " + std::to_string(expected),
                      sol.status);
  return m;
}

double predict(const SvrModel& model, const Eigen::Ref<const Vector>& x, const Dataset& d_train,
               const KernelSpec& kernel) {
  if (x.size() != d_train.dimension()) throw std::invalid_argument("predict: dimension mismatch");
  if (model.weights && kernel.is_linear()) return model.weights->dot(x) + model.intercept;
  if (!model.dual_coeffs) throw std::invalid_argument("predict: model has no dual coefficients");
  return kernel_column(kernel, d_train.features, x).dot(*model.dual_coeffs) + model.intercept;
}

}  // namespace rqsvr
