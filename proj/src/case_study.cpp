#include "rqsvr/case_study.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "rqsvr/io.hpp"

namespace rqsvr {

using nlohmann::json;

double unit_uniform(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

double laplace_inverse_cdf(double u) {
  return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
}

Dataset simulate(Eigen::Index l, std::uint64_t seed) {
  if (l < 2) throw std::invalid_argument("simulate: l must be at least 2");
  std::mt19937_64 gen(seed);
  Matrix X(l, 1);
  Vector y(l);
  for (Eigen::Index i = 0; i < l; ++i) {
    double x = static_cast<double>(i) / static_cast<double>(l - 1);
    X(i, 0) = x;
    y[i] = x + laplace_inverse_cdf(unit_uniform(gen()));
  }
  return Dataset(std::move(X), std::move(y));
}

CaseStudyConfig CaseStudyConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("case-study config must be a JSON object");
  CaseStudyConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "l") c.l = v.get<Eigen::Index>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "alpha") c.alpha = v.get<double>();
    else if (k == "C") c.cap_c = v.get<double>();
    else if (k == "formulations") {
      c.formulations.clear();
      for (const auto& f : v) c.formulations.push_back(parse_formulation(f.get<std::string>()));
    } else if (k == "output_dir") c.output_dir = v.get<std::string>();
    else if (k == "input") c.input = v.get<std::string>();
    else if (k == "tolerance") c.tolerance = v.get<double>();
    else if (k == "record_timing") c.record_timing = v.get<bool>();
    else throw std::invalid_argument("unknown case-study config key '" + k + "'");
  }
  if (c.l < 2) throw std::invalid_argument("case-study: l must be at least 2");
  if (!(c.alpha >= 0.0 && c.alpha < 1.0)) throw std::invalid_argument("case-study: alpha must lie in [0, 1)");
  if (!(c.cap_c > 0.0)) throw std::invalid_argument("case-study: C must be positive");
  if (c.formulations.empty()) throw std::invalid_argument("case-study: no formulations");
  return c;
}

std::string ResultsTable::to_csv() const {
  std::ostringstream os;
  const Eigen::Index n = rows.empty() ? 0 : rows.front().w.size();
  os << "method,measure,b";
  for (Eigen::Index j = 0; j < n; ++j) os << ",w" << j + 1;
  os << ",alpha,eps,solve_seconds\n";
  for (const auto& r : rows) {
    os << '"' << r.method << "\"," << r.measure << ',' << format_fixed(r.b);
    for (double v : r.w) os << ',' << format_fixed(v);
    os << ',' << format_fixed(r.alpha) << ',' << format_fixed(r.eps) << ','
       << format_fixed(r.solve_seconds) << '\n';
  }
  return os.str();
}

namespace {

double common_alpha(const SvrModel& a, const SvrModel& b) {
  if (a.alpha) return *a.alpha;
  if (b.alpha) return *b.alpha;
  return a.linked_alpha.midpoint;
}

// (1 - alpha) cvar(|Z|, alpha) + (lambda/2)|w|^2 from the stored residuals.
double error_form(const SvrModel& m, double alpha) {
  return (1.0 - alpha) * cvar(m.residuals.abs(), alpha) + 0.5 * m.lambda * m.weights->squaredNorm();
}

json link_json(const SvrModel& m) {
  return {{"formulation", to_string(m.formulation)},
          {"alpha", m.alpha ? json(*m.alpha) : json(nullptr)},
          {"eps", m.eps ? json(*m.eps) : json(nullptr)},
          {"linked_eps", to_json(m.linked_eps)},
          {"alpha_new", m.linked_alpha.midpoint}};
}

}  // namespace

EquivalenceReport equivalence_report(const SvrModel& a, const SvrModel& b, double tol) {
  if (a.fingerprint != b.fingerprint)
    throw std::invalid_argument("equivalence_report: models were fitted on different datasets");
  if (!a.weights || !b.weights)
    throw std::invalid_argument("equivalence_report: both models need primal weights");
  if (a.weights->size() != b.weights->size())
    throw std::invalid_argument("equivalence_report: weight dimensions differ");
  const double dw = (*a.weights - *b.weights).lpNorm<Eigen::Infinity>();
  const double db = std::abs(a.intercept - b.intercept);
  const double alpha = common_alpha(a, b);
  const double gap = std::abs(error_form(a, alpha) - error_form(b, alpha));
  EquivalenceReport r;
  r.pass = dw <= tol && db <= tol;
  r.json = {{"a", link_json(a)},       {"b", link_json(b)},          {"dw", dw},
            {"db", db},                {"objective_alpha", alpha},   {"objective_gap", gap},
            {"tolerance", tol},        {"pass", r.pass}};
  return r;
}

namespace {

const char* method_name(Formulation f) {
  switch (f) {
    case Formulation::EpsPrimal: return "eps-SVR (primal)";
    case Formulation::NuDual: return "nu-SVR (dual)";
    default: return "nu-SVR (primal)";
  }
}

SvrModel fit(const Dataset& d, Formulation f, SvrParameter p, const CaseStudyConfig& cfg) {
  SvrConfig sc;
  sc.formulation = f;
  sc.parameter = p;
  sc.regularization = Regularization::cap_c(cfg.cap_c);
  sc.dual_scaling = DualScaling::CaseStudy;
  sc.qp = cfg.qp;
  try {
    return train(d, sc);
  } catch (const SolverError& e) {
    throw SolverError(std::string("case study failed in ") + to_string(f) + ": " + e.what(), e.status());
  }
}

bool requested(const CaseStudyConfig& cfg, Formulation f) {
  for (auto g : cfg.formulations)
    if (g == f) return true;
  return false;
}

}  // namespace

CaseStudyResult run_case_study(const CaseStudyConfig& cfg) {
  Dataset d = cfg.input ? read_dataset_csv(*cfg.input) : simulate(cfg.l, cfg.seed);
  CaseStudyResult out{d, {}, {}, {}};

  const bool want_eps = requested(cfg, Formulation::EpsPrimal);
  std::optional<SvrModel> nu;
  if (requested(cfg, Formulation::NuPrimal) || want_eps)
    nu = fit(d, Formulation::NuPrimal, SvrParameter::alpha(cfg.alpha), cfg);

  for (auto f : {Formulation::NuPrimal, Formulation::EpsPrimal, Formulation::NuDeviation,
                 Formulation::NuDual}) {
    if (!requested(cfg, f)) continue;
    SvrModel m = f == Formulation::NuPrimal ? *nu
                 : f == Formulation::EpsPrimal
                     ? fit(d, f, SvrParameter::epsilon(nu->linked_eps.midpoint()), cfg)
                     : fit(d, f, SvrParameter::alpha(cfg.alpha), cfg);
    ResultRow row;
    row.method = method_name(f);
    row.measure = f == Formulation::NuDeviation ? "deviation" : "error";
    row.formulation = f;
    row.b = m.intercept;
    row.w = *m.weights;
    row.alpha = f == Formulation::EpsPrimal ? m.linked_alpha.midpoint : cfg.alpha;
    row.eps = f == Formulation::EpsPrimal ? *m.eps : m.linked_eps.midpoint();
    row.solve_seconds = cfg.record_timing ? m.solve_seconds : 0.0;
    out.table.rows.push_back(std::move(row));
    out.models.push_back(std::move(m));
  }

  json pairs = json::array();
  bool pass = true;
  for (std::size_t i = 0; i < out.models.size(); ++i)
    for (std::size_t k = i + 1; k < out.models.size(); ++k) {
      auto r = equivalence_report(out.models[i], out.models[k], cfg.tolerance);
      pass = pass && r.pass;
      pairs.push_back(std::move(r.json));
    }
  json models = json::array();
  for (const auto& m : out.models) models.push_back(link_json(m));
  out.report.pass = pass;
  out.report.json = {{"l", d.size()},
                     {"alpha", cfg.alpha},
                     {"C", cfg.cap_c},
                     {"lambda", canonical_lambda(Regularization::cap_c(cfg.cap_c), d.size())},
                     {"fingerprint", d.fingerprint()},
                     {"models", models},
                     {"pairs", pairs},
                     {"pass", pass}};
  for (const auto& m : out.models)
    if (m.formulation == Formulation::EpsPrimal)
      out.report.json["alpha_roundtrip"] = {{"eps", *m.eps},
                                            {"alpha_new", m.linked_alpha.midpoint},
                                            {"abs_diff", std::abs(m.linked_alpha.midpoint - cfg.alpha)}};
  return out;
}

void write_case_study(const CaseStudyConfig& cfg, const CaseStudyResult& result) {
  std::filesystem::create_directories(cfg.output_dir);
  write_dataset_csv(cfg.output_dir / "data.csv", result.data);
  {
    std::ofstream out(cfg.output_dir / "table.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (cfg.output_dir / "table.csv").string());
    out << result.table.to_csv();
  }
  write_json(cfg.output_dir / "equivalence.json", result.report.json);
}

}  // namespace rqsvr
