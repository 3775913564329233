// rqsvr: command-line front end.
//
// Exit codes: 0 success, 2 equivalence check failed, 1 any other error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "rqsvr/case_study.hpp"
#include "rqsvr/drr.hpp"
#include "rqsvr/io.hpp"
#include "rqsvr/quadrangle.hpp"
#include "rqsvr/svr.hpp"

using namespace rqsvr;

namespace {

constexpr int kEquivalenceFailure = 2;

std::vector<double> parse_numbers(const std::string& text, std::size_t count, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    std::string cell = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::logic_error&) {
      used = std::string::npos;
    }
    if (used != cell.size() || cell.empty()) throw std::invalid_argument("bad number '" + cell + "' in " + what);
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() != count)
    throw std::invalid_argument(what + " expects " + std::to_string(count) + " comma-separated numbers");
  return out;
}

NoiseModel parse_noise(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("noise must look like laplace:a,d, gauss:mu,sigma, expshift:r,s or empirical:file");
  std::string kind = spec.substr(0, colon), args = spec.substr(colon + 1);
  NoiseModel n;
  if (kind == "laplace") {
    auto v = parse_numbers(args, 2, "laplace");
    n = LaplaceNoise{v[0], v[1]};
  } else if (kind == "gauss") {
    auto v = parse_numbers(args, 2, "gauss");
    n = GaussianNoise{v[0], v[1]};
  } else if (kind == "expshift") {
    auto v = parse_numbers(args, 2, "expshift");
    n = ShiftedExponentialNoise{v[0], v[1]};
  } else if (kind == "empirical") {
    n = EmpiricalNoise{read_sample_csv(args)};
  } else {
    throw std::invalid_argument("unknown noise law '" + kind + "'");
  }
  validate(n);
  return n;
}

void print_model(const SvrModel& m) {
  std::cout << "formulation  " << to_string(m.formulation) << '\n';
  std::cout << "b            " << format_fixed(m.intercept) << '\n';
  if (m.weights) {
    std::cout << "w           ";
    for (double v : *m.weights) std::cout << ' ' << format_fixed(v);
    std::cout << '\n';
  } else {
    std::cout << "mu           " << m.dual_coeffs->size() << " coefficients\n";
  }
  if (m.alpha) std::cout << "alpha        " << format_fixed(*m.alpha) << '\n';
  if (m.eps) std::cout << "eps          " << format_fixed(*m.eps) << '\n';
  std::cout << "linked eps   [" << format_fixed(m.linked_eps.lo) << ", " << format_fixed(m.linked_eps.hi)
            << "]\n";
  std::cout << "alpha_new    " << format_fixed(m.linked_alpha.midpoint) << '\n';
  std::cout << "objective    " << format_fixed(m.objective) << '\n';
  std::cout << "iterations   " << m.iterations << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Support vector regression through risk quadrangles"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate y = x + Laplace(0, 1) noise on a grid of [0, 1]");
  Eigen::Index sim_l = 1000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--l", sim_l, "number of observations")->check(CLI::Range(Eigen::Index{2}, Eigen::Index{100000000}));
  sim->add_option("--seed", sim_seed, "generator seed");
  sim->add_option("--out", sim_out, "dataset CSV to write")->required();

  // train
  auto* tr = app.add_subcommand("train", "fit one SVR formulation");
  std::string tr_input, tr_form = "nu-primal", tr_kernel = "linear", tr_out, tr_scaling = "case-study";
  std::optional<double> tr_alpha, tr_eps, tr_c, tr_lambda;
  double tr_tol = 1e-8;
  tr->add_option("--input", tr_input, "dataset CSV (x1,...,xn,y)")->required();
  tr->add_option("--form", tr_form, "eps-primal | nu-primal | nu-deviation | nu-dual");
  auto* oa = tr->add_option("--alpha", tr_alpha, "confidence level in [0, 1)");
  auto* oe = tr->add_option("--eps", tr_eps, "tube half-width (eps-primal)");
  oa->excludes(oe);
  auto* oc = tr->add_option("--c", tr_c, "regularization C");
  auto* ol = tr->add_option("--lambda", tr_lambda, "coefficient of |w|^2 / 2");
  oc->excludes(ol);
  tr->add_option("--kernel", tr_kernel, "linear | rbf:<gamma> | poly:<degree>,<offset> (nu-dual only)");
  tr->add_option("--scaling", tr_scaling, "dual scaling: case-study | proposition");
  tr->add_option("--tolerance", tr_tol, "solver tolerance");
  tr->add_option("--out", tr_out, "model JSON to write");

  // case-study
  auto* cs = app.add_subcommand("case-study", "run every formulation and compare them");
  std::string cs_config, cs_input, cs_out;
  bool cs_timing = false;
  cs->add_option("--config", cs_config, "JSON config (l, seed, alpha, C, formulations, output_dir, ...)");
  cs->add_option("--input", cs_input, "dataset CSV used instead of simulating");
  cs->add_option("--out", cs_out, "output directory (overrides the config)");
  cs->add_flag("--timing", cs_timing, "report wall-clock solve times");

  // quadrangle
  auto* qd = app.add_subcommand("quadrangle", "risk quadrangle of a sample");
  std::string qd_input, qd_out;
  std::optional<double> qd_alpha, qd_eps;
  qd->add_option("--input", qd_input, "sample CSV (value or value,weight)")->required();
  auto* qa = qd->add_option("--alpha", qd_alpha, "CVaR norm quadrangle at alpha");
  auto* qe = qd->add_option("--eps", qd_eps, "Vapnik quadrangle at eps");
  qa->excludes(qe);
  qd->add_option("--out", qd_out, "JSON to write");

  // drr-weights
  auto* dw = app.add_subcommand("drr-weights", "worst-case weights over the ambiguity set");
  std::string dw_input, dw_out;
  double dw_alpha = 0.6;
  dw->add_option("--input", dw_input, "residual sample CSV (value)")->required();
  dw->add_option("--alpha", dw_alpha, "confidence level in [0, 1)")->required();
  dw->add_option("--out", dw_out, "weights CSV to write (index,weight)");

  // select-alpha
  auto* sa = app.add_subcommand("select-alpha", "optimal alpha for a known noise law");
  std::string sa_noise, sa_out;
  double sa_default = 0.6;
  sa->add_option("--noise", sa_noise, "laplace:a,d | gauss:mu,sigma | expshift:rate,shift | empirical:file")
      ->required();
  sa->add_option("--default-alpha", sa_default, "alpha returned for symmetric laws");
  sa->add_option("--out", sa_out, "JSON to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*sim) {
      write_dataset_csv(sim_out, simulate(sim_l, sim_seed));
      std::cout << "wrote " << sim_l << " observations to " << sim_out << '\n';
      return 0;
    }

    if (*tr) {
      Dataset d = read_dataset_csv(tr_input);
      SvrConfig cfg;
      cfg.formulation = parse_formulation(tr_form);
      if (cfg.formulation == Formulation::EpsPrimal) {
        if (!tr_eps) throw std::invalid_argument("eps-primal needs --eps");
        cfg.parameter = SvrParameter::epsilon(*tr_eps);
      } else {
        if (!tr_alpha) throw std::invalid_argument(tr_form + " needs --alpha");
        cfg.parameter = SvrParameter::alpha(*tr_alpha);
      }
      cfg.regularization = tr_lambda ? Regularization::lambda(*tr_lambda)
                                     : Regularization::cap_c(tr_c.value_or(1.0));
      cfg.kernel = KernelSpec::parse(tr_kernel);
      if (tr_scaling == "case-study") cfg.dual_scaling = DualScaling::CaseStudy;
      else if (tr_scaling == "proposition") cfg.dual_scaling = DualScaling::Proposition;
      else throw std::invalid_argument("unknown scaling '" + tr_scaling + "'");
      cfg.qp.tolerance = tr_tol;
      SvrModel m = train(d, cfg);
      print_model(m);
      if (!tr_out.empty()) write_json(tr_out, to_json(m));
      return 0;
    }

    if (*cs) {
      CaseStudyConfig cfg = cs_config.empty() ? CaseStudyConfig{}
                                              : CaseStudyConfig::from_json(read_json(cs_config));
      if (!cs_input.empty()) cfg.input = cs_input;
      if (!cs_out.empty()) cfg.output_dir = cs_out;
      if (cs_timing) cfg.record_timing = true;
      auto res = run_case_study(cfg);
      write_case_study(cfg, res);
      std::cout << res.table.to_csv();
      for (const auto& p : res.report.json["pairs"])
        std::cout << p["a"]["formulation"].get<std::string>() << " vs "
                  << p["b"]["formulation"].get<std::string>() << ": |dw| "
                  << format_fixed(p["dw"].get<double>()) << ", |db| " << format_fixed(p["db"].get<double>())
                  << (p["pass"].get<bool>() ? "" : "  FAIL") << '\n';
      std::cout << "equivalence " << (res.report.pass ? "PASS" : "FAIL") << " (tolerance "
                << format_fixed(cfg.tolerance) << "), output in " << cfg.output_dir.string() << '\n';
      return res.report.pass ? 0 : kEquivalenceFailure;
    }

    if (*qd) {
      EmpiricalSample s = read_sample_csv(qd_input);
      QuadrangleQuartet q;
      if (qd_eps) q = qsa_quadrangle(s, *qd_eps);
      else q = cvar_norm_quadrangle(s, qd_alpha.value_or(0.5));
      auto report = check_quadrangle_identities(s, q);
      auto j = to_json(q);
      j["identities_pass"] = report.all_pass();
      std::cout << (qd_eps ? "eps " + format_fixed(*qd_eps) : "alpha " + format_fixed(q.parameter.value)) << '\n'
                << "risk       " << format_fixed(q.risk) << '\n'
                << "deviation  " << format_fixed(q.deviation) << '\n'
                << "regret     " << format_fixed(q.regret) << '\n'
                << "error      " << format_fixed(q.error) << '\n'
                << "statistic ";
      for (const auto& iv : q.statistic) std::cout << " [" << format_fixed(iv.lo) << ", " << format_fixed(iv.hi) << ']';
      std::cout << "\nidentities " << (report.all_pass() ? "pass" : "FAIL") << '\n';
      if (!qd_out.empty()) write_json(qd_out, j);
      return report.all_pass() ? 0 : kEquivalenceFailure;
    }

    if (*dw) {
      EmpiricalSample s = read_sample_csv(dw_input);
      auto w = optimal_weights(s, dw_alpha);
      std::cout << "worst-case objective " << format_fixed(worst_case_objective(s, dw_alpha)) << '\n'
                << "nonzero weights      " << w.nonzeros() << " of " << w.weights.size() << '\n'
                << "k = floor(l (1 - alpha)) " << k_from_alpha(w.weights.size(), dw_alpha)
                << (k_is_exact(w.weights.size(), dw_alpha) ? "" : " (l (1 - alpha) not integral)") << '\n';
      if (!dw_out.empty()) write_weights_csv(dw_out, w);
      return 0;
    }

    if (*sa) {
      auto sel = select_alpha(parse_noise(sa_noise), sa_default);
      std::cout << "symmetric   " << (sel.symmetric ? "yes" : "no") << '\n'
                << "alpha       " << format_fixed(sel.alpha) << '\n'
                << "eps         " << format_fixed(sel.eps) << '\n'
                << "alpha_star  " << format_fixed(sel.alpha_star) << '\n'
                << "nu          " << format_fixed(sel.nu) << '\n';
      if (!sa_out.empty()) write_json(sa_out, to_json(sel));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
