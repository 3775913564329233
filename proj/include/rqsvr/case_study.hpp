#pragma once

// Simulated case study: y_i = x_i + e_i with x on a uniform grid of [0, 1] and
// Laplace(0, 1) noise, fitted by every formulation and cross-checked.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rqsvr/svr.hpp"

namespace rqsvr {

/// Deterministic sample: x_i = i / (l - 1), e_i from inverse-CDF Laplace(0, 1)
/// applied to unit_uniform draws of std::mt19937_64(seed). Throws for l < 2.
Dataset simulate(Eigen::Index l, std::uint64_t seed);

/// Uniform on (0, 1) from the top 52 bits of one generator draw, offset by half a
/// step so that both ends stay exactly representable and strictly inside.
double unit_uniform(std::uint64_t bits);
/// Inverse CDF of the density exp(-|x|) / 2.
double laplace_inverse_cdf(double u);

struct CaseStudyConfig {
  Eigen::Index l = 1000;
  std::uint64_t seed = 1;
  double alpha = 0.6;
  double cap_c = 1.0;
  std::vector<Formulation> formulations{Formulation::NuPrimal, Formulation::EpsPrimal,
                                        Formulation::NuDeviation, Formulation::NuDual};
  std::filesystem::path output_dir = "case_study_out";
  std::optional<std::filesystem::path> input;  // dataset CSV instead of simulate
  double tolerance = 1e-3;                     // pass/fail bound for |dw|, |db|
  bool record_timing = false;                  // wall-clock column; zero otherwise
  QpSettings qp;

  /// Keys: l, seed, alpha, C, formulations, output_dir, input, tolerance, record_timing.
  /// Unknown keys are rejected.
  static CaseStudyConfig from_json(const nlohmann::json& j);
};

struct ResultRow {
  std::string method;   // "nu-SVR (primal)", ...
  std::string measure;  // "error" or "deviation"
  Formulation formulation = Formulation::NuPrimal;
  double b = 0.0;
  Vector w;
  double alpha = 0.0;
  double eps = 0.0;
  double solve_seconds = 0.0;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  /// method,measure,b,w1..wn,alpha,eps,solve_seconds with 6 decimals.
  std::string to_csv() const;
};

struct EquivalenceReport {
  nlohmann::json json;
  bool pass = true;
};

/// Pairwise comparison of two models fitted on the same dataset: infinity-norm
/// |dw|, |db|, gap of the error-form objectives, and the alpha / eps link
/// diagnostics. Passes when |dw| and |db| are within tol. Throws
/// std::invalid_argument on a dataset fingerprint mismatch or a missing w.
EquivalenceReport equivalence_report(const SvrModel& a, const SvrModel& b, double tol = 1e-3);

struct CaseStudyResult {
  Dataset data;
  std::vector<SvrModel> models;  // in the order of the table rows
  ResultsTable table;
  EquivalenceReport report;
};

/// NuPrimal -> eps_from_alpha -> EpsPrimal -> alpha_from_eps, NuDeviation and
/// NuDual (linear kernel, case-study scaling). EpsPrimal runs at the linked eps
/// of NuPrimal, so requesting it trains NuPrimal too. Rows follow the fixed
/// order nu-primal, eps-primal, nu-deviation, nu-dual. Solver failures are
/// rethrown with the formulation named.
CaseStudyResult run_case_study(const CaseStudyConfig& cfg);

/// table.csv, equivalence.json and data.csv under cfg.output_dir.
void write_case_study(const CaseStudyConfig& cfg, const CaseStudyResult& result);

}  // namespace rqsvr
