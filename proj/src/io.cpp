#include "rqsvr/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rqsvr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_fixed(double x, int decimals) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  std::string s(buf);
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_exact(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const fs::path& path, std::size_t line) {
  double v = 0;
  const char* end = cell.data() + cell.size();
  auto r = std::from_chars(cell.data(), end, v);
  if (cell.empty() || r.ec != std::errc() || r.ptr != end)
    throw IoError(path.string() + ":" + std::to_string(line) + ": not a number '" + cell + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c, path, lineno));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw IoError(path.string() + ": empty file");
  return t;
}

}  // namespace

void write_dataset_csv(const fs::path& path, const Dataset& d) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < d.dimension(); ++j) out << 'x' << j + 1 << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    for (Eigen::Index j = 0; j < d.dimension(); ++j) out << format_exact(d.features(i, j)) << ',';
    out << format_exact(d.targets[i]) << '\n';
  }
}

Dataset read_dataset_csv(const fs::path& path) {
  auto t = read_table(path);
  const std::size_t cols = t.header.size();
  if (cols < 2 || t.header.back() != "y")
    throw IoError(path.string() + ": header must be x1,...,xn,y");
  for (std::size_t j = 0; j + 1 < cols; ++j)
    if (t.header[j] != "x" + std::to_string(j + 1))
      throw IoError(path.string() + ": header must be x1,...,xn,y");
  const auto l = static_cast<Eigen::Index>(t.rows.size());
  const auto n = static_cast<Eigen::Index>(cols - 1);
  Matrix X(l, n);
  Vector y(l);
  for (Eigen::Index i = 0; i < l; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) X(i, j) = r[static_cast<std::size_t>(j)];
    y[i] = r.back();
  }
  return Dataset(std::move(X), std::move(y));
}

void write_sample_csv(const fs::path& path, const EmpiricalSample& s) {
  auto out = open_out(path);
  out << "value,weight\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << format_exact(s.values()[i]) << ',' << format_exact(s.weights()[i]) << '\n';
}

EmpiricalSample read_sample_csv(const fs::path& path) {
  auto t = read_table(path);
  std::vector<double> v, w;
  for (const auto& r : t.rows) {
    v.push_back(r[0]);
    if (r.size() > 1) w.push_back(r[1]);
  }
  if (v.empty()) throw IoError(path.string() + ": no observations");
  if (t.header == std::vector<std::string>{"value"}) return EmpiricalSample::equiprobable(std::move(v));
  if (t.header != std::vector<std::string>{"value", "weight"})
    throw IoError(path.string() + ": header must be value or value,weight");
  return EmpiricalSample(std::move(v), std::move(w));
}

void write_weights_csv(const fs::path& path, const WeightVector& w) {
  auto out = open_out(path);
  out << "index,weight\n";
  for (Eigen::Index i = 0; i < w.weights.size(); ++i) out << i << ',' << format_exact(w.weights[i]) << '\n';
}

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// JSON has no NaN; write null instead.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const QuantileInterval& q) { return {{"lo", q.lo}, {"hi", q.hi}}; }

json to_json(const AlphaLink& a) {
  return {{"lo", a.interval.lo},
          {"hi", a.interval.hi},
          {"hi_inclusive", a.interval.hi_inclusive},
          {"midpoint", a.midpoint},
          {"degenerate", a.degenerate}};
}

json to_json(const SvrModel& m) {
  json j;
  j["formulation"] = to_string(m.formulation);
  j["kernel"] = m.kernel.to_string();
  j["dual_scaling"] = m.dual_scaling == DualScaling::CaseStudy ? "case-study" : "proposition";
  j["alpha"] = optional_json(m.alpha);
  j["eps"] = optional_json(m.eps);
  j["lambda"] = m.lambda;
  j["C"] = optional_json(m.cap_c);
  if (m.weights) j["w"] = vector_json(*m.weights);
  if (m.dual_coeffs) j["mu"] = vector_json(*m.dual_coeffs);
  j["b"] = m.intercept;
  j["solver_b"] = number(m.solver_intercept);
  if (m.intercept_interval) j["b_interval"] = to_json(*m.intercept_interval);
  j["objective"] = number(m.objective);
  j["error_form_objective"] = number(m.error_form_objective);
  j["linked_eps"] = to_json(m.linked_eps);
  j["linked_alpha"] = to_json(m.linked_alpha);
  j["status"] = to_string(m.status);
  j["kkt_residual"] = m.kkt_residual;
  j["iterations"] = m.iterations;
  j["fingerprint"] = m.fingerprint;
  return j;
}

json to_json(const QuadrangleQuartet& q) {
  json stat = json::array();
  for (const auto& iv : q.statistic) stat.push_back(to_json(iv));
  return {{"parameter", q.parameter.kind == QuadrangleParameter::Kind::Alpha ? "alpha" : "eps"},
          {"value", q.parameter.value},
          {"risk", q.risk},
          {"deviation", q.deviation},
          {"regret", q.regret},
          {"error", q.error},
          {"statistic", stat}};
}

json to_json(const AlphaSelection& a) {
  return {{"alpha", a.alpha},
          {"alpha_star", a.alpha_star},
          {"nu", a.nu},
          {"eps", a.eps},
          {"symmetric", a.symmetric}};
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace rqsvr
