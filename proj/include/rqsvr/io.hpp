#pragma once

// CSV and JSON serialization for the command-line tool.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "rqsvr/distribution.hpp"
#include "rqsvr/drr.hpp"
#include "rqsvr/quadrangle.hpp"
#include "rqsvr/svr.hpp"

namespace rqsvr {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed notation with the given number of decimals ("-0.000000" is printed as "0.000000").
std::string format_fixed(double x, int decimals = 6);
/// Shortest text that reads back to the same double.
std::string format_exact(double x);

/// Header x1,...,xn,y. Values are written exactly.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& d);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Header value,weight. A single-column file (header value) reads as equiprobable.
void write_sample_csv(const std::filesystem::path& path, const EmpiricalSample& s);
EmpiricalSample read_sample_csv(const std::filesystem::path& path);

/// Header index,weight with 0-based indices.
void write_weights_csv(const std::filesystem::path& path, const WeightVector& w);

nlohmann::json to_json(const QuantileInterval& q);
nlohmann::json to_json(const AlphaLink& a);
nlohmann::json to_json(const SvrModel& m);
nlohmann::json to_json(const QuadrangleQuartet& q);
nlohmann::json to_json(const AlphaSelection& a);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace rqsvr
