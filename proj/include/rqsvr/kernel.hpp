#pragma once

#include <string>

#include "rqsvr/qp.hpp"

namespace rqsvr {

struct KernelSpec {
  enum class Kind { Linear, Rbf, Polynomial };
  Kind kind = Kind::Linear;
  double gamma = 1.0;  // Rbf: exp(-gamma |x - x'|^2)
  int degree = 1;      // Polynomial: (x'x' + offset)^degree
  double offset = 0.0;

  static KernelSpec linear() { return {}; }
  static KernelSpec rbf(double gamma);
  static KernelSpec polynomial(int degree, double offset);

  /// "linear", "rbf:<gamma>" or "poly:<degree>,<offset>".
  static KernelSpec parse(const std::string& text);
  std::string to_string() const;

  bool is_linear() const { return kind == Kind::Linear; }
};

double kernel_value(const KernelSpec& k, const Eigen::Ref<const Vector>& a,
                    const Eigen::Ref<const Vector>& b);

/// K(i, j) = k(x_i, x_j) over the rows of X, symmetrized as (K + K') / 2.
Matrix gram_matrix(const KernelSpec& k, const Matrix& X);

/// (k(x_1, x), ..., k(x_l, x)).
Vector kernel_column(const KernelSpec& k, const Matrix& X, const Eigen::Ref<const Vector>& x);

}  // namespace rqsvr
