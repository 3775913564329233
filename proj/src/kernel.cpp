#include "rqsvr/kernel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rqsvr {

KernelSpec KernelSpec::rbf(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("rbf kernel: gamma must be positive");
  KernelSpec k;
  k.kind = Kind::Rbf;
  k.gamma = gamma;
  return k;
}

KernelSpec KernelSpec::polynomial(int degree, double offset) {
  if (degree < 1) throw std::invalid_argument("polynomial kernel: degree must be >= 1");
  if (!std::isfinite(offset)) throw std::invalid_argument("polynomial kernel: non-finite offset");
  KernelSpec k;
  k.kind = Kind::Polynomial;
  k.degree = degree;
  k.offset = offset;
  return k;
}

KernelSpec KernelSpec::parse(const std::string& text) {
  if (text == "linear") return linear();
  auto colon = text.find(':');
  std::string name = text.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (name == "rbf" && !args.empty()) {
      std::size_t used = 0;
      double g = std::stod(args, &used);
      if (used == args.size()) return rbf(g);
    } else if (name == "poly" && !args.empty()) {
      auto comma = args.find(',');
      std::string d = args.substr(0, comma);
      std::string c = comma == std::string::npos ? "0" : args.substr(comma + 1);
      std::size_t ud = 0, uc = 0;
      int degree = std::stoi(d, &ud);
      double offset = std::stod(c, &uc);
      if (ud == d.size() && uc == c.size()) return polynomial(degree, offset);
    }
  } catch (const std::logic_error&) {
  }
  throw std::invalid_argument("unrecognized kernel '" + text +
                              "' (expected linear, rbf:<gamma> or poly:<degree>,<offset>)");
}

std::string KernelSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Linear: os << "linear"; break;
    case Kind::Rbf: os << "rbf:" << gamma; break;
    case Kind::Polynomial: os << "poly:" << degree << ',' << offset; break;
  }
  return os.str();
}

double kernel_value(const KernelSpec& k, const Eigen::Ref<const Vector>& a,
                    const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel_value: dimension mismatch");
  switch (k.kind) {
    case KernelSpec::Kind::Linear: return a.dot(b);
    case KernelSpec::Kind::Rbf: return std::exp(-k.gamma * (a - b).squaredNorm());
    case KernelSpec::Kind::Polynomial: return std::pow(a.dot(b) + k.offset, k.degree);
  }
  return 0.0;
}

Matrix gram_matrix(const KernelSpec& k, const Matrix& X) {
  const Eigen::Index l = X.rows();
  Matrix K(l, l);
  if (k.is_linear()) {
    K = X * X.transpose();
  } else {
    for (Eigen::Index j = 0; j < l; ++j)
      for (Eigen::Index i = 0; i <= j; ++i) {
        double v = kernel_value(k, X.row(i).transpose(), X.row(j).transpose());
        K(i, j) = v;
        K(j, i) = v;
      }
  }
  return 0.5 * (K + K.transpose());
}

Vector kernel_column(const KernelSpec& k, const Matrix& X, const Eigen::Ref<const Vector>& x) {
  if (x.size() != X.cols()) throw std::invalid_argument("kernel_column: dimension mismatch");
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = kernel_value(k, X.row(i).transpose(), x);
  return out;
}

}  // namespace rqsvr
