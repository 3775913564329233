#pragma once

// Convex quadratic programs in standard form
//
//   minimize    1/2 x'Px + c'x + constant
//   subject to  Ax = b,  Gx <= h
//
// solved by a primal-dual interior point method with Mehrotra
// predictor-corrector steps.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace rqsvr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

class ConvexQp {
 public:
  /// Validates dimensions, symmetry of P (1e-12) and positive semidefiniteness
  /// (smallest eigenvalue >= -1e-9). Throws std::invalid_argument.
  ConvexQp(SparseMatrix P, Vector c, SparseMatrix A, Vector b, SparseMatrix G, Vector h,
           std::vector<std::string> variable_names = {}, double constant = 0.0);

  Eigen::Index num_variables() const { return c_.size(); }
  Eigen::Index num_equalities() const { return b_.size(); }
  Eigen::Index num_inequalities() const { return h_.size(); }

  const SparseMatrix& P() const { return P_; }
  const Vector& c() const { return c_; }
  const SparseMatrix& A() const { return A_; }
  const Vector& b() const { return b_; }
  const SparseMatrix& G() const { return G_; }
  const Vector& h() const { return h_; }
  double constant() const { return constant_; }
  const std::vector<std::string>& variable_names() const { return names_; }

  double objective(const Vector& x) const;

  /// Same problem with the objective multiplied by factor > 0.
  ConvexQp scaled_objective(double factor) const;

  /// Plain-text dump of (P, c, A, b, G, h) as coordinate lists.
  void write_text(std::ostream& os) const;

 private:
  SparseMatrix P_;
  Vector c_;
  SparseMatrix A_;
  Vector b_;
  SparseMatrix G_;
  Vector h_;
  std::vector<std::string> names_;
  double constant_ = 0.0;
};

/// Incremental construction from triplets.
class QpBuilder {
 public:
  explicit QpBuilder(Eigen::Index num_variables);

  Eigen::Index num_variables() const { return n_; }

  void set_name(Eigen::Index j, std::string name);
  /// Adds value to P(i, j) and, off the diagonal, to P(j, i).
  void add_quadratic(Eigen::Index i, Eigen::Index j, double value);
  void add_linear(Eigen::Index j, double value);
  void add_constant(double value) { constant_ += value; }
  /// Dense quadratic block starting at (offset, offset). Must be symmetric.
  void add_quadratic_block(Eigen::Index offset, const Matrix& block);

  /// Returns the row index of the new constraint.
  Eigen::Index add_equality(const std::vector<std::pair<Eigen::Index, double>>& row, double rhs);
  Eigen::Index add_inequality(const std::vector<std::pair<Eigen::Index, double>>& row, double rhs);

  ConvexQp build() const;

 private:
  Eigen::Index n_;
  std::vector<Triplet> p_, a_, g_;
  Vector c_;
  std::vector<double> b_, h_;
  std::vector<std::string> names_;
  double constant_ = 0.0;
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

const char* to_string(QpStatus s);

struct QpSettings {
  double tolerance = 1e-8;
  int max_iterations = 200;
};

struct QpSolution {
  Vector x;
  Vector eq_duals;
  Vector ineq_duals;
  double objective = 0.0;
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
};

/// Thrown by callers that require an optimal solution.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, QpStatus status)
      : std::runtime_error(what), status_(status) {}
  QpStatus status() const { return status_; }

 private:
  QpStatus status_;
};

QpSolution solve_qp(const ConvexQp& qp, const QpSettings& settings = {});

/// Infinity norm of the KKT conditions at (x, y, z): stationarity, equality
/// residual, inequality violation, dual sign violation and complementarity.
double kkt_residual(const ConvexQp& qp, const Vector& x, const Vector& y, const Vector& z);
double kkt_residual(const ConvexQp& qp, const QpSolution& sol);

/// Lagrangian dual value at (x, y, z); a lower bound on the optimum when x
/// minimizes the Lagrangian.
double lagrangian_dual_value(const ConvexQp& qp, const Vector& x, const Vector& y,
                             const Vector& z);

}  // namespace rqsvr
