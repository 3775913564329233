#include "rqsvr/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace rqsvr {

using Index = Eigen::Index;

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

ConvexQp::ConvexQp(SparseMatrix P, Vector c, SparseMatrix A, Vector b, SparseMatrix G, Vector h,
                   std::vector<std::string> variable_names, double constant)
    : P_(std::move(P)),
      c_(std::move(c)),
      A_(std::move(A)),
      b_(std::move(b)),
      G_(std::move(G)),
      h_(std::move(h)),
      names_(std::move(variable_names)),
      constant_(constant) {
  const Index n = c_.size();
  if (n == 0) throw std::invalid_argument("ConvexQp: no variables");
  if (P_.rows() != n || P_.cols() != n) throw std::invalid_argument("ConvexQp: P must be n x n");
  if (A_.cols() != n || A_.rows() != b_.size())
    throw std::invalid_argument("ConvexQp: A/b dimensions inconsistent");
  if (G_.cols() != n || G_.rows() != h_.size())
    throw std::invalid_argument("ConvexQp: G/h dimensions inconsistent");
  if (!names_.empty() && static_cast<Index>(names_.size()) != n)
    throw std::invalid_argument("ConvexQp: variable_names length differs from n");
  if (!c_.allFinite() || !b_.allFinite() || !h_.allFinite() || !std::isfinite(constant_))
    throw std::invalid_argument("ConvexQp: non-finite data");
  P_.makeCompressed();
  A_.makeCompressed();
  G_.makeCompressed();

  SparseMatrix asym = SparseMatrix(P_.transpose()) - P_;
  for (Index k = 0; k < asym.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it)
      if (std::abs(it.value()) > 1e-12)
        throw std::invalid_argument("ConvexQp: P is not symmetric");

  // Smallest eigenvalue >= -1e-9 <=> P + 1e-9 I is positive definite. Only
  // rows/columns touched by P matter.
  std::vector<Index> active;
  for (Index k = 0; k < P_.outerSize(); ++k) {
    bool touched = false;
    for (SparseMatrix::InnerIterator it(P_, k); it; ++it) {
      if (!std::isfinite(it.value())) throw std::invalid_argument("ConvexQp: non-finite P");
      if (it.value() != 0.0) touched = true;
    }
    if (touched) active.push_back(k);
  }
  if (!active.empty()) {
    std::vector<Index> pos(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < active.size(); ++i) pos[static_cast<std::size_t>(active[i])] = static_cast<Index>(i);
    const Index k = static_cast<Index>(active.size());
    std::vector<Triplet> trips;
    for (Index col : active)
      for (SparseMatrix::InnerIterator it(P_, col); it; ++it) {
        Index r = pos[static_cast<std::size_t>(it.row())];
        if (r >= 0) trips.emplace_back(r, pos[static_cast<std::size_t>(col)], it.value());
      }
    for (Index i = 0; i < k; ++i) trips.emplace_back(i, i, 1e-9);
    SparseMatrix sub(k, k);
    sub.setFromTriplets(trips.begin(), trips.end());
    bool ok;
    if (static_cast<double>(sub.nonZeros()) > 0.1 * static_cast<double>(k) * static_cast<double>(k)) {
      Eigen::LLT<Matrix> llt{Matrix(sub)};
      ok = llt.info() == Eigen::Success;
    } else {
      Eigen::SimplicialLLT<SparseMatrix> llt(sub);
      ok = llt.info() == Eigen::Success;
    }
    if (!ok) throw std::invalid_argument("ConvexQp: P is not positive semidefinite");
  }
}

double ConvexQp::objective(const Vector& x) const {
  return 0.5 * x.dot(P_ * x) + c_.dot(x) + constant_;
}

ConvexQp ConvexQp::scaled_objective(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("scaled_objective: factor must be positive");
  return ConvexQp(SparseMatrix(factor * P_), factor * c_, A_, b_, G_, h_, names_,
                  factor * constant_);
}

namespace {
void write_sparse(std::ostream& os, const char* name, const SparseMatrix& M) {
  os << name << ' ' << M.rows() << ' ' << M.cols() << ' ' << M.nonZeros() << '\n';
  for (Index k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}
void write_vector(std::ostream& os, const char* name, const Vector& v) {
  os << name << ' ' << v.size() << '\n';
  for (Index i = 0; i < v.size(); ++i) os << v[i] << '\n';
}
}  // namespace

void ConvexQp::write_text(std::ostream& os) const {
  auto old = os.precision(17);
  write_sparse(os, "P", P_);
  write_vector(os, "c", c_);
  write_sparse(os, "A", A_);
  write_vector(os, "b", b_);
  write_sparse(os, "G", G_);
  write_vector(os, "h", h_);
  os << "constant " << constant_ << '\n';
  os.precision(old);
}

QpBuilder::QpBuilder(Index num_variables)
    : n_(num_variables), c_(Vector::Zero(num_variables)),
      names_(static_cast<std::size_t>(num_variables)) {
  if (num_variables <= 0) throw std::invalid_argument("QpBuilder: need at least one variable");
}

void QpBuilder::set_name(Index j, std::string name) { names_.at(static_cast<std::size_t>(j)) = std::move(name); }

void QpBuilder::add_quadratic(Index i, Index j, double value) {
  p_.emplace_back(i, j, value);
  if (i != j) p_.emplace_back(j, i, value);
}

void QpBuilder::add_linear(Index j, double value) { c_[j] += value; }

void QpBuilder::add_quadratic_block(Index offset, const Matrix& block) {
  for (Index j = 0; j < block.cols(); ++j)
    for (Index i = 0; i < block.rows(); ++i)
      if (block(i, j) != 0.0) p_.emplace_back(offset + i, offset + j, block(i, j));
}

Index QpBuilder::add_equality(const std::vector<std::pair<Index, double>>& row, double rhs) {
  Index r = static_cast<Index>(b_.size());
  for (auto [j, v] : row) a_.emplace_back(r, j, v);
  b_.push_back(rhs);
  return r;
}

Index QpBuilder::add_inequality(const std::vector<std::pair<Index, double>>& row, double rhs) {
  Index r = static_cast<Index>(h_.size());
  for (auto [j, v] : row) g_.emplace_back(r, j, v);
  h_.push_back(rhs);
  return r;
}

ConvexQp QpBuilder::build() const {
  SparseMatrix P(n_, n_), A(static_cast<Index>(b_.size()), n_), G(static_cast<Index>(h_.size()), n_);
  P.setFromTriplets(p_.begin(), p_.end());
  A.setFromTriplets(a_.begin(), a_.end());
  G.setFromTriplets(g_.begin(), g_.end());
  Vector b = Eigen::Map<const Vector>(b_.data(), static_cast<Index>(b_.size()));
  Vector h = Eigen::Map<const Vector>(h_.data(), static_cast<Index>(h_.size()));
  bool named = std::any_of(names_.begin(), names_.end(), [](const std::string& s) { return !s.empty(); });
  return ConvexQp(std::move(P), c_, std::move(A), std::move(b), std::move(G), std::move(h),
                  named ? names_ : std::vector<std::string>{}, constant_);
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

double kkt_residual(const ConvexQp& qp, const Vector& x, const Vector& y, const Vector& z) {
  Vector stat = qp.P() * x + qp.c();
  if (y.size() > 0) stat += qp.A().transpose() * y;
  if (z.size() > 0) stat += qp.G().transpose() * z;
  double r = inf_norm(stat);
  if (qp.num_equalities() > 0) r = std::max(r, inf_norm(qp.A() * x - qp.b()));
  if (qp.num_inequalities() > 0) {
    Vector slack = qp.h() - qp.G() * x;
    for (Index i = 0; i < slack.size(); ++i) {
      r = std::max(r, -slack[i]);
      r = std::max(r, -z[i]);
      r = std::max(r, std::abs(z[i] * slack[i]));
    }
  }
  return r;
}

double kkt_residual(const ConvexQp& qp, const QpSolution& sol) {
  return kkt_residual(qp, sol.x, sol.eq_duals, sol.ineq_duals);
}

double lagrangian_dual_value(const ConvexQp& qp, const Vector& x, const Vector& y,
                             const Vector& z) {
  double v = -0.5 * x.dot(qp.P() * x) + qp.constant();
  if (y.size() > 0) v -= qp.b().dot(y);
  if (z.size() > 0) v -= qp.h().dot(z);
  return v;
}

namespace {

// Reduced Newton system
//
//   [ M   H' ] [dx]   [r1]      M = P + Gs' diag(d) Gs
//   [ H  -E  ] [dv] = [r2]      H = [A; Gd],  E = diag(0, 1/d_dense)
//
// where Gs holds the sparse inequality rows and Gd the few dense ones (a dense
// row in Gs would fill M completely). M is factored by splitting the variables
// into an independent set B of its graph, for which M_BB is diagonal, and the
// rest R; the Schur complement on R is factored densely.
class KktSystem {
 public:
  KktSystem(const ConvexQp& qp) : qp_(qp), n_(qp.num_variables()) {
    const Index m = qp.num_inequalities();
    RowSparse Gr = qp.G();
    const Index dense_cut = std::max<Index>(32, n_ / 8);
    std::vector<Triplet> ts, td;
    for (Index i = 0; i < m; ++i) {
      bool dense = Gr.row(i).nonZeros() > dense_cut;
      (dense ? dense_rows_ : sparse_rows_).push_back(i);
      Index r = dense ? static_cast<Index>(dense_rows_.size()) - 1 : static_cast<Index>(sparse_rows_.size()) - 1;
      for (RowSparse::InnerIterator it(Gr, i); it; ++it) (dense ? td : ts).emplace_back(r, it.col(), it.value());
    }
    Gs_.resize(static_cast<Index>(sparse_rows_.size()), n_);
    Gs_.setFromTriplets(ts.begin(), ts.end());
    Gst_ = Gs_.transpose();

    const Index me = qp.num_equalities();
    const Index k = me + static_cast<Index>(dense_rows_.size());
    H_ = Matrix::Zero(k, n_);
    if (me > 0) H_.topRows(me) = Matrix(qp.A());
    for (const auto& t : td) H_(me + t.row(), t.col()) = t.value();
    me_ = me;

    // Structural pattern of M; absolute values rule out cancellation.
    SparseMatrix absP = qp.P().cwiseAbs();
    SparseMatrix absG = Gs_.cwiseAbs();
    SparseMatrix pattern = absP + SparseMatrix(absG.transpose()) * absG;
    std::vector<Index> degree(static_cast<std::size_t>(n_), 0);
    std::vector<char> has_diag(static_cast<std::size_t>(n_), 0);
    for (Index j = 0; j < n_; ++j)
      for (SparseMatrix::InnerIterator it(pattern, j); it; ++it) {
        if (it.row() == j)
          has_diag[static_cast<std::size_t>(j)] = it.value() > 0;
        else
          ++degree[static_cast<std::size_t>(j)];
      }
    std::vector<Index> order(static_cast<std::size_t>(n_));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return degree[static_cast<std::size_t>(a)] < degree[static_cast<std::size_t>(b)];
    });
    std::vector<char> blocked(static_cast<std::size_t>(n_), 0), inB(static_cast<std::size_t>(n_), 0);
    for (Index j : order) {
      auto u = static_cast<std::size_t>(j);
      if (blocked[u] || !has_diag[u]) continue;
      inB[u] = 1;
      for (SparseMatrix::InnerIterator it(pattern, j); it; ++it) blocked[static_cast<std::size_t>(it.row())] = 1;
    }
    pos_.assign(static_cast<std::size_t>(n_), 0);
    for (Index j = 0; j < n_; ++j) {
      auto u = static_cast<std::size_t>(j);
      if (inB[u]) {
        pos_[u] = static_cast<Index>(B_.size());
        B_.push_back(j);
      } else {
        pos_[u] = static_cast<Index>(R_.size());
        R_.push_back(j);
      }
    }
    inB_ = std::move(inB);
  }

  const Matrix& H() const { return H_; }
  Index num_sparse() const { return static_cast<Index>(sparse_rows_.size()); }
  const std::vector<Index>& sparse_rows() const { return sparse_rows_; }
  const std::vector<Index>& dense_rows() const { return dense_rows_; }
  Index num_eq() const { return me_; }
  const SparseMatrix& Gs() const { return Gs_; }
  const SparseMatrix& Gst() const { return Gst_; }

  // d: z/s on sparse rows; wd: s/z on dense rows.
  void factor(const Vector& d, const Vector& wd) {
    d_ = d;
    wd_ = wd;
    SparseMatrix M = qp_.P();
    if (Gs_.rows() > 0) M += Gst_ * (d.asDiagonal() * Gs_);
    M.makeCompressed();

    const Index nb = static_cast<Index>(B_.size()), nr = static_cast<Index>(R_.size());
    dB_inv_.resize(nb);
    Vector dB = Vector::Zero(nb);
    S_ = Matrix::Zero(nr, nr);
    std::vector<Triplet> et;
    double scale = 1.0;
    for (Index j = 0; j < n_; ++j) {
      bool jb = inB_[static_cast<std::size_t>(j)];
      Index pj = pos_[static_cast<std::size_t>(j)];
      for (SparseMatrix::InnerIterator it(M, j); it; ++it) {
        Index i = it.row();
        bool ib = inB_[static_cast<std::size_t>(i)];
        Index pi = pos_[static_cast<std::size_t>(i)];
        if (ib && jb) {
          dB[pj] = it.value();
        } else if (!ib && jb) {
          et.emplace_back(pi, pj, it.value());
        } else if (!ib && !jb) {
          S_(pi, pj) = it.value();
        }
        if (i == j) scale = std::max(scale, std::abs(it.value()));
      }
    }
    for (Index i = 0; i < nb; ++i) dB_inv_[i] = 1.0 / std::max(dB[i], 1e-300);
    E_.resize(nr, nb);
    E_.setFromTriplets(et.begin(), et.end());
    if (nr > 0 && nb > 0 && E_.nonZeros() > 0) {
      SparseMatrix ED = E_ * dB_inv_.asDiagonal();
      SparseMatrix EDE = ED * SparseMatrix(E_.transpose());
      S_ -= Matrix(EDE);
    }
    if (nr > 0) {
      Matrix base = S_;
      for (double delta : {0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4}) {
        if (delta > 0) {
          S_ = base;
          S_.diagonal().array() += delta * scale;
        }
        llt_.compute(S_);
        if (llt_.info() == Eigen::Success) break;
      }
    }

    // Outer Schur complement on H.
    const Index k = H_.rows();
    if (k > 0) {
      Y_.resize(n_, k);
      for (Index c = 0; c < k; ++c) Y_.col(c) = solve_m(H_.row(c).transpose());
      Matrix K = H_ * Y_;
      for (Index i = 0; i < wd_.size(); ++i) K(me_ + i, me_ + i) += wd_[i];
      double kscale = std::max(1.0, K.diagonal().cwiseAbs().maxCoeff());
      K.diagonal().array() += 1e-14 * kscale;
      ldlt_.compute(K);
    }
  }

  // Applies the exact (unregularized) reduced operator.
  void apply(const Vector& x, const Vector& v, Vector& out1, Vector& out2) const {
    out1 = qp_.P() * x;
    if (Gs_.rows() > 0) out1 += Gst_ * (d_.cwiseProduct(Gs_ * x));
    if (H_.rows() > 0) {
      out1 += H_.transpose() * v;
      out2 = H_ * x;
      for (Index i = 0; i < wd_.size(); ++i) out2[me_ + i] -= wd_[i] * v[me_ + i];
    } else {
      out2.resize(0);
    }
  }

  void solve(const Vector& r1, const Vector& r2, Vector& x, Vector& v) const {
    solve_once(r1, r2, x, v);
    Vector a1, a2;
    double rnorm = std::max(inf_norm(r1), inf_norm(r2));
    for (int iter = 0; iter < 4; ++iter) {
      apply(x, v, a1, a2);
      Vector e1 = r1 - a1, e2 = r2 - a2;
      double err = std::max(inf_norm(e1), inf_norm(e2));
      if (err <= 1e-15 * std::max(1.0, rnorm)) break;
      Vector cx, cv;
      solve_once(e1, e2, cx, cv);
      x += cx;
      if (v.size() > 0) v += cv;
    }
  }

 private:
  Vector solve_m(const Vector& r) const {
    const Index nb = static_cast<Index>(B_.size()), nr = static_cast<Index>(R_.size());
    Vector rb(nb), rr(nr);
    for (Index i = 0; i < nb; ++i) rb[i] = r[B_[static_cast<std::size_t>(i)]];
    for (Index i = 0; i < nr; ++i) rr[i] = r[R_[static_cast<std::size_t>(i)]];
    Vector tb = dB_inv_.cwiseProduct(rb);
    Vector vr;
    if (nr > 0) {
      if (nb > 0 && E_.nonZeros() > 0) rr -= E_ * tb;
      vr = llt_.solve(rr);
    }
    Vector vb = rb;
    if (nr > 0 && nb > 0 && E_.nonZeros() > 0) vb -= E_.transpose() * vr;
    vb = dB_inv_.cwiseProduct(vb);
    Vector out(n_);
    for (Index i = 0; i < nb; ++i) out[B_[static_cast<std::size_t>(i)]] = vb[i];
    for (Index i = 0; i < nr; ++i) out[R_[static_cast<std::size_t>(i)]] = vr[i];
    return out;
  }

  void solve_once(const Vector& r1, const Vector& r2, Vector& x, Vector& v) const {
    Vector t = solve_m(r1);
    if (H_.rows() == 0) {
      x = t;
      v.resize(0);
      return;
    }
    v = ldlt_.solve(H_ * t - r2);
    x = t - Y_ * v;
  }

  const ConvexQp& qp_;
  Index n_;
  Index me_ = 0;
  std::vector<Index> sparse_rows_, dense_rows_;
  SparseMatrix Gs_, Gst_;
  Matrix H_;
  std::vector<Index> B_, R_, pos_;
  std::vector<char> inB_;
  Vector d_, wd_, dB_inv_;
  SparseMatrix E_;
  Matrix S_;
  Eigen::LLT<Matrix> llt_;
  Matrix Y_;
  Eigen::LDLT<Matrix> ldlt_;
};

double max_step(const Vector& v, const Vector& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

QpSolution solve_equality_only(const ConvexQp& qp, const QpSettings& settings) {
  const Index n = qp.num_variables(), me = qp.num_equalities();
  Matrix K = Matrix::Zero(n + me, n + me);
  K.topLeftCorner(n, n) = Matrix(qp.P());
  if (me > 0) {
    Matrix A(qp.A());
    K.bottomLeftCorner(me, n) = A;
    K.topRightCorner(n, me) = A.transpose();
  }
  Vector rhs(n + me);
  rhs << -qp.c(), qp.b();
  Eigen::FullPivLU<Matrix> lu(K);
  Vector sol = lu.solve(rhs);
  QpSolution out;
  out.x = sol.head(n);
  out.eq_duals = sol.tail(me);
  out.ineq_duals = Vector(0);
  out.objective = qp.objective(out.x);
  out.kkt_residual = kkt_residual(qp, out);
  out.iterations = 1;
  if (out.kkt_residual <= settings.tolerance)
    out.status = QpStatus::Optimal;
  else if (me > 0 && inf_norm(qp.A() * out.x - qp.b()) > settings.tolerance)
    out.status = QpStatus::Infeasible;
  else
    out.status = QpStatus::MaxIterations;
  return out;
}

}  // namespace

QpSolution solve_qp(const ConvexQp& qp, const QpSettings& settings) {
  const Index me = qp.num_equalities(), mi = qp.num_inequalities();
  if (mi == 0) return solve_equality_only(qp, settings);

  KktSystem kkt(qp);
  const auto& srows = kkt.sparse_rows();
  const auto& drows = kkt.dense_rows();
  const Index ns = static_cast<Index>(srows.size()), nd = static_cast<Index>(drows.size());
  const SparseMatrix& G = qp.G();
  const SparseMatrix At = qp.A().transpose();
  const SparseMatrix Gt = G.transpose();

  auto gather = [](const Vector& v, const std::vector<Index>& idx) {
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
    return out;
  };
  auto scatter = [](Vector& v, const std::vector<Index>& idx, const Vector& part) {
    for (std::size_t i = 0; i < idx.size(); ++i) v[idx[i]] = part[static_cast<Index>(i)];
  };

  // Starting point: least-squares primal and dual estimates, shifted inside
  // the cone.
  Vector x, y(me), s(mi), z(mi);
  {
    kkt.factor(Vector::Ones(ns), Vector::Ones(nd));
    Vector r1 = -qp.c();
    if (ns > 0) r1 += kkt.Gst() * gather(qp.h(), srows);
    Vector r2(me + nd);
    if (me > 0) r2.head(me) = qp.b();
    if (nd > 0) r2.tail(nd) = gather(qp.h(), drows);
    Vector v;
    kkt.solve(r1, r2, x, v);
    s = qp.h() - G * x;

    Vector x1, v1;
    Vector q2 = Vector::Zero(me + nd);
    kkt.solve(-qp.c(), q2, x1, v1);
    Vector gz = G * x1;
    for (Index i = 0; i < ns; ++i) z[srows[static_cast<std::size_t>(i)]] = gz[srows[static_cast<std::size_t>(i)]];
    for (Index i = 0; i < nd; ++i) z[drows[static_cast<std::size_t>(i)]] = v1[me + i];
    y = me > 0 ? Vector(v1.head(me)) : Vector(0);

    double ts = -s.minCoeff();
    if (ts >= -1e-8 * std::max(1.0, inf_norm(s))) s.array() += 1.0 + std::max(ts, 0.0);
    double tz = -z.minCoeff();
    if (tz >= -1e-8 * std::max(1.0, inf_norm(z))) z.array() += 1.0 + std::max(tz, 0.0);
  }

  QpSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();
  double best_merit = best.kkt_residual;
  int since_best = 0;
  int it = 0;
  for (;; ++it) {
    double res = kkt_residual(qp, x, y, z);
    // The residual bounds each complementarity product; the summed gap also
    // has to be small for the objective value itself to be accurate.
    double gap = std::abs(z.dot(qp.h() - G * x));
    double merit = std::max(res, 10.0 * gap / std::max(1.0, std::abs(qp.objective(x))));
    if (merit < best_merit) {
      best.x = x;
      best.eq_duals = y;
      best.ineq_duals = z;
      best.kkt_residual = res;
      best.iterations = it;
      best_merit = merit;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (merit <= settings.tolerance) {
      best.status = QpStatus::Optimal;
      break;
    }

    Vector rd = qp.P() * x + qp.c() + Gt * z;
    if (me > 0) rd += At * y;
    Vector rp = me > 0 ? Vector(qp.A() * x - qp.b()) : Vector(0);
    Vector rg = G * x + s - qp.h();

    // Farkas certificate: A'y + G'z = 0, z >= 0, b'y + h'z < 0.
    double tau = -(qp.h().dot(z) + (me > 0 ? qp.b().dot(y) : 0.0));
    if (tau > 0) {
      Vector cert = Gt * z;
      if (me > 0) cert += At * y;
      double primal_res = std::max(inf_norm(rp), std::max(0.0, (G * x - qp.h()).maxCoeff()));
      if (inf_norm(cert) <= 1e-9 * tau && primal_res > settings.tolerance) {
        best.status = QpStatus::Infeasible;
        best.x = x;
        best.eq_duals = y;
        best.ineq_duals = z;
        best.kkt_residual = res;
        best.iterations = it;
        break;
      }
    }
    if (it >= settings.max_iterations || since_best > 25) {
      best.status = QpStatus::MaxIterations;
      break;
    }

    const double mu = s.dot(z) / static_cast<double>(mi);
    Vector d = z.cwiseQuotient(s);
    Vector dd = gather(d, srows);
    Vector wd = gather(s.cwiseQuotient(z), drows);
    kkt.factor(dd, wd);

    auto direction = [&](const Vector& rsz, Vector& dx, Vector& dy, Vector& ds, Vector& dz) {
      Vector t = rg - rsz.cwiseQuotient(z);  // r_g - r_sz / z
      Vector ts = gather(t, srows);
      Vector r1 = -rd;
      if (ns > 0) r1 -= kkt.Gst() * dd.cwiseProduct(ts);
      Vector r2(me + nd);
      if (me > 0) r2.head(me) = -rp;
      if (nd > 0) r2.tail(nd) = -gather(t, drows);
      Vector v;
      kkt.solve(r1, r2, dx, v);
      dy = me > 0 ? Vector(v.head(me)) : Vector(0);
      dz.resize(mi);
      if (ns > 0) {
        Vector gdx = kkt.Gs() * dx;
        scatter(dz, srows, dd.cwiseProduct(gdx + ts));
      }
      if (nd > 0) scatter(dz, drows, v.tail(nd));
      ds = -(rsz + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    Vector dx, dy, ds, dz;
    Vector rsz = s.cwiseProduct(z);
    direction(rsz, dx, dy, ds, dz);
    double a_aff = std::min({1.0, max_step(s, ds), max_step(z, dz)});
    double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(mi);
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    Vector rsz2 = rsz + ds.cwiseProduct(dz);
    rsz2.array() -= sigma * mu;
    direction(rsz2, dx, dy, ds, dz);
    double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));

    x += a * dx;
    if (me > 0) y += a * dy;
    s += a * ds;
    z += a * dz;
  }

  best.objective = qp.objective(best.x);
  if (best.status != QpStatus::Optimal) best.iterations = it;
  return best;
}

}  // namespace rqsvr
