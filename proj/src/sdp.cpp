#include "momenta/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "momenta/log.hpp"

namespace momenta {

// ---------------------------------------------------------------------------
// Expr

Expr Expr::var(int j, double coef) {
  Expr e;
  e.add(j, coef);
  return e;
}

Expr& Expr::add(int j, double coef) {
  if (j < 0) throw InvalidArgument("negative variable index in expression");
  if (!std::isfinite(coef)) throw InvalidArgument("non-finite coefficient in expression");
  auto [it, inserted] = terms_.try_emplace(j, 0.0);
  it->second += coef;
  if (it->second == 0.0) terms_.erase(it);
  return *this;
}

double Expr::eval(const Eigen::VectorXd& x) const {
  double v = constant_;
  for (const auto& [j, a] : terms_) v += a * x[j];
  return v;
}

Expr& Expr::operator+=(const Expr& o) {
  for (const auto& [j, a] : o.terms_) add(j, a);
  constant_ += o.constant_;
  return *this;
}

Expr& Expr::operator-=(const Expr& o) {
  for (const auto& [j, a] : o.terms_) add(j, -a);
  constant_ -= o.constant_;
  return *this;
}

Expr& Expr::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    constant_ = 0.0;
    return *this;
  }
  for (auto& t : terms_) t.second *= s;
  constant_ *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// ConicProgram

int ConicProgram::add_variable(VarKind kind) {
  kinds_.push_back(kind);
  return static_cast<int>(kinds_.size()) - 1;
}

int ConicProgram::add_variables(int count, VarKind kind) {
  if (count < 0) throw InvalidArgument("negative variable count");
  const int first = num_variables();
  kinds_.insert(kinds_.end(), count, kind);
  return first;
}

int ConicProgram::svec_index(int side, int i, int j) {
  if (i < j) std::swap(i, j);
  return j * side - j * (j - 1) / 2 + (i - j);
}

int ConicProgram::add_psd_variable(int side) {
  if (side < 1) throw InvalidArgument("psd variable needs side >= 1");
  const int first = add_variables(side * (side + 1) / 2);
  std::vector<Expr> m(static_cast<std::size_t>(side) * side);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) m[i * side + j] = Expr::var(first + svec_index(side, i, j));
  }
  add_lmi(m, side);
  return first;
}

void ConicProgram::check(const Expr& e) const {
  if (!std::isfinite(e.constant())) throw InvalidArgument("non-finite constant in constraint");
  if (!e.terms().empty() && e.terms().rbegin()->first >= num_variables()) {
    throw InvalidArgument("constraint references undeclared variable " +
                          std::to_string(e.terms().rbegin()->first));
  }
}

void ConicProgram::add_equality(const Expr& e) {
  check(e);
  eqs_.push_back(e);
}

void ConicProgram::add_nonneg(const Expr& e) {
  check(e);
  nonneg_.push_back(e);
}

void ConicProgram::add_soc(const std::vector<Expr>& tu) {
  if (tu.empty()) throw InvalidArgument("second-order cone needs at least one entry");
  for (const auto& e : tu) check(e);
  socs_.push_back(tu);
}

namespace {

bool same_expr(const Expr& a, const Expr& b) {
  const double tol = 1e-12;
  if (std::abs(a.constant() - b.constant()) > tol * (1 + std::abs(a.constant()))) return false;
  Expr d = a - b;
  for (const auto& [j, c] : d.terms()) {
    if (std::abs(c) > tol * (1 + std::abs(a.terms().count(j) ? a.terms().at(j) : 0.0))) return false;
  }
  return true;
}

}  // namespace

void ConicProgram::add_lmi(const std::vector<Expr>& entries, int side) {
  if (side < 1) throw InvalidArgument("matrix inequality needs side >= 1");
  if (static_cast<int>(entries.size()) != side * side) {
    throw DimensionMismatch("matrix inequality expects side*side entries");
  }
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < i; ++j) {
      if (!same_expr(entries[i * side + j], entries[j * side + i])) {
        throw InvalidArgument("matrix inequality is not symmetric");
      }
    }
  }
  for (const auto& e : entries) check(e);
  lmis_.push_back({side, entries});
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalLimit: return "numerical_limit";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Cone algebra

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using SpRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

const double kSqrt2 = std::sqrt(2.0);

struct Cones {
  int l = 0;
  std::vector<int> q, qoff;
  std::vector<int> s, soff;
  int dim = 0;
  int degree = 0;  // nu

  void finish() {
    int off = l;
    for (int k : q) {
      qoff.push_back(off);
      off += k;
    }
    for (int k : s) {
      soff.push_back(off);
      off += k * (k + 1) / 2;
    }
    dim = off;
    degree = l + static_cast<int>(q.size()) + std::accumulate(s.begin(), s.end(), 0);
  }
};

int svec_len(int k) { return k * (k + 1) / 2; }

MatrixXd smat(const double* v, int k) {
  MatrixXd M(k, k);
  int idx = 0;
  for (int j = 0; j < k; ++j) {
    M(j, j) = v[idx++];
    for (int i = j + 1; i < k; ++i) {
      M(i, j) = M(j, i) = v[idx++] / kSqrt2;
    }
  }
  return M;
}

void svec(const MatrixXd& M, double* v) {
  const int k = static_cast<int>(M.rows());
  int idx = 0;
  for (int j = 0; j < k; ++j) {
    v[idx++] = M(j, j);
    for (int i = j + 1; i < k; ++i) v[idx++] = kSqrt2 * 0.5 * (M(i, j) + M(j, i));
  }
}

VectorXd identity(const Cones& K) {
  VectorXd e = VectorXd::Zero(K.dim);
  e.head(K.l).setOnes();
  for (std::size_t b = 0; b < K.q.size(); ++b) e[K.qoff[b]] = 1.0;
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int k = K.s[b];
    int idx = K.soff[b];
    for (int j = 0; j < k; ++j) {
      e[idx] = 1.0;
      idx += k - j;
    }
  }
  return e;
}

// Jordan product u o v.
VectorXd jprod(const Cones& K, const VectorXd& u, const VectorXd& v) {
  VectorXd r(K.dim);
  r.head(K.l) = u.head(K.l).cwiseProduct(v.head(K.l));
  for (std::size_t b = 0; b < K.q.size(); ++b) {
    const int o = K.qoff[b], m = K.q[b];
    r[o] = u.segment(o, m).dot(v.segment(o, m));
    r.segment(o + 1, m - 1) = u[o] * v.segment(o + 1, m - 1) + v[o] * u.segment(o + 1, m - 1);
  }
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    const MatrixXd U = smat(u.data() + o, k), V = smat(v.data() + o, k);
    svec(0.5 * (U * V + V * U), r.data() + o);
  }
  return r;
}

// Scaled NT point lambda; PSD blocks are diagonal and keep their eigenvalues.
struct Lambda {
  VectorXd vec;
  std::vector<VectorXd> eig;
};

// Solves lambda o x = w for x.
VectorXd jdiv(const Cones& K, const Lambda& lam, const VectorXd& w) {
  const VectorXd& l = lam.vec;
  VectorXd x(K.dim);
  x.head(K.l) = w.head(K.l).cwiseQuotient(l.head(K.l));
  for (std::size_t b = 0; b < K.q.size(); ++b) {
    const int o = K.qoff[b], m = K.q[b];
    const double l0 = l[o];
    const auto l1 = l.segment(o + 1, m - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * w[o] - l1.dot(w.segment(o + 1, m - 1))) / det;
    x[o] = x0;
    x.segment(o + 1, m - 1) = (w.segment(o + 1, m - 1) - x0 * l1) / l0;
  }
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    const VectorXd& ev = lam.eig[b];
    int idx = o;
    for (int j = 0; j < k; ++j) {
      for (int i = j; i < k; ++i, ++idx) x[idx] = 2.0 * w[idx] / (ev[i] + ev[j]);
    }
  }
  return x;
}

// Largest t with lambda + t*u in the cone (infinity if unbounded).
double max_step(const Cones& K, const Lambda& lam, const VectorXd& u) {
  const double inf = std::numeric_limits<double>::infinity();
  const VectorXd& l = lam.vec;
  double t = inf;
  for (int i = 0; i < K.l; ++i) {
    if (u[i] < 0) t = std::min(t, -l[i] / u[i]);
  }
  for (std::size_t b = 0; b < K.q.size(); ++b) {
    const int o = K.qoff[b], m = K.q[b];
    auto jdot = [&](const VectorXd& a, const VectorXd& c) {
      return a[o] * c[o] - a.segment(o + 1, m - 1).dot(c.segment(o + 1, m - 1));
    };
    const double a = jdot(u, u), bb = 2.0 * jdot(l, u), c = jdot(l, l);
    double root = inf;
    if (std::abs(a) < 1e-300) {
      if (bb < 0) root = -c / bb;
    } else {
      const double disc = bb * bb - 4 * a * c;
      if (disc >= 0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (bb + (bb >= 0 ? sq : -sq));
        for (double r : {qq / a, qq != 0.0 ? c / qq : inf}) {
          if (r > 0) root = std::min(root, r);
        }
      }
    }
    // Guard against the lower nappe: the cone axis must stay positive too.
    if (u[o] < 0) root = std::min(root, -l[o] / u[o]);
    t = std::min(t, root);
  }
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    const VectorXd is = lam.eig[b].cwiseSqrt().cwiseInverse();
    const MatrixXd U = is.asDiagonal() * smat(u.data() + o, k) * is.asDiagonal();
    const double mn = Eigen::SelfAdjointEigenSolver<MatrixXd>(U, Eigen::EigenvaluesOnly).eigenvalues()[0];
    if (mn < 0) t = std::min(t, -1.0 / mn);
  }
  return t;
}

// Smallest t such that v + t*e is on the cone boundary's closure (max over blocks).
double boundary_shift(const Cones& K, const VectorXd& v) {
  double t = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < K.l; ++i) t = std::max(t, -v[i]);
  for (std::size_t b = 0; b < K.q.size(); ++b) {
    const int o = K.qoff[b], m = K.q[b];
    t = std::max(t, v.segment(o + 1, m - 1).norm() - v[o]);
  }
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    const double mn = Eigen::SelfAdjointEigenSolver<MatrixXd>(smat(v.data() + o, k), Eigen::EigenvaluesOnly)
                          .eigenvalues()[0];
    t = std::max(t, -mn);
  }
  return t;
}

// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
struct Scaling {
  VectorXd d;
  std::vector<double> beta;
  std::vector<VectorXd> v;
  std::vector<MatrixXd> R, Rinv;
};

enum class Op { W, Wt, Winv, Wtinv };

VectorXd apply(const Cones& K, const Scaling& S, Op op, const VectorXd& in) {
  VectorXd out(K.dim);
  if (op == Op::W || op == Op::Wt) {
    out.head(K.l) = S.d.cwiseProduct(in.head(K.l));
  } else {
    out.head(K.l) = in.head(K.l).cwiseQuotient(S.d);
  }
  for (std::size_t b = 0; b < K.q.size(); ++b) {
    const int o = K.qoff[b], m = K.q[b];
    const VectorXd& v = S.v[b];
    const auto u = in.segment(o, m);
    VectorXd Ju = u;
    Ju.tail(m - 1) *= -1.0;
    if (op == Op::W || op == Op::Wt) {
      out.segment(o, m) = S.beta[b] * (2.0 * v.dot(u) * v - Ju);
    } else {
      VectorXd Jv = v;
      Jv.tail(m - 1) *= -1.0;
      out.segment(o, m) = (2.0 * Jv.dot(u) * Jv - Ju) / S.beta[b];
    }
  }
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    const MatrixXd U = smat(in.data() + o, k);
    MatrixXd r;
    switch (op) {
      case Op::W: r = S.R[b].transpose() * U * S.R[b]; break;
      case Op::Wt: r = S.R[b] * U * S.R[b].transpose(); break;
      case Op::Winv: r = S.Rinv[b].transpose() * U * S.Rinv[b]; break;
      case Op::Wtinv: r = S.Rinv[b] * U * S.Rinv[b].transpose(); break;
    }
    svec(r, out.data() + o);
  }
  return out;
}

// Returns false when s or z has left the cone interior numerically.
bool compute_scaling(const Cones& K, const VectorXd& s, const VectorXd& z, Scaling& S, Lambda& lam) {
  lam.vec.resize(K.dim);
  S.d = (s.head(K.l).cwiseQuotient(z.head(K.l))).cwiseSqrt();
  lam.vec.head(K.l) = (s.head(K.l).cwiseProduct(z.head(K.l))).cwiseSqrt();
  if (K.l > 0 && !(s.head(K.l).minCoeff() > 0 && z.head(K.l).minCoeff() > 0)) return false;
  S.beta.assign(K.q.size(), 0.0);
  S.v.assign(K.q.size(), VectorXd());
  for (std::size_t b = 0; b < K.q.size(); ++b) {
    const int o = K.qoff[b], m = K.q[b];
    const VectorXd sb = s.segment(o, m), zb = z.segment(o, m);
    const double sJs = sb[0] * sb[0] - sb.tail(m - 1).squaredNorm();
    const double zJz = zb[0] * zb[0] - zb.tail(m - 1).squaredNorm();
    if (!(sJs > 0 && zJz > 0 && sb[0] > 0 && zb[0] > 0)) return false;
    const double sn = std::sqrt(sJs), zn = std::sqrt(zJz);
    const VectorXd sbar = sb / sn, zbar = zb / zn;
    const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    VectorXd Jz = zbar;
    Jz.tail(m - 1) *= -1.0;
    VectorXd wbar = (sbar + Jz) / (2.0 * gamma);
    VectorXd v = wbar;
    v[0] += 1.0;
    v /= std::sqrt(2.0 * (wbar[0] + 1.0));
    S.v[b] = v;
    S.beta[b] = std::sqrt(sn / zn);
  }
  S.R.assign(K.s.size(), MatrixXd());
  S.Rinv.assign(K.s.size(), MatrixXd());
  lam.eig.assign(K.s.size(), VectorXd());
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    Eigen::LLT<MatrixXd> cs(smat(s.data() + o, k)), cz(smat(z.data() + o, k));
    if (cs.info() != Eigen::Success || cz.info() != Eigen::Success) return false;
    const MatrixXd Ls = cs.matrixL(), Lz = cz.matrixL();
    Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd sv = svd.singularValues();
    if (!(sv.minCoeff() > 0)) return false;
    const VectorXd isq = sv.cwiseSqrt().cwiseInverse();
    S.R[b] = Ls * svd.matrixV() * isq.asDiagonal();
    S.Rinv[b] = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    lam.eig[b] = sv;
  }
  // Remaining lambda entries from W z.
  const VectorXd wz = apply(K, S, Op::W, z);
  lam.vec.tail(K.dim - K.l) = wz.tail(K.dim - K.l);
  for (std::size_t b = 0; b < K.s.size(); ++b) {
    const int o = K.soff[b], k = K.s[b];
    MatrixXd D = MatrixXd::Zero(k, k);
    D.diagonal() = lam.eig[b];
    svec(D, lam.vec.data() + o);
  }
  return lam.vec.allFinite();
}

// ---------------------------------------------------------------------------
// Standard form: min c'x + c0  s.t.  G x + s = h, A x = b, s in K.

struct Standard {
  int n = 0;
  SpRow G;
  VectorXd h;
  MatrixXd A;  // dependent rows removed
  VectorXd b;
  VectorXd c;
  double c0 = 0.0;
  Cones K;
  std::vector<int> eq_rows;  // kept equality rows (indices into prog.equalities())
  bool inconsistent = false;
  // Column support per cone block (nonneg rows are handled row by row).
  std::vector<std::vector<int>> qsupport, ssupport;
  // Equilibration: x = D x~, y = E y~, z = F z~, s = s~ / F.
  VectorXd D, E, F;
};

// Ruiz-style equilibration of [A; G]. Cone rows of one SOC or PSD block share
// a single factor so the cones are preserved.
void equilibrate(Standard& P) {
  const Cones& K = P.K;
  const int n = P.n, p = static_cast<int>(P.A.rows());
  P.D = VectorXd::Ones(n);
  P.E = VectorXd::Ones(p);
  P.F = VectorXd::Ones(K.dim);
  std::vector<std::pair<int, int>> blocks;  // [begin, end) row ranges sharing a factor
  for (int i = 0; i < K.l; ++i) blocks.emplace_back(i, i + 1);
  for (std::size_t b = 0; b < K.q.size(); ++b) blocks.emplace_back(K.qoff[b], K.qoff[b] + K.q[b]);
  for (std::size_t b = 0; b < K.s.size(); ++b) blocks.emplace_back(K.soff[b], K.soff[b] + svec_len(K.s[b]));
  auto clampf = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int pass = 0; pass < 10; ++pass) {
    VectorXd col = VectorXd::Zero(n);
    VectorXd rowG = VectorXd::Zero(K.dim);
    for (int r = 0; r < K.dim; ++r) {
      for (SpRow::InnerIterator it(P.G, r); it; ++it) {
        const double v = std::abs(it.value());
        col[it.col()] = std::max(col[it.col()], v);
        rowG[r] = std::max(rowG[r], v);
      }
    }
    VectorXd rowA = VectorXd::Zero(p);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < n; ++j) {
        const double v = std::abs(P.A(i, j));
        col[j] = std::max(col[j], v);
        rowA[i] = std::max(rowA[i], v);
      }
    }
    VectorXd dc(n), de(p), df(K.dim);
    for (int j = 0; j < n; ++j) dc[j] = col[j] > 0 ? 1.0 / std::sqrt(col[j]) : 1.0;
    for (int i = 0; i < p; ++i) de[i] = rowA[i] > 0 ? 1.0 / std::sqrt(rowA[i]) : 1.0;
    for (const auto& [b0, b1] : blocks) {
      const double m = rowG.segment(b0, b1 - b0).maxCoeff();
      df.segment(b0, b1 - b0).setConstant(m > 0 ? 1.0 / std::sqrt(m) : 1.0);
    }
    // PSD blocks admit a congruence D X D, which scales svec entry (i, j) by d_i d_j.
    for (std::size_t b = 0; b < K.s.size(); ++b) {
      const int k = K.s[b], o = K.soff[b];
      VectorXd g = VectorXd::Zero(k);
      int r = o;
      for (int j = 0; j < k; ++j) {
        for (int i = j; i < k; ++i, ++r) {
          g[i] = std::max(g[i], rowG[r]);
          g[j] = std::max(g[j], rowG[r]);
        }
      }
      VectorXd d(k);
      for (int i = 0; i < k; ++i) d[i] = g[i] > 0 ? std::pow(g[i], -0.25) : 1.0;
      r = o;
      for (int j = 0; j < k; ++j) {
        for (int i = j; i < k; ++i, ++r) df[r] = d[i] * d[j];
      }
    }
    for (int j = 0; j < n; ++j) dc[j] = clampf(P.D[j] * dc[j]) / P.D[j];
    for (int i = 0; i < p; ++i) de[i] = clampf(P.E[i] * de[i]) / P.E[i];
    const int psd0 = K.s.empty() ? K.dim : K.soff[0];
    for (int r = 0; r < psd0; ++r) df[r] = clampf(P.F[r] * df[r]) / P.F[r];
    P.G = df.asDiagonal() * P.G * dc.asDiagonal();
    P.A = de.asDiagonal() * P.A * dc.asDiagonal();
    P.D = P.D.cwiseProduct(dc);
    P.E = P.E.cwiseProduct(de);
    P.F = P.F.cwiseProduct(df);
  }
  P.G.makeCompressed();
  P.c = P.D.cwiseProduct(P.c);
  P.b = P.E.cwiseProduct(P.b);
  P.h = P.F.cwiseProduct(P.h);
}

Standard compile(const ConicProgram& prog) {
  Standard P;
  P.n = prog.num_variables();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> h;
  int row = 0;
  auto add_row = [&](const Expr& e, double scale) {
    for (const auto& [j, a] : e.terms()) trip.emplace_back(row, j, -scale * a);
    h.push_back(scale * e.constant());
    ++row;
  };
  for (int j = 0; j < P.n; ++j) {
    if (prog.kind(j) == VarKind::Nonneg) add_row(Expr::var(j), 1.0);
  }
  for (const auto& e : prog.nonnegs()) add_row(e, 1.0);
  P.K.l = row;
  for (const auto& cone : prog.socs()) {
    P.K.q.push_back(static_cast<int>(cone.size()));
    for (const auto& e : cone) add_row(e, 1.0);
  }
  for (const auto& lmi : prog.lmis()) {
    const int k = lmi.side;
    P.K.s.push_back(k);
    for (int j = 0; j < k; ++j) {
      for (int i = j; i < k; ++i) add_row(lmi.entries[i * k + j], i == j ? 1.0 : kSqrt2);
    }
  }
  P.K.finish();
  P.G.resize(P.K.dim, P.n);
  P.G.setFromTriplets(trip.begin(), trip.end());
  P.G.makeCompressed();
  P.h = Eigen::Map<VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));

  P.c = VectorXd::Zero(P.n);
  for (const auto& [j, a] : prog.objective().terms()) P.c[j] = a;
  P.c0 = prog.objective().constant();

  const int p = static_cast<int>(prog.equalities().size());
  MatrixXd A = MatrixXd::Zero(p, P.n);
  VectorXd b(p);
  for (int i = 0; i < p; ++i) {
    const Expr& e = prog.equalities()[i];
    for (const auto& [j, a] : e.terms()) A(i, j) = a;
    b[i] = -e.constant();
  }
  if (p > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    std::vector<int> keep;
    for (int i = 0; i < rank; ++i) keep.push_back(qr.colsPermutation().indices()[i]);
    std::sort(keep.begin(), keep.end());
    P.A.resize(rank, P.n);
    P.b.resize(rank);
    for (int i = 0; i < rank; ++i) {
      P.A.row(i) = A.row(keep[i]);
      P.b[i] = b[keep[i]];
    }
    P.eq_rows = keep;
    if (rank < p) {
      // Dropped rows must be implied by the kept ones.
      const VectorXd x0 = P.A.transpose() * (P.A * P.A.transpose()).ldlt().solve(P.b);
      const double r = (A * x0 - b).norm();
      if (r > 1e-8 * (1.0 + b.norm())) P.inconsistent = true;
    }
  } else {
    P.A.resize(0, P.n);
    P.b.resize(0);
  }

  if (!P.inconsistent) equilibrate(P);

  // Column supports of cone blocks.
  auto support = [&](int r0, int len) {
    std::vector<char> mark(P.n, 0);
    for (int r = r0; r < r0 + len; ++r) {
      for (SpRow::InnerIterator it(P.G, r); it; ++it) mark[it.col()] = 1;
    }
    std::vector<int> s;
    for (int j = 0; j < P.n; ++j) {
      if (mark[j]) s.push_back(j);
    }
    return s;
  };
  for (std::size_t bq = 0; bq < P.K.q.size(); ++bq) P.qsupport.push_back(support(P.K.qoff[bq], P.K.q[bq]));
  for (std::size_t bs = 0; bs < P.K.s.size(); ++bs) {
    P.ssupport.push_back(support(P.K.soff[bs], svec_len(P.K.s[bs])));
  }
  return P;
}

// ---------------------------------------------------------------------------
// KKT system: A'y + G'z = rx, A x = ry, G x - W'W z = rz, solved as one
// sparse quasi-definite system with static regularization and iterative
// refinement against the unregularized operator.

class Kkt {
 public:
  explicit Kkt(const Standard& P) : P_(P) {
    const Cones& K = P_.K;
    const int n = P_.n, p = static_cast<int>(P_.A.rows());
    N_ = n + p + K.dim;
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < n; ++j) trip.emplace_back(j, j, 1.0);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < n; ++j) {
        if (P_.A(i, j) != 0.0) trip.emplace_back(n + i, j, P_.A(i, j));
      }
      trip.emplace_back(n + i, n + i, -1.0);
    }
    for (int r = 0; r < K.dim; ++r) {
      for (SpRow::InnerIterator it(P_.G, r); it; ++it) trip.emplace_back(n + p + r, it.col(), it.value());
    }
    for (int i = 0; i < K.l; ++i) trip.emplace_back(n + p + i, n + p + i, -1.0);
    auto dense_block = [&](int o, int len) {
      for (int a = 0; a < len; ++a) {
        for (int c = 0; c <= a; ++c) trip.emplace_back(n + p + o + a, n + p + o + c, a == c ? -1.0 : 0.0);
      }
    };
    for (std::size_t b = 0; b < K.q.size(); ++b) dense_block(K.qoff[b], K.q[b]);
    for (std::size_t b = 0; b < K.s.size(); ++b) dense_block(K.soff[b], svec_len(K.s[b]));
    M_.resize(N_, N_);
    M_.setFromTriplets(trip.begin(), trip.end());
    M_.makeCompressed();
    ldlt_.analyzePattern(M_);
    // Value offsets of the -W'W block entries, in triplet order.
    zpos_.clear();
    for (int i = 0; i < K.l; ++i) zpos_.push_back(&M_.coeffRef(n + p + i, n + p + i));
    auto block_pos = [&](int o, int len) {
      for (int a = 0; a < len; ++a) {
        for (int c = 0; c <= a; ++c) zpos_.push_back(&M_.coeffRef(n + p + o + a, n + p + o + c));
      }
    };
    for (std::size_t b = 0; b < K.q.size(); ++b) block_pos(K.qoff[b], K.q[b]);
    for (std::size_t b = 0; b < K.s.size(); ++b) block_pos(K.soff[b], svec_len(K.s[b]));
    for (int j = 0; j < n; ++j) xdiag_.push_back(&M_.coeffRef(j, j));
    for (int i = 0; i < p; ++i) ydiag_.push_back(&M_.coeffRef(n + i, n + i));
  }

  bool factor(const Scaling& S) {
    S_ = &S;
    const Cones& K = P_.K;
    blocks_.assign(K.q.size() + K.s.size(), MatrixXd());
    for (std::size_t b = 0; b < K.q.size(); ++b) {
      const int m = K.q[b];
      const VectorXd& v = S.v[b];
      MatrixXd W = 2.0 * v * v.transpose();
      W(0, 0) -= 1.0;
      for (int i = 1; i < m; ++i) W(i, i) += 1.0;
      W *= S.beta[b];
      blocks_[b] = W * W;
    }
    for (std::size_t b = 0; b < K.s.size(); ++b) {
      const int k = K.s[b];
      const MatrixXd T = S.R[b] * S.R[b].transpose();
      blocks_[K.q.size() + b] = skron(T, k);
    }
    for (double reg : {1e-6}) {
      fill(S, reg);
      ldlt_.factorize(M_);
      if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite() &&
          ldlt_.vectorD().cwiseAbs().minCoeff() > 0.0) {
        return true;
      }
    }
    return false;
  }

  void solve(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& x, VectorXd& y,
             VectorXd& z) const {
    const int n = P_.n, p = static_cast<int>(P_.A.rows());
    VectorXd rhs(N_);
    rhs << rx, ry, rz;
    VectorXd u = ldlt_.solve(rhs);
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 10; ++it) {
      const VectorXd e = rhs - apply_kkt(u);
      const double en = e.lpNorm<Eigen::Infinity>();
      if (en <= 1e-15 * scale || en > 0.5 * prev) break;
      prev = en;
      u += ldlt_.solve(e);
    }
    x = u.head(n);
    y = u.segment(n, p);
    z = u.tail(P_.K.dim);
  }

 private:
  // Symmetric Kronecker T (x)_s T acting on svec: svec(U) -> svec(T U T).
  static MatrixXd skron(const MatrixXd& T, int k) {
    std::vector<std::pair<int, int>> ij;
    for (int j = 0; j < k; ++j) {
      for (int i = j; i < k; ++i) ij.emplace_back(i, j);
    }
    const int len = static_cast<int>(ij.size());
    MatrixXd out(len, len);
    for (int r = 0; r < len; ++r) {
      const auto [i, j] = ij[r];
      for (int c = 0; c < len; ++c) {
        const auto [a, b] = ij[c];
        double v;
        if (i == j && a == b) {
          v = T(i, a) * T(i, a);
        } else if (a == b) {
          v = kSqrt2 * T(i, a) * T(j, a);
        } else if (i == j) {
          v = kSqrt2 * T(i, a) * T(i, b);
        } else {
          v = T(i, a) * T(j, b) + T(i, b) * T(j, a);
        }
        out(r, c) = v;
      }
    }
    return out;
  }

  void fill(const Scaling& S, double reg) {
    const Cones& K = P_.K;
    for (double* v : xdiag_) *v = reg;
    for (double* v : ydiag_) *v = -reg;
    std::size_t q = 0;
    for (int i = 0; i < K.l; ++i) *zpos_[q++] = -S.d[i] * S.d[i] - reg;
    for (const auto& B : blocks_) {
      for (Eigen::Index a = 0; a < B.rows(); ++a) {
        for (Eigen::Index c = 0; c <= a; ++c) *zpos_[q++] = -B(a, c) - (a == c ? reg : 0.0);
      }
    }
  }

  // Unregularized KKT operator.
  VectorXd apply_kkt(const VectorXd& u) const {
    const Cones& K = P_.K;
    const int n = P_.n, p = static_cast<int>(P_.A.rows());
    const auto x = u.head(n);
    const auto y = u.segment(n, p);
    const VectorXd z = u.tail(K.dim);
    VectorXd out(N_);
    out.head(n) = P_.G.transpose() * z;
    if (p > 0) {
      out.head(n) += P_.A.transpose() * y;
      out.segment(n, p) = P_.A * x;
    }
    VectorXd wz(K.dim);
    for (int i = 0; i < K.l; ++i) wz[i] = S_->d[i] * S_->d[i] * z[i];
    for (std::size_t b = 0; b < K.q.size(); ++b) {
      wz.segment(K.qoff[b], K.q[b]) = blocks_[b] * z.segment(K.qoff[b], K.q[b]);
    }
    for (std::size_t b = 0; b < K.s.size(); ++b) {
      const int len = svec_len(K.s[b]);
      wz.segment(K.soff[b], len) = blocks_[K.q.size() + b] * z.segment(K.soff[b], len);
    }
    out.tail(K.dim) = P_.G * x - wz;
    return out;
  }

  const Standard& P_;
  const Scaling* S_ = nullptr;
  int N_ = 0;
  SpMat M_;
  std::vector<double*> zpos_, xdiag_, ydiag_;
  std::vector<MatrixXd> blocks_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt_;
};

double safe_norm(const VectorXd& v) { return v.size() ? v.norm() : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts) {
  for (const auto& lmi : prog.lmis()) {
    if (lmi.side > opts.max_psd_side) {
      throw InvalidArgument("PSD block of side " + std::to_string(lmi.side) + " exceeds cap " +
                            std::to_string(opts.max_psd_side));
    }
  }
  const Standard P = compile(prog);
  const Cones& K = P.K;
  const int n = P.n;
  ConicSolution sol;
  sol.x = VectorXd::Zero(n);
  sol.y = VectorXd::Zero(static_cast<Eigen::Index>(prog.equalities().size()));
  sol.z = VectorXd::Zero(K.dim);
  if (P.inconsistent) {
    sol.status = SolveStatus::Infeasible;
    return sol;
  }

  // Norms and residuals are measured on the original (unequilibrated) data.
  const double nb = std::max(1.0, safe_norm(P.b.cwiseQuotient(P.E)));
  const double nc = std::max(1.0, P.c.cwiseQuotient(P.D).norm());
  const double nh = std::max(1.0, P.h.cwiseQuotient(P.F).norm());
  const VectorXd e = identity(K);

  auto expand_y = [&](const VectorXd& yk) {
    VectorXd y = VectorXd::Zero(static_cast<Eigen::Index>(prog.equalities().size()));
    for (std::size_t i = 0; i < P.eq_rows.size(); ++i) y[P.eq_rows[i]] = yk[i];
    return y;
  };

  // Starting point from least-squares problems with W = I.
  Scaling S;
  S.d = VectorXd::Ones(K.l);
  for (int m : K.q) {
    S.beta.push_back(1.0);
    VectorXd v = VectorXd::Zero(m);
    v[0] = 1.0;
    S.v.push_back(v);
  }
  for (int k : K.s) {
    S.R.push_back(MatrixXd::Identity(k, k));
    S.Rinv.push_back(MatrixXd::Identity(k, k));
  }
  Kkt kkt(P);
  if (!kkt.factor(S)) {
    sol.status = SolveStatus::NumericalLimit;
    return sol;
  }
  VectorXd x, y, z, s, tmpx, tmpy;
  kkt.solve(VectorXd::Zero(n), P.b, P.h, x, y, s);
  s = -s;
  kkt.solve(-P.c, VectorXd::Zero(P.b.size()), VectorXd::Zero(K.dim), tmpx, y, z);
  {
    const double ts = boundary_shift(K, s);
    if (K.dim > 0 && ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
    const double tz = boundary_shift(K, z);
    if (K.dim > 0 && tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  Lambda lam;
  ConicSolution best;  // best iterate so far, returned on numerical trouble
  double best_merit = std::numeric_limits<double>::infinity();
  int best_it = 0;
  double best_cert = std::numeric_limits<double>::infinity();
  int last_cert_it = 0;
  int it = 0;
  for (;; ++it) {
    const VectorXd rx = P.A.transpose() * y + P.G.transpose() * z + tau * P.c;
    const VectorXd ry = tau * P.b - P.A * x;
    const VectorXd rz = tau * P.h - P.G * x - s;
    const double cx = P.c.dot(x), by = P.b.dot(y), hz = P.h.dot(z);
    const double rt = kappa + cx + by + hz;

    const double pcost = cx / tau, dcost = -(hz + by) / tau;
    const double gap = s.dot(z) / (tau * tau);
    // Residuals relative to the magnitude of the terms that produce them.
    const VectorXd Ax = P.A * x, Gx = P.G * x;
    const double pres_y =
        safe_norm(ry.cwiseQuotient(P.E)) / std::max(nb * tau, safe_norm(Ax.cwiseQuotient(P.E)));
    const double pres_z = rz.cwiseQuotient(P.F).norm() /
                          std::max({nh * tau, Gx.cwiseQuotient(P.F).norm(), s.cwiseQuotient(P.F).norm()});
    const double pres = std::max(pres_y, pres_z);
    const double dres =
        rx.cwiseQuotient(P.D).norm() / std::max({nc * tau, (P.A.transpose() * y).cwiseQuotient(P.D).norm(),
                                                 (P.G.transpose() * z).cwiseQuotient(P.D).norm()});
    const double denom = std::max(std::abs(pcost), std::abs(dcost));
    const double relgap = denom > 0 ? gap / denom : std::numeric_limits<double>::infinity();
    sol.iterations = it;
    if (opts.verbose) {
      std::fprintf(stderr, "%3d pcost % .6e dcost % .6e gap %.2e pres %.2e dres %.2e tau %.2e kappa %.2e\n",
                   it, pcost + P.c0, dcost + P.c0, gap, pres, dres, tau, kappa);
    }
    auto finish = [&](SolveStatus st) {
      sol.status = st;
      sol.x = P.D.cwiseProduct(x) / tau;
      sol.y = expand_y(P.E.cwiseProduct(y) / tau);
      sol.z = P.F.cwiseProduct(z) / tau;
      sol.primal_objective = pcost + P.c0;
      sol.dual_objective = dcost + P.c0;
      sol.gap = gap;
      sol.relative_gap = std::min(relgap, gap);
      sol.primal_residual = pres;
      sol.dual_residual = dres;
    };
    const double merit = std::max({pres, dres, std::min(gap, relgap)});
    if (merit < best_merit) {
      best_merit = merit;
      best_it = it;
      finish(SolveStatus::NumericalLimit);
      best = sol;
    }
    if (pres <= opts.feastol && dres <= opts.feastol && (gap <= opts.abstol || relgap <= opts.reltol)) {
      finish(SolveStatus::Optimal);
      sol.relative_gap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
      return sol;
    }
    double cert = std::numeric_limits<double>::infinity();  // best infeasibility certificate residual
    if (hz + by < 0) {
      const double pinf =
          (P.A.transpose() * y + P.G.transpose() * z).cwiseQuotient(P.D).norm() / nc / (-(hz + by));
      cert = pinf;
      if (pinf <= opts.feastol) {
        sol.status = SolveStatus::Infeasible;
        sol.x = VectorXd::Zero(n);
        sol.y = expand_y(P.E.cwiseProduct(y) / (-(hz + by)));
        sol.z = P.F.cwiseProduct(z) / (-(hz + by));
        return sol;
      }
    }
    if (cx < 0) {
      const double dinf =
          std::max(safe_norm((P.A * x).cwiseQuotient(P.E)) / nb, (P.G * x + s).cwiseQuotient(P.F).norm() / nh) /
          (-cx);
      cert = std::min(cert, dinf);
      if (dinf <= opts.feastol) {
        sol.status = SolveStatus::Unbounded;
        sol.x = P.D.cwiseProduct(x) / (-cx);
        return sol;
      }
    }
    if (cert < 0.95 * best_cert) {
      best_cert = cert;
      last_cert_it = it;
    }
    if (it >= opts.max_iters || it - std::max(best_it, last_cert_it) > 10) {
      MOMENTA_LOG_DEBUG("sdp: no progress, returning iterate %d", best_it);
      return best;
    }

    if (!compute_scaling(K, s, z, S, lam) || !kkt.factor(S)) {
      MOMENTA_LOG_DEBUG("sdp: scaling or factorization failed at iteration %d", it);
      return best;
    }
    const double mu = (s.dot(z) + tau * kappa) / (K.degree + 1);

    VectorXd x1, y1, z1;
    kkt.solve(-P.c, P.b, P.h, x1, y1, z1);
    const double den_base = P.c.dot(x1) + P.b.dot(y1) + P.h.dot(z1) - kappa / tau;

    const VectorXd ll = jprod(K, lam.vec, lam.vec);
    VectorXd dsa, dza;  // scaled affine directions
    double dtau_a = 0, dkap_a = 0;
    VectorXd dx, dy, dz, ds;
    double dtau = 0, dkap = 0, alpha = 0;
    for (int pass = 0; pass < 2; ++pass) {
      double eta, sigma = 0;
      VectorXd d_s;
      double d_k;
      if (pass == 0) {
        eta = 1.0;
        d_s = -ll;
        d_k = -tau * kappa;
      } else {
        sigma = std::pow(1.0 - alpha, 3);
        eta = 1.0 - sigma;
        d_s = -ll + sigma * mu * e - jprod(K, dsa, dza);
        d_k = -tau * kappa + sigma * mu - dtau_a * dkap_a;
      }
      const VectorXd ldiv = jdiv(K, lam, d_s);
      const VectorXd fz = eta * rz - apply(K, S, Op::Wt, ldiv);
      VectorXd x0, y0, z0;
      kkt.solve(-eta * rx, eta * ry, fz, x0, y0, z0);
      const double ft = -eta * rt - d_k / tau;
      dtau = (ft - P.c.dot(x0) - P.b.dot(y0) - P.h.dot(z0)) / den_base;
      dx = x0 + dtau * x1;
      dy = y0 + dtau * y1;
      dz = z0 + dtau * z1;
      dkap = (d_k - kappa * dtau) / tau;
      const VectorXd dzs = apply(K, S, Op::W, dz);
      const VectorXd dss = ldiv - dzs;
      double amax = std::min(max_step(K, lam, dss), max_step(K, lam, dzs));
      if (dtau < 0) amax = std::min(amax, -tau / dtau);
      if (dkap < 0) amax = std::min(amax, -kappa / dkap);
      if (pass == 0) {
        alpha = std::min(1.0, amax);
        dsa = dss;
        dza = dzs;
        dtau_a = dtau;
        dkap_a = dkap;
      } else {
        alpha = std::min(1.0, 0.99 * amax);
        ds = apply(K, S, Op::Wt, dss);
      }
    }
    if (!(alpha > 1e-12) || !dx.allFinite()) {
      MOMENTA_LOG_DEBUG("sdp: step collapsed at iteration %d", it);
      return best;
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkap;
  }
}

// ---------------------------------------------------------------------------

FeasibilityReport feasible(const ConicProgram& prog, const Eigen::VectorXd& x, double tol) {
  if (x.size() != prog.num_variables()) throw DimensionMismatch("point has wrong number of variables");
  FeasibilityReport rep;
  auto note = [&](double viol, const char* kind) {
    if (viol > rep.worst) {
      rep.worst = viol;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s violation %.6g", kind, viol);
      rep.what = buf;
    }
  };
  for (int j = 0; j < prog.num_variables(); ++j) {
    if (prog.kind(j) == VarKind::Nonneg) note(-x[j], "nonnegativity");
  }
  for (const auto& e : prog.equalities()) note(std::abs(e.eval(x)), "equality");
  for (const auto& e : prog.nonnegs()) note(-e.eval(x), "inequality");
  for (const auto& cone : prog.socs()) {
    double t = cone[0].eval(x), u2 = 0.0;
    for (std::size_t k = 1; k < cone.size(); ++k) u2 += std::pow(cone[k].eval(x), 2);
    note(std::sqrt(u2) - t, "SOC");
  }
  for (const auto& lmi : prog.lmis()) {
    MatrixXd M(lmi.side, lmi.side);
    for (int i = 0; i < lmi.side; ++i) {
      for (int j = 0; j < lmi.side; ++j) M(i, j) = lmi.entries[i * lmi.side + j].eval(x);
    }
    const double mn = Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues()[0];
    note(-mn, "PSD");
  }
  rep.feasible = rep.worst <= tol;
  return rep;
}

std::string program_to_json(const ConicProgram& prog) {
  using nlohmann::json;
  auto ej = [](const Expr& e) {
    json terms = json::array();
    for (const auto& [j, a] : e.terms()) terms.push_back({j, a});
    return json{{"const", e.constant()}, {"terms", terms}};
  };
  json j;
  json kinds = json::array();
  for (int v = 0; v < prog.num_variables(); ++v) {
    kinds.push_back(prog.kind(v) == VarKind::Nonneg ? "nonneg" : "free");
  }
  j["variables"] = kinds;
  j["objective"] = ej(prog.objective());
  j["equalities"] = json::array();
  for (const auto& e : prog.equalities()) j["equalities"].push_back(ej(e));
  j["nonneg"] = json::array();
  for (const auto& e : prog.nonnegs()) j["nonneg"].push_back(ej(e));
  j["soc"] = json::array();
  for (const auto& c : prog.socs()) {
    json cj = json::array();
    for (const auto& e : c) cj.push_back(ej(e));
    j["soc"].push_back(cj);
  }
  j["lmi"] = json::array();
  for (const auto& l : prog.lmis()) {
    json cells = json::array();
    for (int c = 0; c < l.side; ++c) {
      for (int r = c; r < l.side; ++r) cells.push_back({{"i", r}, {"j", c}, {"expr", ej(l.entries[r * l.side + c])}});
    }
    j["lmi"].push_back({{"side", l.side}, {"cells", cells}});
  }
  return j.dump(1);
}

}  // namespace momenta
