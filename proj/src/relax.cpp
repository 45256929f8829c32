#include "momenta/relax.hpp"

#include <algorithm>
#include <chrono>

#include "momenta/log.hpp"

namespace momenta {

namespace {

int ceil_half(int d) { return (d + 1) / 2; }

int max_deg(const std::vector<Polynomial>& ps) {
  int d = 0;
  for (const auto& p : ps) d = std::max(d, p.degree());
  return d;
}

int matrix_degree(const std::vector<std::vector<Polynomial>>& P) {
  int d = 0;
  for (const auto& row : P) d = std::max(d, max_deg(row));
  return d;
}

void check_nvars(const Polynomial& p, int n) {
  if (p.nvars() != n) {
    throw DimensionMismatch("polynomial has " + std::to_string(p.nvars()) + " variables, problem has " +
                            std::to_string(n));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int Pop::max_degree() const {
  return std::max({objective.degree(), max_deg(inequalities), max_deg(equalities)});
}

void Pop::validate() const {
  if (nvars < 1) throw InvalidArgument("POP needs at least one variable");
  check_nvars(objective, nvars);
  for (const auto& p : inequalities) check_nvars(p, nvars);
  for (const auto& p : equalities) check_nvars(p, nvars);
}

Box Box::unbounded(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return Box{std::vector<double>(n, -inf), std::vector<double>(n, inf)};
}

void Box::validate(int n) const {
  if (!is_set()) return;
  if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n) {
    throw DimensionMismatch("box has wrong number of variables");
  }
  for (int j = 0; j < n; ++j) {
    if (std::isnan(lo[j]) || std::isnan(hi[j]) || lo[j] > hi[j]) {
      throw InvalidArgument("empty box interval for variable " + std::to_string(j));
    }
  }
}

int ConstraintSet::max_degree() const {
  int d = std::max(max_deg(equalities), max_deg(inequalities));
  for (const auto& P : psd) d = std::max(d, matrix_degree(P));
  if (box.is_set()) {
    for (std::size_t j = 0; j < box.lo.size(); ++j) {
      if (box.bounded(static_cast<int>(j))) d = std::max(d, 2);
    }
  }
  return d;
}

void ConstraintSet::validate(int n) const {
  for (const auto& p : equalities) check_nvars(p, n);
  for (const auto& p : inequalities) check_nvars(p, n);
  for (const auto& P : psd) {
    for (const auto& row : P) {
      if (row.size() != P.size()) throw DimensionMismatch("PSD constraint matrix is not square");
      for (const auto& p : row) check_nvars(p, n);
    }
  }
  box.validate(n);
}

const char* to_string(Norm n) {
  switch (n) {
    case Norm::L1: return "l1";
    case Norm::L2: return "l2";
    case Norm::Linf: return "linf";
  }
  return "";
}

Norm parse_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return Norm::L1;
  if (s == "l2" || s == "L2") return Norm::L2;
  if (s == "linf" || s == "Linf" || s == "inf") return Norm::Linf;
  throw InvalidArgument("unknown norm '" + s + "' (expected l1, l2 or linf)");
}

const char* to_string(ResidualBound b) {
  switch (b) {
    case ResidualBound::Scalar: return "scalar";
    case ResidualBound::Trace: return "trace";
    case ResidualBound::LocalizingBand: return "band";
  }
  return "";
}

int NonMinimalProblem::max_degree() const {
  int d = constraints.max_degree();
  for (const auto& g : groups) d = std::max(d, max_deg(g));
  return d;
}

void NonMinimalProblem::validate() const {
  if (nvars < 1) throw InvalidArgument("problem needs at least one variable");
  if (order < 0) throw InvalidArgument("relaxation order s must be nonnegative");
  if (groups.empty()) throw InvalidArgument("non-minimal problem needs at least one residual");
  for (const auto& g : groups) {
    if (g.empty()) throw InvalidArgument("empty residual group");
    for (const auto& p : g) check_nvars(p, nvars);
  }
  constraints.validate(nvars);
  if (trace_reg < 0) throw InvalidArgument("trace regularization must be nonnegative");
  if (bias) check_nvars(*bias, nvars);
}

// ---------------------------------------------------------------------------

MomentBuilder::MomentBuilder(int nvars, int order) : idx_(moment_index(nvars, order)) {
  const int N = idx_.num_momvars();
  prog_.add_variables(N);
  prog_.add_equality(Expr::var(idx_.momvar(Monomial::constant(nvars))) - 1.0);
  const int B = idx_.basis().size();
  std::vector<Expr> M(static_cast<std::size_t>(B) * B);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < B; ++j) M[i * B + j] = Expr::var(idx_.pair(i, j));
  }
  prog_.add_lmi(M, B);
}

Expr MomentBuilder::to_expr(const LinearForm& f) const {
  Expr e;
  for (const auto& [id, c] : f.terms()) e.add(id, c);
  return e;
}

Expr MomentBuilder::riesz(const Polynomial& p) const { return to_expr(idx_.riesz(p)); }

std::vector<Expr> MomentBuilder::localizing(const Polynomial& p, int s) const {
  const LocalizingMap L = localizing_map(p, idx_, s);
  std::vector<Expr> m;
  m.reserve(L.entries.size());
  for (const auto& f : L.entries) m.push_back(to_expr(f));
  return m;
}

int MomentBuilder::max_order(int degree) const { return idx_.order() - ceil_half(degree); }

void MomentBuilder::add_inequality(const Polynomial& p) {
  const int t = max_order(p.degree());
  if (t < 0) throw DegreeError("inequality degree exceeds relaxation order");
  if (t == 0) {
    prog_.add_nonneg(riesz(p));
  } else {
    const LocalizingMap L = localizing_map(p, idx_, t);
    std::vector<Expr> m;
    for (const auto& f : L.entries) m.push_back(to_expr(f));
    prog_.add_lmi(m, L.rows);
  }
}

void MomentBuilder::add_equality(const Polynomial& q) {
  const int t = max_order(q.degree());
  if (t < 0) throw DegreeError("equality degree exceeds relaxation order");
  // Distinct entries of the order-t localizing map: L(q x^g), deg g <= 2t.
  const MonomialBasis shifts(q.nvars(), 2 * t);
  for (const auto& g : shifts.monomials()) {
    Polynomial qg(q.nvars());
    for (const auto& [m, c] : q.terms()) qg.add_term(m * g, c);
    prog_.add_equality(to_expr(idx_.riesz(qg)));
  }
}

void MomentBuilder::add_psd(const std::vector<std::vector<Polynomial>>& P) {
  const int t = max_order(matrix_degree(P));
  if (t < 0) throw DegreeError("PSD constraint degree exceeds relaxation order");
  const LocalizingMap L = localizing_map(P, idx_, t);
  std::vector<Expr> m;
  for (const auto& f : L.entries) m.push_back(to_expr(f));
  prog_.add_lmi(m, L.rows);
}

void MomentBuilder::add_box(const Box& box) {
  if (!box.is_set()) return;
  const int n = idx_.nvars();
  for (int j = 0; j < n; ++j) {
    const Polynomial x = Polynomial::variable(n, j);
    if (std::isfinite(box.lo[j])) add_inequality(x - box.lo[j]);
    if (std::isfinite(box.hi[j])) add_inequality(Polynomial::constant(n, box.hi[j]) - x);
    if (box.bounded(j) && idx_.order() >= 1) {
      add_inequality((x - box.lo[j]) * (Polynomial::constant(n, box.hi[j]) - x));
    }
  }
}

void MomentBuilder::add_constraints(const ConstraintSet& K) {
  for (const auto& q : K.equalities) add_equality(q);
  for (const auto& p : K.inequalities) add_inequality(p);
  for (const auto& P : K.psd) add_psd(P);
  add_box(K.box);
}

Expr MomentBuilder::bound_residual(const Polynomial& p, int s, ResidualBound mode) {
  const int t = std::min(s, max_order(p.degree()));
  if (t < 0) throw DegreeError("residual degree exceeds relaxation order");
  if (mode == ResidualBound::Scalar || t == 0) {
    const Expr L = riesz(p);
    const Expr e = Expr::var(prog_.add_variable());
    prog_.add_nonneg(e - L);
    prog_.add_nonneg(e + L);
    return e;
  }
  const std::vector<Expr> L = localizing(p, t);
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(L.size()))));
  if (mode == ResidualBound::Trace) {
    Expr tr;
    for (int a = 0; a < k; ++a) tr += L[a * k + a];
    const Expr e = Expr::var(prog_.add_variable());
    prog_.add_nonneg(e - tr);
    prog_.add_nonneg(e + tr);
    return e;
  }
  const int first = prog_.add_variables(k * (k + 1) / 2);
  std::vector<Expr> lo(L.size()), hi(L.size());
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const Expr E = Expr::var(first + ConicProgram::svec_index(k, a, b));
      lo[a * k + b] = E + L[a * k + b];
      hi[a * k + b] = E - L[a * k + b];
    }
  }
  prog_.add_lmi(lo, k);
  prog_.add_lmi(hi, k);
  return Expr::var(first);
}

Expr MomentBuilder::moment_trace() const {
  Expr e;
  for (int i = 0; i < idx_.basis().size(); ++i) e.add(idx_.pair(i, i), 1.0);
  return e;
}

// ---------------------------------------------------------------------------

ConicProgram shor_relax(const Pop& pop) {
  pop.validate();
  if (pop.max_degree() > 2) {
    throw DegreeError("Shor's relaxation needs degree <= 2, got " + std::to_string(pop.max_degree()));
  }
  const int n = pop.nvars, k = n + 1;
  const MonomialBasis z(n, 1);
  ConicProgram prog;
  prog.add_psd_variable(k);
  auto trace_gy = [&](const Polynomial& p) {
    const GramMatrix g = gram_matrix(p, z);
    Expr e;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double c = i == j ? g.G(i, i) : 2.0 * g.G(i, j);
        if (c != 0.0) e.add(ConicProgram::svec_index(k, i, j), c);
      }
    }
    return e;
  };
  prog.add_equality(Expr::var(0) - 1.0);
  prog.set_objective(trace_gy(pop.objective));
  for (const auto& p : pop.inequalities) prog.add_nonneg(trace_gy(p));
  for (const auto& q : pop.equalities) prog.add_equality(trace_gy(q));
  return prog;
}

Eigen::MatrixXd shor_matrix(const Eigen::VectorXd& x, int nvars) {
  const int k = nvars + 1;
  Eigen::MatrixXd Y(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) Y(i, j) = x[ConicProgram::svec_index(k, i, j)];
  }
  return Y;
}

MomentProgram lasserre_relax(const Pop& pop, int s) {
  pop.validate();
  if (s < 0) throw InvalidArgument("relaxation order s must be nonnegative");
  MomentBuilder B(pop.nvars, relaxation_order(pop.max_degree(), s));
  for (const auto& q : pop.equalities) B.add_equality(q);
  for (const auto& p : pop.inequalities) B.add_inequality(p);
  const Expr obj = B.riesz(pop.objective);
  B.prog().set_objective(obj);
  return MomentProgram{B.prog(), B.index(), obj, {}};
}

MomentProgram nonminimal_program(const NonMinimalProblem& prob) {
  prob.validate();
  const int s = prob.order;
  MomentBuilder B(prob.nvars, relaxation_order(prob.max_degree(), s));
  B.add_constraints(prob.constraints);
  ConicProgram& prog = B.prog();

  auto bound = [&](const Polynomial& p) { return B.bound_residual(p, s, prob.bound); };

  Expr objective;
  std::vector<Expr> eps;
  switch (prob.norm) {
    case Norm::L1:
      for (const auto& g : prob.groups) {
        for (const auto& p : g) {
          eps.push_back(bound(p));
          objective += eps.back();
        }
      }
      break;
    case Norm::Linf: {
      const Expr t = Expr::var(prog.add_variable());
      for (const auto& g : prob.groups) {
        for (const auto& p : g) {
          eps.push_back(bound(p));
          prog.add_nonneg(t - eps.back());
        }
      }
      objective = t;
      break;
    }
    case Norm::L2:
      for (const auto& g : prob.groups) {
        const Expr e = Expr::var(prog.add_variable());
        std::vector<Expr> cone{e};
        for (const auto& p : g) {
          if (prob.bound == ResidualBound::Trace && s > 0) {
            const int t = std::min(s, B.max_order(p.degree()));
            const std::vector<Expr> L = B.localizing(p, t);
            const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(L.size()))));
            Expr tr;
            for (int a = 0; a < k; ++a) tr += L[a * k + a];
            cone.push_back(tr);
          } else {
            cone.push_back(B.riesz(p));
          }
        }
        prog.add_soc(cone);
        eps.push_back(e);
        objective += e;
      }
      break;
  }
  Expr full = objective;
  if (prob.trace_reg > 0) full += prob.trace_reg * B.moment_trace();
  if (prob.bias) full += B.riesz(*prob.bias);
  prog.set_objective(full);
  return MomentProgram{prog, B.index(), objective, eps};
}

// ---------------------------------------------------------------------------

Extraction extract_point(const Eigen::MatrixXd& Y1) {
  const int k = static_cast<int>(Y1.rows());
  if (k < 2 || Y1.cols() != k) throw DimensionMismatch("extraction needs a square block of side >= 2");
  if (!Y1.allFinite()) throw ExtractionError("moment matrix has non-finite entries");
  const Eigen::MatrixXd Ys = 0.5 * (Y1 + Y1.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ys);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double s1 = ev[k - 1];
  if (!(s1 > 0)) throw ExtractionError("moment block has no positive eigenvalue");
  const double s2 = std::max(0.0, ev[k - 2]);
  Eigen::VectorXd u = es.eigenvectors().col(k - 1);
  int top = 1;
  while (top < k && ev[k - 1 - top] >= s1 * (1.0 - 1e-4)) ++top;
  if (top > 1) {
    // Degenerate top eigenvalue: use the projection of e_0 onto the eigenspace.
    const Eigen::MatrixXd U = es.eigenvectors().rightCols(top);
    u = U * U.row(0).transpose();
    const double nu = u.norm();
    if (nu < 1e-12) throw ExtractionError("top eigenspace is orthogonal to the homogeneous coordinate");
    u /= nu;
  }
  Eigen::VectorXd v = std::sqrt(s1) * u;
  if (v[0] < 0) v = -v;
  if (std::abs(v[0]) < 1e-9) throw ExtractionError("extracted homogeneous coordinate vanishes (solution at infinity)");
  Extraction out;
  out.x = v.tail(k - 1) / v[0];
  out.rank_gap = std::clamp(s2 / s1, 0.0, 1.0);
  return out;
}

Extraction extract_point(const Eigen::VectorXd& w, const MomentIndex& idx) {
  return extract_point(idx.moment_matrix(w, 1));
}

std::vector<Eigen::VectorXd> extract_atoms(const Eigen::VectorXd& w, const MomentIndex& idx, double rank_tol) {
  const int n = idx.nvars();
  auto rank_of = [&](const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev[ev.size() - 1];
    int k = 0;
    while (k < ev.size() && ev[ev.size() - 1 - k] > rank_tol * top) ++k;
    return k;
  };
  // Highest truncation t with rank M_t == rank M_{t-1} (flat extension).
  int t = idx.order();
  for (; t >= 1; --t) {
    if (rank_of(idx.moment_matrix(w, t)) == rank_of(idx.moment_matrix(w, t - 1))) break;
  }
  if (t < 1) return {};
  const Eigen::MatrixXd M = idx.moment_matrix(w, t);
  const int N = static_cast<int>(M.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev[N - 1];
  if (!(top > 0)) return {};
  int k = 0;
  while (k < N && ev[N - 1 - k] > rank_tol * top) ++k;
  const Eigen::MatrixXd V = es.eigenvectors().rightCols(k) * ev.tail(k).cwiseSqrt().asDiagonal();

  // Greedy row selection in graded order gives the lowest-degree basis.
  std::vector<int> rows;
  Eigen::MatrixXd Q(k, 0);
  for (int i = 0; i < N && static_cast<int>(rows.size()) < k; ++i) {
    Eigen::VectorXd r = V.row(i).transpose();
    const double nr = r.norm();
    if (Q.cols() > 0) r -= Q * (Q.transpose() * r);
    if (r.norm() > 1e-6 * std::max(1.0, nr)) {
      rows.push_back(i);
      Q.conservativeResize(k, Q.cols() + 1);
      Q.col(Q.cols() - 1) = r.normalized();
    }
  }
  if (static_cast<int>(rows.size()) < k) return {};
  Eigen::MatrixXd VB(k, k);
  for (int j = 0; j < k; ++j) VB.row(j) = V.row(rows[j]);
  const Eigen::MatrixXd U = V * VB.inverse();  // U rows at the basis are the identity

  std::vector<Eigen::MatrixXd> Ni(n, Eigen::MatrixXd(k, k));
  const MonomialBasis& basis = idx.basis();
  for (int i = 0; i < n; ++i) {
    const Monomial xi = Monomial::variable(n, i);
    for (int j = 0; j < k; ++j) {
      const int row = basis.index_of(basis[rows[j]] * xi);
      if (row < 0 || row >= N) return {};
      Ni[i].row(j) = U.row(row);
    }
  }
  // Fixed generic combination keeps the result deterministic.
  Eigen::MatrixXd Nc = Eigen::MatrixXd::Zero(k, k);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = 1.0 + 0.6180339887498949 * i - std::floor(0.6180339887498949 * i);
    Nc += c * Ni[i];
    total += c;
  }
  Nc /= total;
  Eigen::RealSchur<Eigen::MatrixXd> schur(Nc);
  const Eigen::MatrixXd& Qs = schur.matrixU();
  std::vector<Eigen::VectorXd> atoms;
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = Qs.col(j).dot(Ni[i] * Qs.col(j));
    if (x.allFinite()) atoms.push_back(x);
  }
  return atoms;
}

Eigen::VectorXd polish(const std::vector<Polynomial>& residuals, const ConstraintSet& K, Eigen::VectorXd x,
                       int steps) {
  const int n = static_cast<int>(x.size());
  std::vector<Polynomial> fs = residuals;
  for (const auto& q : K.equalities) fs.push_back(q);
  const int m = static_cast<int>(fs.size());
  if (m == 0) return x;
  std::vector<std::vector<Polynomial>> grads(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) grads[i].push_back(fs[i].derivative(j));
  }
  auto clamp = [&](Eigen::VectorXd& v) {
    if (!K.box.is_set()) return;
    for (int j = 0; j < n; ++j) v[j] = std::clamp(v[j], K.box.lo[j], K.box.hi[j]);
  };
  auto eval = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.resize(m);
    if (J) J->resize(m, n);
    for (int i = 0; i < m; ++i) {
      r[i] = fs[i].eval(v);
      if (J) {
        for (int j = 0; j < n; ++j) (*J)(i, j) = grads[i][j].eval(v);
      }
    }
  };
  double lambda = 1e-6;
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  eval(x, r, &J);
  double cost = r.squaredNorm();
  for (int it = 0; it < steps; ++it) {
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 10 && !improved; ++tries) {
      Eigen::MatrixXd Hm = JtJ;
      Hm.diagonal() += lambda * (Eigen::VectorXd::Ones(n) + JtJ.diagonal());
      Eigen::VectorXd xn = x - Hm.ldlt().solve(g);
      clamp(xn);
      Eigen::VectorXd rn;
      eval(xn, rn, nullptr);
      if (rn.allFinite() && rn.squaredNorm() < cost) {
        x = xn;
        r = rn;
        cost = rn.squaredNorm();
        lambda = std::max(1e-12, lambda * 0.3);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
    eval(x, r, &J);
  }
  return x;
}

// ---------------------------------------------------------------------------

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RelaxedSolution solve_pop(const Pop& pop, int s, const SolverOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const MomentProgram mp = lasserre_relax(pop, s);
  const ConicSolution sol = solve(mp.prog, opts);
  RelaxedSolution out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::NumericalLimit) {
    out.w = mp.moments(sol.x);
    out.moment_matrix = mp.idx.moment_matrix(out.w);
    out.objective = sol.primal_objective;
    if (sol.status == SolveStatus::Optimal) out.lower_bound = sol.dual_objective;
    const Extraction ex = extract_point(out.w, mp.idx);
    out.x = ex.x;
    out.extracted = ex.x;
    out.rank_gap = ex.rank_gap;
    out.relaxation_loose = ex.rank_gap > 1e-3;
    if (out.relaxation_loose) {
      // Several global minimizers: pick the best feasible atom if the moments are flat.
      auto violation = [&](const Eigen::VectorXd& x) {
        double v = 0.0;
        for (const auto& q : pop.equalities) v = std::max(v, std::abs(q.eval(x)));
        for (const auto& p : pop.inequalities) v = std::max(v, -p.eval(x));
        return v;
      };
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : extract_atoms(out.w, mp.idx)) {
        const double f = pop.objective.eval(a);
        if (violation(a) <= 1e-6 && f < best - 1e-12) {
          best = f;
          out.x = a;
        }
      }
    }
    for (const auto& q : pop.equalities) out.residuals.push_back(std::abs(q.eval(out.x)));
    for (const auto& p : pop.inequalities) out.residuals.push_back(std::max(0.0, -p.eval(out.x)));
  }
  out.seconds = seconds_since(t0);
  return out;
}

RelaxedSolution solve_nonminimal(const NonMinimalProblem& prob, const SolverOptions& opts, const PointHook& hook) {
  const auto t0 = std::chrono::steady_clock::now();
  const MomentProgram mp = nonminimal_program(prob);
  const ConicSolution sol = solve(mp.prog, opts);
  RelaxedSolution out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::NumericalLimit) {
    out.seconds = seconds_since(t0);
    return out;
  }
  out.w = mp.moments(sol.x);
  out.moment_matrix = mp.idx.moment_matrix(out.w);
  out.objective = mp.reported_objective.eval(sol.x);
  if (sol.status == SolveStatus::Optimal && prob.trace_reg == 0.0 && !prob.bias) out.lower_bound = out.objective;
  const Extraction ex = extract_point(out.w, mp.idx);
  out.x = ex.x;
  out.rank_gap = ex.rank_gap;
  if (hook) hook(out.x);
  out.extracted = out.x;
  std::vector<Polynomial> flat;
  for (const auto& g : prob.groups) flat.insert(flat.end(), g.begin(), g.end());
  if (ex.rank_gap > 1e-3) {
    out.relaxation_loose = true;
    MOMENTA_LOG_INFO("relaxation loose (rank gap %.3g); polishing extracted point", ex.rank_gap);
    out.x = polish(flat, prob.constraints, out.x);
    if (hook) hook(out.x);
  }
  for (const auto& p : flat) out.residuals.push_back(std::abs(p.eval(out.x)));
  out.seconds = seconds_since(t0);
  return out;
}

}  // namespace momenta
