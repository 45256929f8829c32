#include "momenta/consensus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <set>

#include "momenta/log.hpp"

namespace momenta {

int ConsensusProblem::max_degree() const {
  int d = constraints.max_degree();
  for (const auto& g : groups) {
    for (const auto& p : g) d = std::max(d, p.degree());
  }
  return std::max(d, 1);
}

void ConsensusProblem::validate() const {
  if (groups.empty()) throw InvalidArgument("consensus needs at least one residual group");
  if (!(eps > 0)) throw InvalidArgument("consensus threshold eps must be positive");
  if (order < 0) throw InvalidArgument("relaxation order must be nonnegative");
  for (const auto& g : groups) {
    if (g.empty()) throw InvalidArgument("empty residual group");
    for (const auto& p : g) {
      if (p.nvars() != nvars) throw DimensionMismatch("residual has wrong number of variables");
    }
  }
  constraints.validate(nvars);
  if (bias && bias->nvars() != nvars) throw DimensionMismatch("bias has wrong number of variables");
  if (!big_m.empty() && static_cast<int>(big_m.size()) != num_groups()) {
    throw DimensionMismatch("one big-M value per group is required");
  }
  for (double m : resolved_big_m()) {
    if (!(m > eps)) throw InvalidArgument("big-M must exceed eps");
  }
}

std::vector<double> ConsensusProblem::resolved_big_m() const {
  if (!big_m.empty()) return big_m;
  std::vector<double> out;
  for (const auto& g : groups) {
    double m = 0.0;
    for (const auto& p : g) m = std::max(m, big_m_from_box(p, constraints.box));
    // A group whose residual can never exceed eps is always an inlier; any
    // M > eps keeps the constraint inactive for z = 1.
    out.push_back(std::max(m, 2.0 * eps));
  }
  return out;
}

double big_m_from_box(const Polynomial& p, const Box& box) {
  double m = 0.0;
  for (const auto& [mono, c] : p.terms()) {
    double t = std::abs(c);
    for (int j = 0; j < mono.nvars(); ++j) {
      if (mono[j] == 0) continue;
      if (!box.is_set() || !box.bounded(j)) {
        throw InvalidArgument("big-M needs a finite box on every variable of the residual");
      }
      t *= std::pow(std::max(std::abs(box.lo[j]), std::abs(box.hi[j])), mono[j]);
    }
    m += t;
  }
  return m;
}

const char* to_string(ConsensusStatus s) {
  switch (s) {
    case ConsensusStatus::Certified: return "certified";
    case ConsensusStatus::Limit: return "limit";
    case ConsensusStatus::Infeasible: return "infeasible";
  }
  return "?";
}

namespace {

struct NodeProgram {
  MomentProgram mp;
  std::vector<int> zvar;  // program index of z_i, -1 when not free
};

// Node relaxation: forced inliers are bounded by eps, free groups get a
// relaxed z in [0, 1], forced outliers are dropped.
NodeProgram build_node(const ConsensusProblem& prob, const std::vector<std::int8_t>& z,
                       const std::vector<double>& M, bool feasibility_only) {
  MomentBuilder B(prob.nvars, relaxation_order(prob.max_degree(), prob.order));
  B.add_constraints(prob.constraints);
  ConicProgram& prog = B.prog();
  NodeProgram out;
  out.zvar.assign(prob.groups.size(), -1);
  Expr objective;
  for (int i = 0; i < prob.num_groups(); ++i) {
    if (z[i] == kOutlier) continue;
    Expr rhs(prob.eps);
    if (z[i] == kFree) {
      const int v = prog.add_variable(VarKind::Nonneg);
      prog.add_nonneg(1.0 - Expr::var(v));
      out.zvar[i] = v;
      rhs += M[i] * Expr::var(v);
      objective += Expr::var(v);
    }
    for (const auto& p : prob.groups[i]) {
      if (prob.bound == ResidualBound::Scalar) {
        const Expr L = B.riesz(p);
        prog.add_nonneg(rhs - L);
        prog.add_nonneg(rhs + L);
      } else {
        prog.add_nonneg(rhs - B.bound_residual(p, prob.order, prob.bound));
      }
    }
  }
  Expr full = feasibility_only ? Expr() : objective;
  if (prob.trace_reg > 0) full += prob.trace_reg * B.moment_trace();
  if (prob.bias) full += B.riesz(*prob.bias);
  prog.set_objective(full);
  out.mp = MomentProgram{prog, B.index(), objective, {}};
  return out;
}

Eigen::VectorXd extract(const ConsensusProblem& prob, const Eigen::VectorXd& w, const MomentIndex& idx,
                        double* rank_gap) {
  Extraction ex;
  try {
    ex = extract_point(w, idx);
  } catch (const ExtractionError&) {
    ex.x = Eigen::VectorXd::Zero(prob.nvars);
    ex.rank_gap = 1.0;
  }
  if (rank_gap) *rank_gap = ex.rank_gap;
  if (prob.hook) prob.hook(ex.x);
  return ex.x;
}

int count(const std::vector<bool>& v) { return static_cast<int>(std::count(v.begin(), v.end(), true)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

NodeBound relaxed_node_bound(const BnbNode& node, const ConsensusProblem& prob) {
  const std::vector<double> M = prob.resolved_big_m();
  const NodeProgram np = build_node(prob, node.z, M, false);
  const ConicSolution sol = solve(np.mp.prog, prob.solver);
  NodeBound nb;
  nb.status = sol.status;
  if (sol.status == SolveStatus::Infeasible) return nb;
  if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::NumericalLimit) return nb;
  // An inaccurate solve still guides branching but cannot raise the bound.
  const bool reliable = sol.status == SolveStatus::Optimal || sol.primal_residual <= 1e-6;
  if (!reliable) MOMENTA_LOG_DEBUG("consensus: inaccurate node solve (pres %.2e)", sol.primal_residual);
  nb.feasible = true;
  const int m = prob.num_groups();
  nb.z.resize(m);
  int forced_out = 0;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    if (node.z[i] == kOutlier) {
      nb.z[i] = 1.0;
      ++forced_out;
    } else if (node.z[i] == kInlier) {
      nb.z[i] = 0.0;
    } else {
      nb.z[i] = std::clamp(sol.x[np.zvar[i]], 0.0, 1.0);
      sum += nb.z[i];
    }
  }
  nb.relaxed_sum = forced_out + sum;
  const int relaxed = forced_out + static_cast<int>(std::ceil(std::max(0.0, sum - 1e-4)));
  nb.bound = reliable ? std::max(node.bound, relaxed) : node.bound;
  nb.x = extract(prob, np.mp.moments(sol.x), np.mp.idx, &nb.rank_gap);
  return nb;
}

std::vector<bool> classify(const ConsensusProblem& prob, const Eigen::VectorXd& x, double slack) {
  std::vector<bool> in(prob.groups.size(), false);
  for (int i = 0; i < prob.num_groups(); ++i) {
    bool ok = true;
    for (const auto& p : prob.groups[i]) ok = ok && std::abs(p.eval(x)) <= prob.eps + slack;
    in[i] = ok;
  }
  return in;
}

bool satisfies_constraints(const ConstraintSet& K, const Eigen::VectorXd& x, double tol) {
  if (!x.allFinite()) return false;
  for (const auto& q : K.equalities) {
    if (std::abs(q.eval(x)) > tol) return false;
  }
  for (const auto& p : K.inequalities) {
    if (p.eval(x) < -tol) return false;
  }
  for (const auto& P : K.psd) {
    const int k = static_cast<int>(P.size());
    Eigen::MatrixXd A(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) A(i, j) = P[i][j].eval(x);
    }
    const double mn = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues()[0];
    if (mn < -tol * (1.0 + A.norm())) return false;
  }
  if (K.box.is_set()) {
    for (int j = 0; j < x.size(); ++j) {
      if (x[j] < K.box.lo[j] - tol || x[j] > K.box.hi[j] + tol) return false;
    }
  }
  return true;
}

bool assignment_feasible(const ConsensusProblem& prob, const std::vector<bool>& inliers, Eigen::VectorXd* x) {
  if (static_cast<int>(inliers.size()) != prob.num_groups()) throw DimensionMismatch("mask size differs from groups");
  std::vector<std::int8_t> z(inliers.size());
  for (std::size_t i = 0; i < inliers.size(); ++i) z[i] = inliers[i] ? kInlier : kOutlier;
  const NodeProgram np = build_node(prob, z, prob.resolved_big_m(), true);
  const ConicSolution sol = solve(np.mp.prog, prob.solver);
  const bool ok = sol.status == SolveStatus::Optimal ||
                  (sol.status == SolveStatus::NumericalLimit && sol.primal_residual <= 1e-6);
  if (ok && x) *x = extract(prob, np.mp.moments(sol.x), np.mp.idx, nullptr);
  return ok;
}

namespace {

// Clamp to the box and polish on the residuals of likely inliers.
Eigen::VectorXd refine(const ConsensusProblem& prob, const Eigen::VectorXd& x0, const Eigen::VectorXd& z) {
  std::vector<Polynomial> res;
  for (int i = 0; i < prob.num_groups(); ++i) {
    if (z[i] < 0.5) res.insert(res.end(), prob.groups[i].begin(), prob.groups[i].end());
  }
  Eigen::VectorXd x = x0;
  if (prob.constraints.box.is_set()) {
    for (int j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], prob.constraints.box.lo[j], prob.constraints.box.hi[j]);
  }
  if (res.empty()) return x;
  x = polish(res, prob.constraints, x);
  if (prob.hook) prob.hook(x);
  return x;
}

// Point minimizing the largest residual over the given inliers.
Eigen::VectorXd minimax_point(const ConsensusProblem& prob, const std::vector<bool>& inliers) {
  NonMinimalProblem nm;
  nm.nvars = prob.nvars;
  nm.constraints = prob.constraints;
  nm.norm = Norm::Linf;
  nm.order = prob.order;
  nm.bound = prob.bound;
  nm.trace_reg = prob.trace_reg;
  nm.bias = prob.bias;
  for (int i = 0; i < prob.num_groups(); ++i) {
    if (inliers[i]) nm.groups.push_back(prob.groups[i]);
  }
  if (nm.groups.empty()) return {};
  try {
    return solve_nonminimal(nm, prob.solver, prob.hook).x;
  } catch (const ExtractionError&) {
    return {};
  }
}

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    // priority_queue pops the largest; invert for (bound, -depth, id) ascending.
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

}  // namespace

ConsensusResult maximize_consensus(const ConsensusProblem& prob) {
  prob.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int m = prob.num_groups();
  ConsensusResult res;
  res.inliers.assign(m, false);

  int best_out = m + 1;  // no incumbent yet
  auto offer = [&](const Eigen::VectorXd& x) {
    if (!satisfies_constraints(prob.constraints, x)) return;
    const std::vector<bool> in = classify(prob, x);
    const int out = m - count(in);
    // Ties keep the lexicographically smallest mask (inliers first).
    if (out < best_out || (out == best_out && in < res.inliers)) {
      best_out = out;
      res.inliers = in;
      res.x = x;
    }
  };

  std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;
  long next_id = 0;
  BnbNode root;
  root.z.assign(m, kFree);
  root.id = next_id++;
  open.push(root);
  std::set<std::vector<bool>> tried;  // inlier sets already re-solved
  int global_lb = 0;
  bool root_done = false;
  // Lowest outlier count of a relaxation-feasible leaf that produced no
  // matching incumbent; certification cannot pass it.
  int unresolved = m + 1;

  auto record = [&](long it) {
    int lb = std::min(best_out, unresolved);
    if (!open.empty()) lb = std::min(lb, open.top().bound);
    global_lb = std::max(global_lb, std::min(lb, best_out));
    TraceStep st;
    st.iteration = it;
    st.pessimistic = best_out <= m ? m - best_out : 0;
    st.optimistic = m - global_lb;
    st.open_nodes = static_cast<int>(open.size());
    st.seconds = seconds_since(t0);
    res.trace.push_back(st);
  };

  bool limit = false;
  while (!open.empty()) {
    if (res.nodes >= prob.node_limit || seconds_since(t0) > prob.time_limit) {
      limit = true;
      break;
    }
    BnbNode node = open.top();
    open.pop();
    if (node.bound >= best_out) {
      record(res.nodes);
      continue;
    }
    ++res.nodes;
    const NodeBound nb = relaxed_node_bound(node, prob);
    if (!root_done) {
      root_done = true;
      if (!nb.feasible) {
        res.status = ConsensusStatus::Infeasible;
        res.seconds = seconds_since(t0);
        return res;
      }
    }
    if (!nb.feasible) {
      record(res.nodes);
      continue;
    }
    // Incumbents: the extracted point, its polished version, and the
    // relaxation re-solved with the resulting inlier set forced.
    offer(nb.x);
    const Eigen::VectorXd xr = refine(prob, nb.x, nb.z);
    offer(xr);
    for (const Eigen::VectorXd* xc : {&nb.x, &xr}) {
      if (!satisfies_constraints(prob.constraints, *xc)) continue;
      const std::vector<bool> in = classify(prob, *xc);
      if (!tried.insert(in).second) continue;
      Eigen::VectorXd xf;
      if (assignment_feasible(prob, in, &xf)) {
        offer(xf);
        Eigen::VectorXd zf(m);
        for (int i = 0; i < m; ++i) zf[i] = in[i] ? 0.0 : 1.0;
        offer(refine(prob, xf, zf));
        const Eigen::VectorXd xm = minimax_point(prob, in);
        if (xm.size() == prob.nvars) offer(xm);
      }
    }
    if (nb.bound >= best_out) {
      record(res.nodes);
      continue;
    }
    // Most fractional free variable; ties go to the lowest index.
    int br = -1;
    double best_frac = -1.0;
    for (int i = 0; i < m; ++i) {
      if (node.z[i] != kFree) continue;
      const double f = 0.5 - std::abs(nb.z[i] - 0.5);
      if (f > best_frac + 1e-12) {
        best_frac = f;
        br = i;
      }
    }
    if (br < 0 && nb.bound < best_out) {
      std::vector<bool> in(m);
      for (int i = 0; i < m; ++i) in[i] = node.z[i] == kInlier;
      const Eigen::VectorXd xm = minimax_point(prob, in);
      if (xm.size() == prob.nvars) offer(xm);
    }
    if (br < 0 && nb.bound < best_out) {
      MOMENTA_LOG_DEBUG("consensus: unresolved leaf, %d outliers, rank gap %.2e, status %s", nb.bound, nb.rank_gap,
                        to_string(nb.status));
      unresolved = std::min(unresolved, nb.bound);
    }
    if (br < 0) {
      record(res.nodes);
      continue;
    }
    for (std::int8_t v : {kInlier, kOutlier}) {
      BnbNode child;
      child.z = node.z;
      child.z[br] = v;
      child.bound = nb.bound;
      child.depth = node.depth + 1;
      child.id = next_id++;
      open.push(child);
    }
    record(res.nodes);
  }

  if (best_out > m) {
    // No point satisfying the constraints was found; report all outliers.
    best_out = m;
  }
  res.inlier_count = m - best_out;
  int lb = std::min(best_out, unresolved);
  if (limit && !open.empty()) lb = std::min(lb, open.top().bound);
  global_lb = std::max(global_lb, lb);
  res.certified = global_lb >= best_out;
  res.status = res.certified ? ConsensusStatus::Certified : ConsensusStatus::Limit;
  res.gap = res.certified ? 0 : best_out - global_lb;
  record(res.nodes);
  res.seconds = seconds_since(t0);
  return res;
}

}  // namespace momenta
