// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Optional arguments select criteria by number.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "momenta/consensus.hpp"
#include "momenta/vision.hpp"

using namespace momenta;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Eigen::Matrix3d calib_K() {
  Eigen::Matrix3d K;
  K << 1.25, 0, 0.05, 0, 1.3, -0.03, 0, 0, 1;
  return K;
}

// ------------------------------------------------------------------ 1

Outcome shor_tightness() {
  double rot = 0, tr = 0, gap = 0, secs = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const RigidData d = synth_rigid(10, 0.0, 0.0, seed);
    const auto t0 = std::chrono::steady_clock::now();
    const RigidFit f = solve_rigid(d.corrs);
    secs = std::max(secs, seconds_since(t0));
    rot = std::max(rot, rotation_error_deg(f.estimate.R(), d.truth.R()));
    tr = std::max(tr, (f.estimate.t - d.truth.t).norm());
    gap = std::max(gap, f.solution.rank_gap);
  }
  return {rot <= 1e-4 && tr <= 1e-5 && gap <= 1e-6 && secs <= 1.0,
          fmt("50 seeds: worst rotation %.2e deg (<= 1e-4), translation %.2e (<= 1e-5), rank gap %.2e (<= 1e-6), "
              "time %.3f s (<= 1)",
              rot, tr, gap, secs)};
}

// ------------------------------------------------------------------ 2

Outcome minimal_sweep() {
  std::vector<double> med;
  int nonoptimal = 0;
  for (int k = 0; k <= 10; ++k) {
    const double noise = 0.005 * k;
    std::vector<double> errs;
    for (int t = 0; t < 100; ++t) {
      const RigidData d = synth_rigid(3, noise, 0.0, 1000 + t);
      const RigidFit f = solve_rigid(d.corrs);
      nonoptimal += f.solution.status != SolveStatus::Optimal;
      errs.push_back(rotation_error_deg(f.estimate.R(), d.truth.R()));
    }
    med.push_back(median(errs));
  }
  bool monotone = true;
  for (std::size_t k = 1; k < med.size(); ++k) monotone = monotone && med[k] >= med[k - 1];
  std::string curve;
  for (double m : med) curve += fmt(" %.3g", m);
  return {nonoptimal == 0 && monotone && med[0] <= 1e-4,
          fmt("1100 solves, %d non-optimal; median rotation error (deg) over sigma 0:0.005:0.05:%s; monotone %s",
              nonoptimal, curve.c_str(), monotone ? "yes" : "no")};
}

// ------------------------------------------------------------------ 3

// Largest inlier set accepted by the feasibility relaxation, searching masks
// in decreasing cardinality.
int brute_force(const ConsensusProblem& p) {
  const int m = p.num_groups();
  std::vector<unsigned> masks(1u << m);
  for (unsigned k = 0; k < masks.size(); ++k) masks[k] = k;
  std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) { return std::popcount(a) > std::popcount(b); });
  for (unsigned k : masks) {
    std::vector<bool> in(m);
    for (int i = 0; i < m; ++i) in[i] = (k >> i) & 1u;
    if (k == 0 || assignment_feasible(p, in)) return std::popcount(k);
  }
  return 0;
}

Outcome consensus_rigid() {
  int exact = 0, max_nodes = 0;
  std::string misses;
  for (int seed = 0; seed < 20; ++seed) {
    const RigidData d = synth_rigid(30, 0.01, 20.0 / 30.0, seed);
    const ConsensusResult r = maximize_consensus(rigid_consensus(d.corrs, 3.0 * d.sigma));
    max_nodes = std::max<int>(max_nodes, r.nodes);
    const bool ok = r.certified && r.inliers == d.inlier && r.nodes <= 5000;
    exact += ok;
    if (!ok) misses += fmt(" seed %d (%s, %d inliers, %ld nodes)", seed, to_string(r.status), r.inlier_count, r.nodes);
  }
  int agree = 0, total = 0;
  std::string disagree;
  const std::vector<std::pair<int, double>> small = {{6, 1.0 / 3}, {8, 0.25}, {8, 0.5}, {10, 0.3}, {10, 0.5},
                                                     {12, 0.25}, {12, 0.5}, {12, 0.75}};
  for (std::size_t k = 0; k < small.size(); ++k) {
    const auto [m, frac] = small[k];
    const RigidData d = synth_rigid(m, 0.01, frac, 500 + k);
    const ConsensusProblem p = rigid_consensus(d.corrs, 3.0 * d.sigma);
    const ConsensusResult r = maximize_consensus(p);
    const int bf = brute_force(p);
    ++total;
    if (r.certified && r.inlier_count == bf) {
      ++agree;
    } else {
      disagree += fmt(" m=%d: bnb %d (%s) vs brute force %d;", m, r.inlier_count, to_string(r.status), bf);
    }
  }
  const bool pass = exact >= 19 && agree == total;
  return {pass, fmt("10+20 planted, eps = 3 sigma: exact certified %d/20 (>= 19), max nodes %d (<= 5000)%s%s; "
                    "brute force agreement %d/%d (m <= 12)%s",
                    exact, max_nodes, misses.empty() ? "" : "; misses:", misses.c_str(), agree, total,
                    disagree.c_str())};
}

// ------------------------------------------------------------------ 4

Outcome consensus_autocalib() {
  int exact = 0, max_nodes = 0;
  std::string misses;
  for (int seed = 0; seed < 20; ++seed) {
    const FundamentalData d = synth_fundamentals(10, calib_K(), 5, seed);
    const ConsensusResult r = maximize_consensus(autocalib_consensus(d.Fs, 1e-3));
    max_nodes = std::max<int>(max_nodes, r.nodes);
    const bool ok = r.certified && r.inliers == d.inlier;
    exact += ok;
    if (!ok) misses += fmt(" seed %d (%s, %d inliers)", seed, to_string(r.status), r.inlier_count);
  }
  return {exact >= 19, fmt("5+5 fundamental matrices, eps 1e-3: exact certified %d/20 (>= 19), max nodes %d%s%s", exact,
                           max_nodes, misses.empty() ? "" : "; misses:", misses.c_str())};
}

// ------------------------------------------------------------------ 5

Outcome autocalib_accuracy() {
  const Eigen::Matrix3d K = calib_K();
  double df = 0, dpp = 0;
  for (int seed = 0; seed < 5; ++seed) {
    const FundamentalData d = synth_fundamentals(10, K, 0, seed);
    const RelaxedSolution s = solve_nonminimal(autocalib_problem(d.Fs));
    const Eigen::Matrix3d Kh = recover_K(omega_from_x(s.x)).K;
    df = std::max({df, std::abs(Kh(0, 0) - K(0, 0)) / K(0, 0), std::abs(Kh(1, 1) - K(1, 1)) / K(1, 1)});
    dpp = std::max(dpp, std::hypot(Kh(0, 2) - K(0, 2), Kh(1, 2) - K(1, 2)) / std::hypot(K(0, 2), K(1, 2)));
  }
  return {df <= 1e-3 && dpp <= 1e-3,
          fmt("10 exact F, 5 seeds: worst relative focal error %.2e (<= 1e-3), relative principal point error %.2e "
              "(<= 1e-3)",
              df, dpp)};
}

// ------------------------------------------------------------------ 6

Outcome quartic_hierarchy() {
  int s1_ok = 0, s0_fail = 0, s1_polished = 0, s0_polished_fail = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const QuarticData d = synth_quartics(5, 0.0, seed);
    const RelaxedSolution a = nrsfm_solve(d.system, 0);
    const RelaxedSolution b = nrsfm_solve(d.system, 1);
    s0_fail += (a.extracted - d.root).norm() > 1e-2;
    s1_ok += (b.extracted - d.root).norm() <= 1e-2;
    s0_polished_fail += (a.x - d.root).norm() > 1e-2;
    s1_polished += (b.x - d.root).norm() <= 1e-2;
  }
  return {s1_ok >= 45 && s0_fail >= 25,
          fmt("50 systems of 5 quartics, relaxation point: s=1 within 1e-2 in %d/50 (>= 45), s=0 misses in %d/50 "
              "(>= 25); after local polish: s=1 %d/50, s=0 misses %d/50",
              s1_ok, s0_fail, s1_polished, s0_polished_fail)};
}

// ------------------------------------------------------------------ 7

struct Analytic {
  std::string name;
  ConicProgram prog;
  double optimum;
};

std::vector<Analytic> analytic_instances() {
  std::vector<Analytic> out;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  // min <C, X>, trace X = 1, X psd: the smallest eigenvalue of C.
  for (int k : {2, 3, 4, 5, 6, 7, 8}) {
    Eigen::MatrixXd C(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j) C(i, j) = C(j, i) = g(rng);
    }
    ConicProgram p;
    const int first = p.add_psd_variable(k);
    Expr obj, tr(-1.0);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j) {
        const int v = first + ConicProgram::svec_index(k, i, j);
        obj.add(v, i == j ? C(i, i) : 2.0 * C(i, j));
        if (i == j) tr.add(v, 1.0);
      }
    }
    p.set_objective(obj);
    p.add_equality(tr);
    out.push_back({fmt("min-eig %d", k), p, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues()[0]});
  }
  // Distance from p to the cone {t >= ||u||} in R^4.
  for (int c = 0; c < 7; ++c) {
    Eigen::Vector4d q(2.0 * U(rng), U(rng), U(rng), U(rng));
    if (c == 0) q[0] = -3.0;  // polar cone side: the projection is the apex
    const double t0 = q[0], un = q.tail<3>().norm();
    const double dist = un <= t0 ? 0.0 : (un <= -t0 ? q.norm() : (un - t0) / std::sqrt(2.0));
    ConicProgram p;
    const int s = p.add_variable();
    const int x = p.add_variables(4);
    std::vector<Expr> cone, diff{Expr::var(s)};
    for (int i = 0; i < 4; ++i) {
      cone.push_back(Expr::var(x + i));
      diff.push_back(Expr::var(x + i) - q[i]);
    }
    p.add_soc(cone);
    p.add_soc(diff);
    p.set_objective(Expr::var(s));
    out.push_back({fmt("soc-projection %d", c), p, dist});
  }
  // Simplex and box LPs whose optimum is a vertex.
  for (int c = 0; c < 3; ++c) {
    const int n = 3 + 2 * c;
    ConicProgram p;
    const int x = p.add_variables(n, VarKind::Nonneg);
    Expr obj, sum(-1.0);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double ci = U(rng);
      best = std::min(best, ci);
      obj.add(x + i, ci);
      sum.add(x + i, 1.0);
    }
    p.add_equality(sum);
    p.set_objective(obj);
    out.push_back({fmt("simplex-lp %d", n), p, best});
  }
  for (int c = 0; c < 2; ++c) {
    const int n = 4 + 3 * c;
    ConicProgram p;
    const int x = p.add_variables(n);
    Expr obj;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lo = -1.0 - std::abs(U(rng)), hi = 1.0 + std::abs(U(rng)), ci = U(rng);
      p.add_nonneg(Expr::var(x + i) - lo);
      p.add_nonneg(Expr(hi) - Expr::var(x + i));
      obj.add(x + i, ci);
      best += ci > 0 ? ci * lo : ci * hi;
    }
    p.set_objective(obj);
    out.push_back({fmt("box-lp %d", n), p, best});
  }
  {
    // min -x - y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> corner (1.6, 1.2).
    ConicProgram p;
    const int x = p.add_variable(VarKind::Nonneg), y = p.add_variable(VarKind::Nonneg);
    p.add_nonneg(Expr(4.0) - Expr::var(x) - 2.0 * Expr::var(y));
    p.add_nonneg(Expr(6.0) - 3.0 * Expr::var(x) - Expr::var(y));
    p.set_objective(-Expr::var(x) - Expr::var(y));
    out.push_back({"lp-corner 2", p, -2.8});
  }
  return out;
}

Outcome solver_suite() {
  const auto inst = analytic_instances();
  int ok = 0;
  double worst_rel = 0, worst_gap = 0;
  std::string bad;
  // The gap bound is absolute, so the stopping tests target it directly.
  const SolverOptions opts{1e-9, 1e-9, 1e-9};
  for (const auto& a : inst) {
    const ConicSolution s = solve(a.prog, opts);
    const double rel = std::abs(s.primal_objective - a.optimum) / std::max(1.0, std::abs(a.optimum));
    const double gap = std::abs(s.primal_objective - s.dual_objective);
    worst_rel = std::max(worst_rel, rel);
    if (s.status == SolveStatus::Optimal) worst_gap = std::max(worst_gap, gap);
    const bool pass = s.status == SolveStatus::Optimal && rel <= 1e-6 && gap <= 1e-8;
    ok += pass;
    if (!pass) bad += fmt(" %s (%s, rel %.1e, gap %.1e);", a.name.c_str(), to_string(s.status), rel, gap);
  }
  return {ok == static_cast<int>(inst.size()),
          fmt("%d/%zu analytic instances optimal (tolerances 1e-9); worst relative objective error %.2e (<= 1e-6), worst duality gap "
              "%.2e (<= 1e-8)%s",
              ok, inst.size(), worst_rel, worst_gap, bad.c_str())};
}

// ------------------------------------------------------------------ 8

Outcome relaxation_soundness() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  int sound = 0, monotone = 0, valid = 0;
  double worst_excess = -1e300, worst_drop = 0;
  const int total = 200;
  for (int t = 0; t < total; ++t) {
    const int deg = t < total / 2 ? 2 : 4;
    Pop pop;
    pop.nvars = 2;
    pop.objective = Polynomial(2);
    const MonomialBasis basis(2, deg);
    for (int k = 0; k < basis.size(); ++k) pop.objective.add_term(basis[k], g(rng));
    for (int j = 0; j < 2; ++j) {
      const Polynomial x = Polynomial::variable(2, j);
      pop.inequalities.push_back(-(x * x) + 1.0);  // x_j in [-1, 1]
    }
    double grid = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 400; ++i) {
      for (int k = 0; k <= 400; ++k) {
        const double pt[2] = {-1.0 + i * 0.005, -1.0 + k * 0.005};
        grid = std::min(grid, pop.objective.eval(std::span<const double>(pt, 2)));
      }
    }
    const RelaxedSolution a = solve_pop(pop, 0);
    const RelaxedSolution b = solve_pop(pop, 1);
    valid += a.status == SolveStatus::Optimal && b.status == SolveStatus::Optimal;
    const double excess = std::max(a.objective, b.objective) - grid;
    worst_excess = std::max(worst_excess, excess);
    sound += excess <= 1e-6;
    worst_drop = std::max(worst_drop, a.objective - b.objective);
    monotone += b.objective >= a.objective - 1e-6;
  }
  return {sound == total && monotone == total && valid == total,
          fmt("%d random POPs (100 quadratic, 100 quartic) on [-1,1]^2: optimal %d, bound <= grid min + 1e-6 in %d "
              "(worst excess %.2e), s=1 >= s=0 in %d (worst drop %.2e)",
              total, valid, sound, worst_excess, monotone, worst_drop)};
}

// ------------------------------------------------------------------ 9

Outcome scaling() {
  const std::vector<int> ns = {10, 20, 40, 80, 160};
  std::vector<double> lx, ly;
  std::string pts;
  for (int n : ns) {
    std::vector<double> t;
    for (int rep = 0; rep < 5; ++rep) {
      const RigidData d = synth_rigid(n, 0.01, 0.0, 900 + rep);
      const auto t0 = std::chrono::steady_clock::now();
      solve_rigid(d.corrs);
      t.push_back(seconds_since(t0));
    }
    const double m = median(t);
    lx.push_back(std::log(n));
    ly.push_back(std::log(m));
    pts += fmt(" n=%d %.4fs", n, m);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope <= 1.5, fmt("median solve time:%s; log-log slope %.3f (<= 1.5)", pts.c_str(), slope)};
}

// ------------------------------------------------------------------ 10

bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool same(const RelaxedSolution& a, const RelaxedSolution& b) {
  return a.status == b.status && same(a.w, b.w) && same(a.x, b.x) && a.rank_gap == b.rank_gap &&
         a.objective == b.objective && a.residuals == b.residuals;
}

bool same(const ConsensusResult& a, const ConsensusResult& b) {
  if (a.status != b.status || a.inliers != b.inliers || a.nodes != b.nodes || !same(a.x, b.x)) return false;
  if (a.trace.size() != b.trace.size()) return false;
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    if (a.trace[k].pessimistic != b.trace[k].pessimistic || a.trace[k].optimistic != b.trace[k].optimistic ||
        a.trace[k].open_nodes != b.trace[k].open_nodes) {
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  std::vector<std::string> failed;
  auto check = [&](const char* what, const std::function<bool()>& f) {
    if (!f()) failed.push_back(what);
  };
  check("synth_rigid", [] {
    const RigidData a = synth_rigid(30, 0.01, 0.5, 77), b = synth_rigid(30, 0.01, 0.5, 77);
    for (std::size_t i = 0; i < a.corrs.size(); ++i) {
      if (std::memcmp(a.corrs[i].u.data(), b.corrs[i].u.data(), 3 * sizeof(double)) ||
          std::memcmp(a.corrs[i].v.data(), b.corrs[i].v.data(), 3 * sizeof(double))) {
        return false;
      }
    }
    return a.inlier == b.inlier && a.sigma == b.sigma && same(Eigen::VectorXd(a.truth.q), Eigen::VectorXd(b.truth.q));
  });
  check("synth_fundamentals", [] {
    const FundamentalData a = synth_fundamentals(10, calib_K(), 5, 77), b = synth_fundamentals(10, calib_K(), 5, 77);
    for (std::size_t i = 0; i < a.Fs.size(); ++i) {
      if (!same(Eigen::MatrixXd(a.Fs[i].F), Eigen::MatrixXd(b.Fs[i].F))) return false;
    }
    return a.inlier == b.inlier;
  });
  check("synth_quartics", [] {
    const QuarticData a = synth_quartics(5, 0.01, 77), b = synth_quartics(5, 0.01, 77);
    return a.system.polys == b.system.polys && same(Eigen::VectorXd(a.root), Eigen::VectorXd(b.root));
  });
  check("solve_rigid", [] {
    const RigidData d = synth_rigid(20, 0.01, 0.0, 78);
    return same(solve_rigid(d.corrs).solution, solve_rigid(d.corrs).solution);
  });
  check("solve_pop", [] {
    Pop pop;
    pop.nvars = 2;
    const Polynomial x = Polynomial::variable(2, 0), y = Polynomial::variable(2, 1);
    pop.objective = x * x * x * x + y * y * y * y - x * y + 0.3 * x;
    return same(solve_pop(pop, 1), solve_pop(pop, 1));
  });
  check("nrsfm_solve", [] {
    const QuarticData d = synth_quartics(5, 0.01, 79);
    return same(nrsfm_solve(d.system, 1), nrsfm_solve(d.system, 1));
  });
  check("rigid consensus", [] {
    const RigidData d = synth_rigid(15, 0.01, 1.0 / 3.0, 80);
    const ConsensusProblem p = rigid_consensus(d.corrs, 3.0 * d.sigma);
    return same(maximize_consensus(p), maximize_consensus(p));
  });
  check("autocalib consensus", [] {
    const FundamentalData d = synth_fundamentals(10, calib_K(), 5, 81);
    const ConsensusProblem p = autocalib_consensus(d.Fs, 1e-3);
    return same(maximize_consensus(p), maximize_consensus(p));
  });
  std::string detail = "generators, solve_rigid, solve_pop, nrsfm_solve and both consensus tasks compared bitwise";
  for (const auto& f : failed) detail += "; differs: " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Shor tightness on noiseless rigid instances", shor_tightness},
      {"Minimal-case noise sweep", minimal_sweep},
      {"Consensus exactness, rigid", consensus_rigid},
      {"Consensus exactness, autocalibration", consensus_autocalib},
      {"Autocalibration accuracy", autocalib_accuracy},
      {"Hierarchy behavior on quartics", quartic_hierarchy},
      {"Solver unit suite", solver_suite},
      {"Relaxation soundness", relaxation_soundness},
      {"Linear scaling trend", scaling},
      {"Determinism", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = criteria[k].second();
    failed += !o.pass;
    std::printf("[%s] C%d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
