#include <random>

#include <gtest/gtest.h>

#include "momenta/sdp.hpp"

using namespace momenta;

namespace {

// min <C, X> s.t. trace X = 1, X psd. Returns program and first index of X.
ConicProgram min_eig_program(const Eigen::MatrixXd& C, int& first) {
  const int k = static_cast<int>(C.rows());
  ConicProgram prog;
  first = prog.add_psd_variable(k);
  Expr obj, tr(-1.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j) {
      const int v = first + ConicProgram::svec_index(k, i, j);
      obj.add(v, i == j ? C(i, i) : 2.0 * C(i, j));
      if (i == j) tr.add(v, 1.0);
    }
  }
  prog.set_objective(obj);
  prog.add_equality(tr);
  return prog;
}

}  // namespace

TEST(Solve, MinimumEigenvalueDiagonal) {
  int first = 0;
  const ConicProgram prog = min_eig_program(Eigen::Vector3d(3, 1, 2).asDiagonal(), first);
  const ConicSolution sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.primal_objective, 1.0, 1e-7);
  EXPECT_NEAR(sol.x[first + ConicProgram::svec_index(3, 1, 1)], 1.0, 1e-6);
  EXPECT_NEAR(sol.x[first + ConicProgram::svec_index(3, 0, 0)], 0.0, 1e-6);
  EXPECT_NEAR(sol.x[first + ConicProgram::svec_index(3, 2, 2)], 0.0, 1e-6);
  EXPECT_LE(sol.relative_gap, 1e-8);
}

TEST(Solve, MinimumEigenvalueRandomOracle) {
  std::mt19937 rng(42);
  std::normal_distribution<double> g;
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd C(8, 8);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j <= i; ++j) C(i, j) = C(j, i) = g(rng);
    }
    int first = 0;
    const ConicSolution sol = solve(min_eig_program(C, first));
    ASSERT_EQ(sol.status, SolveStatus::Optimal);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues()[0];
    EXPECT_NEAR(sol.primal_objective, lmin, 1e-7);
  }
}

TEST(Solve, SocProjection) {
  ConicProgram prog;
  const int t = prog.add_variable(), x = prog.add_variable(), y = prog.add_variable();
  prog.add_soc({Expr::var(t), Expr::var(x) - 1.0, Expr::var(y) - 2.0});
  prog.set_objective(Expr::var(t));
  const ConicSolution sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[t], 0.0, 1e-7);
  EXPECT_NEAR(sol.x[x], 1.0, 1e-6);
  EXPECT_NEAR(sol.x[y], 2.0, 1e-6);
}

TEST(Solve, LpCorner) {
  // min -x - y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2).
  ConicProgram prog;
  const int x = prog.add_variable(VarKind::Nonneg), y = prog.add_variable(VarKind::Nonneg);
  prog.add_nonneg(Expr(4.0) - Expr::var(x) - 2.0 * Expr::var(y));
  prog.add_nonneg(Expr(6.0) - 3.0 * Expr::var(x) - Expr::var(y));
  prog.set_objective(-Expr::var(x) - Expr::var(y));
  const ConicSolution sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.primal_objective, -2.8, 1e-7);
  EXPECT_NEAR(sol.x[x], 1.6, 1e-6);
  EXPECT_NEAR(sol.x[y], 1.2, 1e-6);
}

TEST(Solve, DetectsInfeasibility) {
  ConicProgram prog;
  const int x = prog.add_variable(VarKind::Nonneg);
  prog.add_nonneg(Expr(-1.0) - Expr::var(x));
  prog.set_objective(Expr::var(x));
  EXPECT_EQ(solve(prog).status, SolveStatus::Infeasible);
}

TEST(Solve, DetectsInconsistentEqualities) {
  ConicProgram prog;
  const int x = prog.add_variable();
  prog.add_equality(Expr::var(x) - 1.0);
  prog.add_equality(2.0 * Expr::var(x) - 4.0);
  prog.add_nonneg(Expr::var(x));
  EXPECT_EQ(solve(prog).status, SolveStatus::Infeasible);
}

TEST(Solve, RedundantEqualitiesAreDropped) {
  ConicProgram prog;
  const int x = prog.add_variable(VarKind::Nonneg);
  prog.add_equality(Expr::var(x) - 1.0);
  prog.add_equality(2.0 * Expr::var(x) - 2.0);
  prog.set_objective(Expr::var(x));
  const ConicSolution sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[x], 1.0, 1e-8);
}

TEST(Solve, DetectsUnboundedness) {
  ConicProgram prog;
  const int x = prog.add_variable(VarKind::Nonneg);
  prog.set_objective(-Expr::var(x));
  EXPECT_EQ(solve(prog).status, SolveStatus::Unbounded);
}

TEST(Solve, Deterministic) {
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  Eigen::MatrixXd C(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j) C(i, j) = C(j, i) = g(rng);
  }
  int first = 0;
  const ConicProgram prog = min_eig_program(C, first);
  const ConicSolution a = solve(prog), b = solve(prog);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.z, b.z);
}

TEST(Solve, PsdCapEnforced) {
  ConicProgram prog;
  prog.add_psd_variable(5);
  SolverOptions opts;
  opts.max_psd_side = 4;
  EXPECT_THROW(solve(prog, opts), InvalidArgument);
}

TEST(Feasible, InteriorAndViolation) {
  int first = 0;
  const ConicProgram prog = min_eig_program(Eigen::Vector3d(3, 1, 2).asDiagonal(), first);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(prog.num_variables());
  for (int i = 0; i < 3; ++i) x[first + ConicProgram::svec_index(3, i, i)] = 1.0 / 3.0;
  EXPECT_TRUE(feasible(prog, x).feasible);

  // diag(0.55, 0.55, -0.1): trace 1, eigenvalue -0.1.
  x[first + ConicProgram::svec_index(3, 0, 0)] = 0.55;
  x[first + ConicProgram::svec_index(3, 1, 1)] = 0.55;
  x[first + ConicProgram::svec_index(3, 2, 2)] = -0.1;
  const FeasibilityReport rep = feasible(prog, x);
  EXPECT_FALSE(rep.feasible);
  EXPECT_NEAR(rep.worst, 0.1, 1e-12);
  EXPECT_EQ(rep.what.rfind("PSD violation 0.1", 0), 0u);
  EXPECT_THROW(feasible(prog, Eigen::VectorXd::Zero(2)), DimensionMismatch);
}

TEST(Feasible, SolverOutputIsFeasible) {
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  Eigen::MatrixXd C(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j <= i; ++j) C(i, j) = C(j, i) = g(rng);
  }
  int first = 0;
  const ConicProgram prog = min_eig_program(C, first);
  const ConicSolution sol = solve(prog);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_TRUE(feasible(prog, sol.x).feasible) << feasible(prog, sol.x).what;
}

TEST(ConicProgram, RejectsUndeclaredVariablesAndAsymmetry) {
  ConicProgram prog;
  prog.add_variable();
  EXPECT_THROW(prog.add_nonneg(Expr::var(3)), InvalidArgument);
  EXPECT_THROW(prog.add_lmi({Expr::var(0), Expr(1.0), Expr(2.0), Expr::var(0)}, 2), InvalidArgument);
  EXPECT_THROW(prog.add_lmi({Expr::var(0)}, 2), DimensionMismatch);
}

TEST(ConicProgram, JsonDumpMentionsBlocks) {
  ConicProgram prog;
  prog.add_psd_variable(2);
  const std::string js = program_to_json(prog);
  EXPECT_NE(js.find("\"lmi\""), std::string::npos);
  EXPECT_NE(js.find("\"side\": 2"), std::string::npos);
}
