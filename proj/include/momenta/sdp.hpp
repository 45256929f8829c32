// Small conic programs over nonnegative, second-order and PSD cones, and a
// primal-dual interior-point solver for them (homogeneous self-dual
// embedding, Nesterov-Todd scaling, Mehrotra predictor-corrector).
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "momenta/error.hpp"

namespace momenta {

/// Affine expression sum_j a_j x_j + c over program variables.
class Expr {
 public:
  Expr() = default;
  Expr(double c) : constant_(c) {}  // NOLINT(google-explicit-constructor)
  static Expr var(int j, double coef = 1.0);

  Expr& add(int j, double coef);
  double constant() const { return constant_; }
  void set_constant(double c) { constant_ = c; }
  const std::map<int, double>& terms() const { return terms_; }
  double eval(const Eigen::VectorXd& x) const;

  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(double s);
  friend Expr operator+(Expr a, const Expr& b) { return a += b; }
  friend Expr operator-(Expr a, const Expr& b) { return a -= b; }
  friend Expr operator*(Expr a, double s) { return a *= s; }
  friend Expr operator*(double s, Expr a) { return a *= s; }
  friend Expr operator-(Expr a) { return a *= -1.0; }

 private:
  std::map<int, double> terms_;
  double constant_ = 0.0;
};

enum class VarKind { Free, Nonneg };

/// min objective(x) subject to affine equalities, e >= 0 rows, second-order
/// cones ||(e_1..e_k)|| <= e_0 and linear matrix inequalities M(x) >= 0.
class ConicProgram {
 public:
  int add_variable(VarKind kind = VarKind::Free);
  /// Adds `count` variables and returns the index of the first.
  int add_variables(int count, VarKind kind = VarKind::Free);
  /// Symmetric side x side matrix variable constrained PSD. Returns the
  /// first of side*(side+1)/2 scalars, stored column-major lower triangle.
  int add_psd_variable(int side);

  void add_equality(const Expr& e);
  void add_nonneg(const Expr& e);
  /// tu[0] >= ||tu[1..]||_2.
  void add_soc(const std::vector<Expr>& tu);
  /// Row-major side x side symmetric matrix of expressions, constrained PSD.
  void add_lmi(const std::vector<Expr>& entries, int side);
  void set_objective(const Expr& e) { objective_ = e; }

  int num_variables() const { return static_cast<int>(kinds_.size()); }
  VarKind kind(int j) const { return kinds_[j]; }
  const Expr& objective() const { return objective_; }
  const std::vector<Expr>& equalities() const { return eqs_; }
  const std::vector<Expr>& nonnegs() const { return nonneg_; }
  const std::vector<std::vector<Expr>>& socs() const { return socs_; }
  struct Lmi {
    int side;
    std::vector<Expr> entries;
  };
  const std::vector<Lmi>& lmis() const { return lmis_; }

  /// Index into a psd variable's scalars for cell (i, j).
  static int svec_index(int side, int i, int j);

 private:
  void check(const Expr& e) const;

  std::vector<VarKind> kinds_;
  Expr objective_;
  std::vector<Expr> eqs_;
  std::vector<Expr> nonneg_;
  std::vector<std::vector<Expr>> socs_;
  std::vector<Lmi> lmis_;
};

struct SolverOptions {
  double feastol = 1e-8;
  double reltol = 1e-8;
  double abstol = 1e-8;
  int max_iters = 200;
  int max_psd_side = 200;
  bool verbose = false;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalLimit };

const char* to_string(SolveStatus s);

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalLimit;
  Eigen::VectorXd x;        // primal variables
  Eigen::VectorXd y;        // equality multipliers
  Eigen::VectorXd z;        // cone multipliers (nonneg, soc, lmi svec)
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {});

struct FeasibilityReport {
  bool feasible = true;
  double worst = 0.0;
  std::string what;  // e.g. "PSD violation 0.1"
};

/// Checks all constraints of prog at x within tol; reports the worst one.
FeasibilityReport feasible(const ConicProgram& prog, const Eigen::VectorXd& x, double tol = 1e-7);

/// JSON debug dump: variables, objective and constraint triplets per block.
std::string program_to_json(const ConicProgram& prog);

}  // namespace momenta
