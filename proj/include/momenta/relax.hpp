// Shor and Lasserre relaxations of polynomial programs, the non-minimal
// L1/L2/Linf residual programs, and point extraction from moment matrices.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "momenta/moment.hpp"
#include "momenta/poly.hpp"
#include "momenta/sdp.hpp"

namespace momenta {

/// min objective(x) s.t. inequalities >= 0, equalities = 0.
struct Pop {
  int nvars = 1;
  Polynomial objective{1};
  std::vector<Polynomial> inequalities;
  std::vector<Polynomial> equalities;

  int max_degree() const;
  void validate() const;
};

/// Per-variable interval bounds; +-infinity for unbounded sides.
struct Box {
  std::vector<double> lo, hi;

  static Box unbounded(int n);
  bool is_set() const { return !lo.empty(); }
  bool bounded(int j) const { return std::isfinite(lo[j]) && std::isfinite(hi[j]); }
  void validate(int n) const;
};

/// Problem-specific constraint set K.
struct ConstraintSet {
  std::vector<Polynomial> equalities;
  std::vector<Polynomial> inequalities;
  /// Symmetric polynomial matrices constrained PSD (e.g. omega(x) >= 0).
  std::vector<std::vector<std::vector<Polynomial>>> psd;
  Box box;

  int max_degree() const;
  void validate(int n) const;
};

enum class Norm { L1, L2, Linf };

const char* to_string(Norm n);
Norm parse_norm(const std::string& s);

/// How a residual's pseudo-moment image is bounded by its epsilon.
enum class ResidualBound {
  Scalar,          // |L(p)| <= eps
  Trace,           // |trace M^s(p w)| <= eps
  LocalizingBand,  // -E <= M^s(p w) <= E, E(0,0) plays the role of eps
};

const char* to_string(ResidualBound b);

struct NonMinimalProblem {
  int nvars = 1;
  /// Residual groups; each group is one measurement's stacked polynomials.
  std::vector<std::vector<Polynomial>> groups;
  ConstraintSet constraints;
  Norm norm = Norm::L1;
  int order = 0;  // s
  ResidualBound bound = ResidualBound::Scalar;
  /// Weight of trace(M^r(w)) added to the objective; 0 disables. Moments
  /// not reached by any residual or constraint are otherwise unbounded.
  double trace_reg = 1e-6;
  /// Added to the relaxed objective but not reported; selects one member of a
  /// symmetric pair of minimizers (e.g. -q_w for quaternions).
  std::optional<Polynomial> bias;

  int max_degree() const;
  void validate() const;
};

/// Moment relaxation assembled on a ConicProgram. Moment variables occupy
/// program indices [0, idx.num_momvars()).
class MomentBuilder {
 public:
  MomentBuilder(int nvars, int order);

  ConicProgram& prog() { return prog_; }
  const MomentIndex& index() const { return idx_; }
  int order() const { return idx_.order(); }

  Expr riesz(const Polynomial& p) const;
  Expr to_expr(const LinearForm& f) const;
  /// Localizing map of p at order s as a side x side matrix of expressions.
  std::vector<Expr> localizing(const Polynomial& p, int s) const;
  /// Largest localizing order available for a polynomial of degree d.
  int max_order(int degree) const;

  void add_inequality(const Polynomial& p);
  void add_equality(const Polynomial& q);
  void add_psd(const std::vector<std::vector<Polynomial>>& P);
  void add_box(const Box& box);
  void add_constraints(const ConstraintSet& K);
  /// Adds |image of p| <= e for a fresh e (band corner E(0,0) in band mode)
  /// and returns e. The localizing order is min(s, max_order(deg p)).
  Expr bound_residual(const Polynomial& p, int s, ResidualBound mode);
  /// trace(M^r(w)).
  Expr moment_trace() const;

 private:
  MomentIndex idx_;
  ConicProgram prog_;
};

struct MomentProgram {
  ConicProgram prog;
  MomentIndex idx;
  /// Objective without regularization terms.
  Expr reported_objective;
  /// Epsilon (or band corner) expressions, one per bounded residual.
  std::vector<Expr> eps;

  Eigen::VectorXd moments(const Eigen::VectorXd& x) const { return x.head(idx.num_momvars()); }
};

/// Shor's relaxation of a quadratic POP over an explicit (n+1)x(n+1) PSD
/// matrix Y stored as a psd variable starting at program index 0.
ConicProgram shor_relax(const Pop& pop);
/// Y from a solution of shor_relax.
Eigen::MatrixXd shor_matrix(const Eigen::VectorXd& x, int nvars);

MomentProgram lasserre_relax(const Pop& pop, int s);
MomentProgram nonminimal_program(const NonMinimalProblem& prob);

struct Extraction {
  Eigen::VectorXd x;
  double rank_gap = 0.0;
};

/// Point from the order-1 block of M^r(w): top eigenvector scaled by the
/// square root of its eigenvalue, homogenized by its first entry.
Extraction extract_point(const Eigen::VectorXd& w, const MomentIndex& idx);
Extraction extract_point(const Eigen::MatrixXd& Y1);

/// Atoms of a finitely supported moment sequence, from the column echelon
/// form of M^r(w) and its multiplication matrices. Empty when the rank
/// condition fails (basis monomials of degree r are needed).
std::vector<Eigen::VectorXd> extract_atoms(const Eigen::VectorXd& w, const MomentIndex& idx,
                                           double rank_tol = 1e-6);

struct RelaxedSolution {
  SolveStatus status = SolveStatus::NumericalLimit;
  Eigen::VectorXd w;
  Eigen::MatrixXd moment_matrix;
  Eigen::VectorXd x;
  Eigen::VectorXd extracted;  // relaxation point before atom selection or polish
  double rank_gap = 1.0;
  std::vector<double> residuals;  // |p(x)| per scalar residual, group order
  double objective = 0.0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  bool relaxation_loose = false;
  int iterations = 0;
  double seconds = 0.0;
};

/// Optional post-processing of the extracted point (e.g. sign conventions).
using PointHook = std::function<void(Eigen::VectorXd&)>;

RelaxedSolution solve_pop(const Pop& pop, int s, const SolverOptions& opts = {});
RelaxedSolution solve_nonminimal(const NonMinimalProblem& prob, const SolverOptions& opts = {},
                                 const PointHook& hook = {});

/// Levenberg-Marquardt refinement of x on the stacked residuals and the
/// equality constraints; box bounds are enforced by clamping.
Eigen::VectorXd polish(const std::vector<Polynomial>& residuals, const ConstraintSet& K, Eigen::VectorXd x,
                       int steps = 10);

}  // namespace momenta
