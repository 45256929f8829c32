// Consensus maximization by best-first branch and bound over inlier/outlier
// assignments, each node bounded by the big-M moment relaxation.
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "momenta/relax.hpp"

namespace momenta {

struct ConsensusProblem {
  int nvars = 1;
  /// Residual groups; a group is an inlier when every component is within eps.
  std::vector<std::vector<Polynomial>> groups;
  double eps = 0.1;
  ConstraintSet constraints;
  /// Per-group big-M; empty means big_m_from_box over constraints.box.
  std::vector<double> big_m;
  int order = 0;
  ResidualBound bound = ResidualBound::Scalar;
  double trace_reg = 1e-6;
  /// Relaxed-objective term as in NonMinimalProblem::bias.
  std::optional<Polynomial> bias;
  long node_limit = 5000;
  double time_limit = std::numeric_limits<double>::infinity();  // seconds
  SolverOptions solver{1e-7, 1e-7, 1e-7, 200, 200, false};
  /// Applied to every extracted point before it is classified.
  PointHook hook;

  int num_groups() const { return static_cast<int>(groups.size()); }
  int max_degree() const;
  void validate() const;
  /// big_m, or the box-derived values when big_m is empty.
  std::vector<double> resolved_big_m() const;
};

/// Upper bound of |p| over the box: sum of |c| * prod max(|lo|, |hi|)^e.
double big_m_from_box(const Polynomial& p, const Box& box);

/// Node assignment values.
enum : std::int8_t { kFree = -1, kInlier = 0, kOutlier = 1 };

struct BnbNode {
  std::vector<std::int8_t> z;
  int bound = 0;  // lower bound on the outlier count
  int depth = 0;
  long id = 0;
};

struct NodeBound {
  bool feasible = false;
  int bound = std::numeric_limits<int>::max();
  double relaxed_sum = 0.0;   // sum of relaxed free z plus forced outliers
  Eigen::VectorXd z;          // relaxed z per group (forced values included)
  Eigen::VectorXd x;          // extracted point
  double rank_gap = 1.0;
  SolveStatus status = SolveStatus::NumericalLimit;
};

/// Solves the node relaxation: free z in [0, 1], forced inliers bounded by
/// eps, forced outliers dropped. The bound is never below the node's own.
NodeBound relaxed_node_bound(const BnbNode& node, const ConsensusProblem& prob);

/// Groups with every component within eps (+ slack) at x.
std::vector<bool> classify(const ConsensusProblem& prob, const Eigen::VectorXd& x, double slack = 1e-9);

/// Whether x satisfies the constraint set within tol.
bool satisfies_constraints(const ConstraintSet& K, const Eigen::VectorXd& x, double tol = 1e-6);

/// Feasibility relaxation with the given inliers forced and the rest dropped.
/// Returns false when the relaxation is infeasible; otherwise x receives the
/// extracted point.
bool assignment_feasible(const ConsensusProblem& prob, const std::vector<bool>& inliers, Eigen::VectorXd* x = nullptr);

struct TraceStep {
  long iteration = 0;
  int pessimistic = 0;  // best inlier count found
  int optimistic = 0;   // inlier count no assignment can exceed
  int open_nodes = 0;
  double seconds = 0.0;
};

enum class ConsensusStatus { Certified, Limit, Infeasible };
const char* to_string(ConsensusStatus s);

struct ConsensusResult {
  ConsensusStatus status = ConsensusStatus::Limit;
  std::vector<bool> inliers;
  int inlier_count = 0;
  bool certified = false;
  int gap = 0;  // optimistic - pessimistic at termination
  Eigen::VectorXd x;
  std::vector<TraceStep> trace;
  long nodes = 0;
  double seconds = 0.0;
};

ConsensusResult maximize_consensus(const ConsensusProblem& prob);

}  // namespace momenta
