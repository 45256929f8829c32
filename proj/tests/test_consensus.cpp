#include <algorithm>
#include <bit>
#include <random>

#include <gtest/gtest.h>

#include "momenta/consensus.hpp"
#include "momenta/vision.hpp"

using namespace momenta;

namespace {

Polynomial X(int n, int i) { return Polynomial::variable(n, i); }

Box box1(double lo, double hi) { return Box{{lo}, {hi}}; }

ConsensusProblem scalar_problem(const std::vector<Polynomial>& ps, double eps, const Box& box) {
  ConsensusProblem p;
  p.nvars = ps.front().nvars();
  for (const auto& q : ps) p.groups.push_back({q});
  p.eps = eps;
  p.constraints.box = box;
  return p;
}

// Residuals a_i x - b_i on x in [lo, hi]: the exact maximum is attained at an
// interval endpoint, so scanning every endpoint is an independent oracle.
struct LinearInstance {
  std::vector<double> a, b;
  double eps, lo, hi;
};

LinearInstance random_linear(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  LinearInstance L{{}, {}, 0.05, -3.0, 3.0};
  const double x0 = U(rng);
  for (int i = 0; i < m; ++i) {
    const double a = 0.5 + std::abs(U(rng));
    L.a.push_back(a);
    L.b.push_back(i < m / 2 ? a * x0 + 0.02 * U(rng) : 2.5 * U(rng));
  }
  return L;
}

int linear_oracle(const LinearInstance& L) {
  std::vector<double> cand{L.lo, L.hi};
  for (std::size_t i = 0; i < L.a.size(); ++i) {
    cand.push_back((L.b[i] - L.eps) / L.a[i]);
    cand.push_back((L.b[i] + L.eps) / L.a[i]);
  }
  int best = 0;
  for (double x : cand) {
    if (x < L.lo || x > L.hi) continue;
    int c = 0;
    for (std::size_t i = 0; i < L.a.size(); ++i) c += std::abs(L.a[i] * x - L.b[i]) <= L.eps + 1e-12;
    best = std::max(best, c);
  }
  return best;
}

ConsensusProblem linear_problem(const LinearInstance& L) {
  std::vector<Polynomial> ps;
  for (std::size_t i = 0; i < L.a.size(); ++i) ps.push_back(L.a[i] * X(1, 0) - L.b[i]);
  return scalar_problem(ps, L.eps, box1(L.lo, L.hi));
}

// Largest mask cardinality accepted by the feasibility relaxation.
int brute_force(const ConsensusProblem& p) {
  const int m = p.num_groups();
  std::vector<unsigned> masks((1u << m));
  for (unsigned k = 0; k < masks.size(); ++k) masks[k] = k;
  std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) { return std::popcount(a) > std::popcount(b); });
  for (unsigned k : masks) {
    std::vector<bool> in(m);
    for (int i = 0; i < m; ++i) in[i] = (k >> i) & 1u;
    if (k == 0 || assignment_feasible(p, in)) return std::popcount(k);
  }
  return 0;
}

void expect_sound(const ConsensusProblem& p, const ConsensusResult& r) {
  ASSERT_EQ(static_cast<int>(r.inliers.size()), p.num_groups());
  EXPECT_EQ(r.inlier_count, static_cast<int>(std::count(r.inliers.begin(), r.inliers.end(), true)));
  for (int i = 0; i < p.num_groups(); ++i) {
    if (!r.inliers[i]) continue;
    for (const auto& q : p.groups[i]) EXPECT_LE(std::abs(q.eval(r.x)), p.eps + 1e-6) << "group " << i;
  }
}

}  // namespace

TEST(BigM, LinearOnInterval) { EXPECT_DOUBLE_EQ(big_m_from_box(X(1, 0), box1(-2, 3)), 3.0); }

TEST(BigM, ConservativeQuadratic) { EXPECT_DOUBLE_EQ(big_m_from_box(X(1, 0) * X(1, 0) - 1.0, box1(-2, 2)), 5.0); }

TEST(BigM, RandomCubicDominatesGrid) {
  std::mt19937 rng(21);
  std::normal_distribution<double> g;
  const Box box{{-1, -1}, {1, 1}};
  for (int trial = 0; trial < 3; ++trial) {
    Polynomial p(2);
    const MonomialBasis basis(2, 3);
    for (int k = 0; k < basis.size(); ++k) p.add_term(basis[k], g(rng));
    double grid = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      for (int j = 0; j <= 2000; j += 4) {
        Eigen::VectorXd x(2);
        x << -1 + i * 1e-3, -1 + j * 1e-3;
        grid = std::max(grid, std::abs(p.eval(x)));
      }
    }
    EXPECT_GE(big_m_from_box(p, box), grid);
  }
}

TEST(BigM, UnboundedVariableThrows) {
  EXPECT_THROW(big_m_from_box(X(1, 0), Box::unbounded(1)), InvalidArgument);
  EXPECT_THROW(big_m_from_box(X(1, 0), Box{}), InvalidArgument);
  EXPECT_DOUBLE_EQ(big_m_from_box(Polynomial::constant(1, -4.0), Box{}), 4.0);
}

TEST(ConsensusProblem, Validation) {
  ConsensusProblem p = scalar_problem({X(1, 0) - 1.0}, 0.1, box1(-5, 5));
  EXPECT_NO_THROW(p.validate());
  p.eps = 0.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.eps = 0.1;
  p.big_m = {0.05};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.big_m = {1.0, 2.0};
  EXPECT_THROW(p.validate(), DimensionMismatch);
  p.big_m.clear();
  p.groups.clear();
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Consensus, AllInliersOneNode) {
  const Polynomial r = X(1, 0) - 1.0;
  const ConsensusProblem p = scalar_problem({r, r, r}, 0.1, box1(-5, 5));
  const ConsensusResult res = maximize_consensus(p);
  EXPECT_EQ(res.status, ConsensusStatus::Certified);
  EXPECT_TRUE(res.certified);
  EXPECT_EQ(res.inlier_count, 3);
  EXPECT_EQ(res.nodes, 1);
  EXPECT_EQ(res.gap, 0);
  expect_sound(p, res);
}

TEST(Consensus, OneObviousOutlier) {
  const Polynomial r = X(1, 0) - 1.0;
  const ConsensusProblem p = scalar_problem({r, r, X(1, 0) - 10.0}, 0.1, box1(-20, 20));
  const ConsensusResult res = maximize_consensus(p);
  EXPECT_TRUE(res.certified);
  EXPECT_EQ(res.inliers, (std::vector<bool>{true, true, false}));
  EXPECT_NEAR(res.x[0], 1.0, 0.1 + 1e-6);
  expect_sound(p, res);
}

TEST(NodeBound, RootOfAllInlierInstanceIsZero) {
  const Polynomial r = X(1, 0) - 1.0;
  const ConsensusProblem p = scalar_problem({r, r, r}, 0.1, box1(-5, 5));
  BnbNode root;
  root.z.assign(3, kFree);
  const NodeBound nb = relaxed_node_bound(root, p);
  EXPECT_TRUE(nb.feasible);
  EXPECT_EQ(nb.bound, 0);
}

TEST(NodeBound, LeafEqualsForcedOutliers) {
  const Polynomial r = X(1, 0) - 1.0;
  const ConsensusProblem p = scalar_problem({r, r, X(1, 0) - 10.0, X(1, 0) + 7.0}, 0.1, box1(-20, 20));
  BnbNode leaf;
  leaf.z = {kInlier, kInlier, kOutlier, kOutlier};
  const NodeBound nb = relaxed_node_bound(leaf, p);
  EXPECT_TRUE(nb.feasible);
  EXPECT_EQ(nb.bound, 2);
  leaf.z = {kInlier, kOutlier, kInlier, kOutlier};
  EXPECT_FALSE(relaxed_node_bound(leaf, p).feasible);
}

TEST(NodeBound, NeverBelowParent) {
  const ConsensusProblem p = linear_problem(random_linear(6, 3));
  BnbNode node;
  node.z.assign(6, kFree);
  node.bound = 5;
  const NodeBound nb = relaxed_node_bound(node, p);
  EXPECT_GE(nb.bound, 5);
}

TEST(Consensus, MatchesExactOracleOnLinearInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearInstance L = random_linear(8, seed);
    const ConsensusProblem p = linear_problem(L);
    const ConsensusResult res = maximize_consensus(p);
    EXPECT_TRUE(res.certified) << "seed " << seed;
    EXPECT_EQ(res.inlier_count, linear_oracle(L)) << "seed " << seed;
    expect_sound(p, res);
  }
}

TEST(Consensus, MatchesBruteForceOnQuadraticInstances) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    const double a = U(rng), b = U(rng);
    std::vector<Polynomial> ps;
    for (int i = 0; i < 7; ++i) {
      // Distance-squared style residuals (x - cx)^2 + (y - cy)^2 - r^2.
      const double cx = i < 4 ? a + 0.05 * U(rng) : U(rng);
      const double cy = i < 4 ? b + 0.05 * U(rng) : U(rng);
      ps.push_back((X(2, 0) - cx) * (X(2, 0) - cx) + (X(2, 1) - cy) * (X(2, 1) - cy) - 0.01);
    }
    ConsensusProblem p = scalar_problem(ps, 0.02, Box{{-2, -2}, {2, 2}});
    p.order = 1;
    const ConsensusResult res = maximize_consensus(p);
    EXPECT_TRUE(res.certified) << "trial " << trial;
    EXPECT_EQ(res.inlier_count, brute_force(p)) << "trial " << trial;
    expect_sound(p, res);
  }
}

TEST(Consensus, DoublingBigMKeepsCount) {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    ConsensusProblem p = linear_problem(random_linear(8, seed));
    const ConsensusResult a = maximize_consensus(p);
    p.big_m = p.resolved_big_m();
    for (double& M : p.big_m) M *= 2.0;
    const ConsensusResult b = maximize_consensus(p);
    EXPECT_TRUE(a.certified);
    EXPECT_TRUE(b.certified);
    EXPECT_EQ(a.inlier_count, b.inlier_count);
  }
}

TEST(Consensus, InliersVerifiedByIndependentResolve) {
  const ConsensusProblem p = linear_problem(random_linear(10, 12));
  const ConsensusResult res = maximize_consensus(p);
  ASSERT_TRUE(res.certified);
  NonMinimalProblem nm;
  nm.nvars = 1;
  nm.norm = Norm::Linf;
  nm.constraints = p.constraints;
  for (int i = 0; i < p.num_groups(); ++i) {
    if (res.inliers[i]) nm.groups.push_back(p.groups[i]);
  }
  const RelaxedSolution s = solve_nonminimal(nm);
  for (double r : s.residuals) EXPECT_LE(r, p.eps + 1e-6);
}

TEST(Consensus, TraceIsMonotone) {
  const ConsensusProblem p = linear_problem(random_linear(10, 9));
  const ConsensusResult res = maximize_consensus(p);
  ASSERT_FALSE(res.trace.empty());
  for (std::size_t k = 0; k < res.trace.size(); ++k) {
    const TraceStep& t = res.trace[k];
    EXPECT_LE(t.pessimistic, t.optimistic);
    if (k > 0) {
      EXPECT_GE(t.pessimistic, res.trace[k - 1].pessimistic);
      EXPECT_LE(t.optimistic, res.trace[k - 1].optimistic);
    }
  }
  ASSERT_TRUE(res.certified);
  EXPECT_EQ(res.trace.back().pessimistic, res.inlier_count);
  EXPECT_EQ(res.trace.back().optimistic, res.inlier_count);
}

TEST(Consensus, Deterministic) {
  const ConsensusProblem p = linear_problem(random_linear(10, 31));
  const ConsensusResult a = maximize_consensus(p);
  const ConsensusResult b = maximize_consensus(p);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.x, b.x);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].pessimistic, b.trace[k].pessimistic);
    EXPECT_EQ(a.trace[k].optimistic, b.trace[k].optimistic);
    EXPECT_EQ(a.trace[k].open_nodes, b.trace[k].open_nodes);
  }
}

TEST(Consensus, NodeLimitIsRespected) {
  ConsensusProblem p = linear_problem(random_linear(12, 2));
  p.node_limit = 1;
  const ConsensusResult res = maximize_consensus(p);
  EXPECT_LE(res.nodes, 1);
  if (!res.certified) {
    EXPECT_EQ(res.status, ConsensusStatus::Limit);
    EXPECT_GT(res.gap, 0);
  }
  expect_sound(p, res);
}

TEST(Consensus, InfeasibleRoot) {
  ConsensusProblem p = scalar_problem({X(1, 0) - 1.0}, 0.1, box1(-5, 5));
  p.constraints.equalities.push_back(X(1, 0) * X(1, 0) + 1.0);
  const ConsensusResult res = maximize_consensus(p);
  EXPECT_EQ(res.status, ConsensusStatus::Infeasible);
  EXPECT_FALSE(res.certified);
}

TEST(Consensus, VectorGroupNeedsEveryComponent) {
  ConsensusProblem p;
  p.nvars = 2;
  p.eps = 0.1;
  p.constraints.box = Box{{-5, -5}, {5, 5}};
  p.groups = {{X(2, 0) - 1.0, X(2, 1) - 1.0}, {X(2, 0) - 1.0, X(2, 1) - 3.0}, {X(2, 0) - 1.05, X(2, 1) - 0.95}};
  const ConsensusResult res = maximize_consensus(p);
  EXPECT_TRUE(res.certified);
  EXPECT_EQ(res.inliers, (std::vector<bool>{true, false, true}));
  expect_sound(p, res);
}

TEST(Consensus, RigidPlantedSmall) {
  const RigidData d = synth_rigid(12, 0.01, 0.25, 3);
  const ConsensusProblem p = rigid_consensus(d.corrs, 3.0 * d.sigma);
  const ConsensusResult res = maximize_consensus(p);
  EXPECT_TRUE(res.certified);
  EXPECT_EQ(res.inliers, d.inlier);
  EXPECT_LE(res.nodes, 5000);
  expect_sound(p, res);
}
