#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "momenta/vision.hpp"

using namespace momenta;

namespace {

Eigen::Matrix3d rot_from_axis(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// Least-squares rigid fit (Kabsch/Horn) as an independent oracle.
std::pair<Eigen::Matrix3d, Eigen::Vector3d> horn(const std::vector<Correspondence3D>& c) {
  Eigen::Vector3d mu = Eigen::Vector3d::Zero(), mv = Eigen::Vector3d::Zero();
  for (const auto& p : c) {
    mu += p.u;
    mv += p.v;
  }
  mu /= c.size();
  mv /= c.size();
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (const auto& p : c) H += (p.u - mu) * (p.v - mv).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Eigen::Matrix3d R = svd.matrixV() * D * svd.matrixU().transpose();
  return {R, mv - R * mu};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Eigen::Matrix3d test_K() {
  Eigen::Matrix3d K;
  K << 1.25, 0, 0.05, 0, 1.3, -0.03, 0, 0, 1;
  return K;
}

double normalized_max(const FundamentalInput& F, const Eigen::Matrix3d& omega) {
  const auto ps = kruppa_polys(F);
  const double n = std::hypot(ps[0].coefficient_norm(), ps[1].coefficient_norm());
  const Eigen::VectorXd x = x_from_omega(omega);
  return std::max(std::abs(ps[0].eval(x)), std::abs(ps[1].eval(x))) / n;
}

}  // namespace

// ---------------------------------------------------------------- rigid

TEST(Quaternion, RotationIsOrthogonalForUnitQuaternions) {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector4d q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    const Eigen::Matrix3d R = quat_to_rot(q);
    EXPECT_LE((R.transpose() * R - Eigen::Matrix3d::Identity()).norm(), 1e-12);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
    const Eigen::Vector4d back = rot_to_quat(R);
    EXPECT_LE(std::min((back - q).norm(), (back + q).norm()), 1e-9);
    EXPECT_GE(back[0], 0.0);
  }
}

TEST(Quaternion, MatchesEigenConvention) {
  const Eigen::Quaterniond e(Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()));
  const Eigen::Vector4d q(e.w(), e.x(), e.y(), e.z());
  EXPECT_LE((quat_to_rot(q) - e.toRotationMatrix()).norm(), 1e-12);
}

TEST(Quaternion, RotationErrorDegrees) {
  const Eigen::Matrix3d A = rot_from_axis(Eigen::Vector3d(0, 0, 1), 0.0);
  EXPECT_NEAR(rotation_error_deg(A, rot_from_axis(Eigen::Vector3d(0, 1, 1), M_PI / 6)), 30.0, 1e-9);
  EXPECT_NEAR(rotation_error_deg(A, rot_from_axis(Eigen::Vector3d(1, 0, 0), 1e-8)), 1e-8 * 180 / M_PI, 1e-15);
}

TEST(Rigid, ResidualsStructure) {
  const RigidData d = synth_rigid(4, 0.0, 0.0, 1);
  const NonMinimalProblem prob = rigid_residuals(d.corrs);
  EXPECT_EQ(prob.nvars, 7);
  ASSERT_EQ(prob.groups.size(), 4u);
  EXPECT_EQ(prob.norm, Norm::L2);
  EXPECT_EQ(prob.order, 0);
  ASSERT_EQ(prob.constraints.equalities.size(), 1u);
  Eigen::VectorXd x(7);
  x << d.truth.q, d.truth.t;
  EXPECT_NEAR(prob.constraints.equalities[0].eval(x), 0.0, 1e-12);
  for (const auto& g : prob.groups) {
    ASSERT_EQ(g.size(), 3u);
    for (const auto& p : g) {
      EXPECT_EQ(p.degree(), 2);
      EXPECT_NEAR(p.eval(x), 0.0, 1e-12);
    }
  }
}

TEST(Rigid, RejectsFewerThanThreePoints) {
  std::vector<Correspondence3D> c(2);
  for (auto& p : c) p.u = p.v = Eigen::Vector3d::Zero();
  EXPECT_THROW(rigid_residuals(c), InvalidArgument);
}

TEST(Rigid, IdentityTransform) {
  std::vector<Correspondence3D> c;
  for (const Eigen::Vector3d u : {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1),
                                  Eigen::Vector3d(0.5, -0.5, 0.3)})
    c.push_back({u, u});
  const RigidFit fit = solve_rigid(c);
  ASSERT_EQ(fit.solution.status, SolveStatus::Optimal);
  EXPECT_LE((fit.estimate.q - Eigen::Vector4d(1, 0, 0, 0)).norm(), 1e-6);
  EXPECT_LE(fit.estimate.t.norm(), 1e-6);
}

TEST(Rigid, PlantedNoiselessRecovery) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const RigidData d = synth_rigid(10, 0.0, 0.0, seed);
    const RigidFit fit = solve_rigid(d.corrs);
    EXPECT_LE(fit.solution.objective, 1e-6);
    EXPECT_LE(rotation_error_deg(fit.estimate.R(), d.truth.R()), 1e-4);
    EXPECT_LE((fit.estimate.t - d.truth.t).norm(), 1e-5);
    EXPECT_LE(std::min((fit.estimate.q - d.truth.q).norm(), (fit.estimate.q + d.truth.q).norm()), 1e-5);
    EXPECT_LE(fit.solution.rank_gap, 1e-6);
  }
}

TEST(Rigid, EstimateInvariants) {
  const RigidData d = synth_rigid(10, 0.02, 0.0, 5);
  const RigidEstimate e = solve_rigid(d.corrs).estimate;
  EXPECT_NEAR(e.q.norm(), 1.0, 1e-8);
  EXPECT_GE(e.q[0], 0.0);
  EXPECT_LE((e.R().transpose() * e.R() - Eigen::Matrix3d::Identity()).norm(), 1e-7);
  EXPECT_NEAR(e.R().determinant(), 1.0, 1e-7);
}

TEST(Rigid, MinimalNoisyCaseMatchesHorn) {
  std::vector<double> ours, oracle, gaps;
  for (int t = 0; t < 100; ++t) {
    const RigidData d = synth_rigid(3, 0.01, 0.0, 500 + t);
    const RigidFit fit = solve_rigid(d.corrs);
    const auto [Rh, th] = horn(d.corrs);
    ours.push_back(rotation_error_deg(fit.estimate.R(), d.truth.R()));
    oracle.push_back(rotation_error_deg(Rh, d.truth.R()));
    gaps.push_back(fit.solution.rank_gap);
  }
  EXPECT_LE(median(ours), 2.0 * median(oracle));
  EXPECT_LE(median(gaps), 1e-3);
}

TEST(Rigid, Equivariance) {
  const RigidData d = synth_rigid(10, 0.01, 0.0, 8);
  const Eigen::Matrix3d R0 = rot_from_axis(Eigen::Vector3d(1, -2, 0.5), 0.9);
  std::vector<Correspondence3D> rotated = d.corrs;
  for (auto& c : rotated) {
    c.u = R0 * c.u;
    c.v = R0 * c.v;
  }
  const RigidFit a = solve_rigid(d.corrs);
  const RigidFit b = solve_rigid(rotated);
  EXPECT_NEAR(a.solution.objective, b.solution.objective, 1e-6);
  EXPECT_LE((R0 * a.estimate.R() * R0.transpose() - b.estimate.R()).norm(), 1e-6);
  EXPECT_LE((R0 * a.estimate.t - b.estimate.t).norm(), 1e-6);
}

TEST(SynthRigid, NoiselessResidualsVanish) {
  const RigidData d = synth_rigid(20, 0.0, 0.0, 2);
  const Eigen::Matrix3d R = d.truth.R();
  for (const auto& c : d.corrs) EXPECT_LE((c.v - R * c.u - d.truth.t).norm(), 1e-15);
  EXPECT_EQ(std::count(d.inlier.begin(), d.inlier.end(), true), 20);
  EXPECT_EQ(d.sigma, 0.0);
}

TEST(SynthRigid, Deterministic) {
  const RigidData a = synth_rigid(30, 0.01, 0.5, 99);
  const RigidData b = synth_rigid(30, 0.01, 0.5, 99);
  ASSERT_EQ(a.corrs.size(), b.corrs.size());
  for (std::size_t i = 0; i < a.corrs.size(); ++i) {
    EXPECT_EQ(a.corrs[i].u, b.corrs[i].u);
    EXPECT_EQ(a.corrs[i].v, b.corrs[i].v);
  }
  EXPECT_EQ(a.inlier, b.inlier);
  EXPECT_EQ(a.truth.q, b.truth.q);
}

TEST(SynthRigid, OutlierCount) {
  const RigidData d = synth_rigid(100, 0.01, 0.9, 4);
  EXPECT_EQ(std::count(d.inlier.begin(), d.inlier.end(), false), 90);
  const RigidData e = synth_rigid(7, 0.0, 0.5, 4);
  EXPECT_EQ(std::count(e.inlier.begin(), e.inlier.end(), false), 4);
}

TEST(SynthRigid, NoiseScalesWithDiameter) {
  const RigidData d = synth_rigid(50, 0.02, 0.0, 6);
  double diam = 0.0;
  for (const auto& a : d.corrs)
    for (const auto& b : d.corrs) diam = std::max(diam, (a.u - b.u).norm());
  EXPECT_NEAR(d.sigma, 0.02 * diam, 1e-15);
}

TEST(SynthRigid, RejectsBadArguments) {
  EXPECT_THROW(synth_rigid(2, 0.0, 0.0, 1), InvalidArgument);
  EXPECT_THROW(synth_rigid(10, 0.0, 1.0, 1), InvalidArgument);
  EXPECT_THROW(synth_rigid(10, -0.1, 0.0, 1), InvalidArgument);
}

// ------------------------------------------------------------ autocalib

TEST(Kruppa, VanishAtPlantedOmega) {
  const FundamentalData d = synth_fundamentals(10, test_K(), 0, 3);
  for (const auto& F : d.Fs) {
    EXPECT_LE(normalized_max(F, d.omega), 1e-9);
    for (const auto& p : kruppa_polys(F)) EXPECT_EQ(p.degree(), 2);
  }
}

TEST(Kruppa, PureTranslationWithIdentityK) {
  Eigen::Matrix3d F;
  F << 0, 0, 0, 0, 0, -1, 0, 1, 0;  // [t]x with t = (1, 0, 0), R = I
  const FundamentalInput in = FundamentalInput::from_matrix(F);
  const Eigen::VectorXd x = x_from_omega(Eigen::Matrix3d::Identity());
  for (const auto& p : kruppa_polys(in)) EXPECT_LE(std::abs(p.eval(x)), 1e-12);
}

TEST(Kruppa, RandomOmegaDoesNotVanish) {
  const FundamentalData d = synth_fundamentals(10, test_K(), 0, 5);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> f(1.0, 3.0), pp(-0.2, 0.2);
  for (const auto& F : d.Fs) {
    Eigen::Matrix3d K;
    K << f(rng), 0, pp(rng), 0, f(rng), pp(rng), 0, 0, 1;
    const Eigen::Matrix3d w = K * K.transpose();
    EXPECT_GT(normalized_max(F, w), 1e-3);
  }
}

TEST(Kruppa, ScaleInvariantAfterNormalization) {
  const FundamentalData d = synth_fundamentals(3, test_K(), 0, 7);
  const FundamentalInput a = d.Fs[0];
  const FundamentalInput b = FundamentalInput::from_matrix(2.0 * a.F);
  const auto pa = kruppa_polys(a);
  const auto pb = kruppa_polys(b);
  for (int k = 0; k < 2; ++k) EXPECT_LE((pb[k] - 4.0 * pa[k]).coefficient_norm(), 1e-12 * pb[k].coefficient_norm());
  const NonMinimalProblem na = autocalib_problem({a});
  const NonMinimalProblem nb = autocalib_problem({b});
  for (int k = 0; k < 3; ++k) EXPECT_LE((na.groups[0][k] - nb.groups[0][k]).coefficient_norm(), 1e-12);
}

TEST(Kruppa, ThirdRatioRemovesIdentityRoot) {
  const FundamentalData d = synth_fundamentals(4, test_K(), 0, 11);
  for (const auto& F : d.Fs) {
    EXPECT_LE(normalized_max(F, Eigen::Matrix3d::Identity()), 1e-12);
    const auto ps = kruppa_system(F);
    EXPECT_GT(std::abs(ps[2].eval(x_from_omega(Eigen::Matrix3d::Identity()))), 1e-3 * ps[2].coefficient_norm());
    EXPECT_LE(std::abs(ps[2].eval(x_from_omega(d.omega))), 1e-9 * ps[2].coefficient_norm());
  }
}

TEST(Fundamental, RejectsWrongRank) {
  EXPECT_THROW(FundamentalInput::from_matrix(Eigen::Matrix3d::Identity()), InvalidArgument);
  Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
  F(0, 0) = 1.0;
  EXPECT_THROW(FundamentalInput::from_matrix(F), InvalidArgument);
}

TEST(SynthFundamentals, RankTwoAndSeparatedOutliers) {
  const FundamentalData d = synth_fundamentals(10, test_K(), 4, 21);
  EXPECT_EQ(std::count(d.inlier.begin(), d.inlier.end(), false), 4);
  for (std::size_t i = 0; i < d.Fs.size(); ++i) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(d.Fs[i].F);
    EXPECT_LE(svd.singularValues()[2], 1e-10 * svd.singularValues()[0]);
    if (d.inlier[i]) {
      EXPECT_LE(normalized_max(d.Fs[i], d.omega), 1e-9);
    } else {
      const NonMinimalProblem p = autocalib_problem({d.Fs[i]});
      double r = 0.0;
      for (const auto& q : p.groups[0]) r = std::max(r, std::abs(q.eval(x_from_omega(d.omega))));
      EXPECT_GE(r, 1e-2);
    }
  }
}

TEST(SynthFundamentals, Deterministic) {
  const FundamentalData a = synth_fundamentals(6, test_K(), 2, 8);
  const FundamentalData b = synth_fundamentals(6, test_K(), 2, 8);
  for (std::size_t i = 0; i < a.Fs.size(); ++i) EXPECT_EQ(a.Fs[i].F, b.Fs[i].F);
  EXPECT_EQ(a.inlier, b.inlier);
}

TEST(Diac, BoxContainsSampledIntrinsics) {
  const DiacBounds bounds;
  const Box box = diac_box(bounds);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> f(bounds.f_lo, bounds.f_hi), a(bounds.aspect_lo, bounds.aspect_hi),
      pp(-bounds.pp_radius, bounds.pp_radius), sk(-bounds.skew, bounds.skew);
  for (int i = 0; i < 1000; ++i) {
    const double fx = f(rng);
    Eigen::Matrix3d K;
    K << fx, sk(rng), pp(rng), 0, a(rng) * fx, pp(rng), 0, 0, 1;
    const Eigen::VectorXd x = x_from_omega(K * K.transpose());
    for (int j = 0; j < 5; ++j) {
      EXPECT_GE(x[j], box.lo[j] - 1e-12);
      EXPECT_LE(x[j], box.hi[j] + 1e-12);
    }
  }
}

TEST(Diac, RejectsEmptyBounds) {
  DiacBounds b;
  b.f_hi = 0.5;
  EXPECT_THROW(diac_box(b), InvalidArgument);
}

TEST(Autocalib, ProblemStructure) {
  const FundamentalData d = synth_fundamentals(4, test_K(), 0, 1);
  const NonMinimalProblem p = autocalib_problem(d.Fs);
  EXPECT_EQ(p.nvars, 5);
  EXPECT_EQ(p.groups.size(), 4u);
  ASSERT_EQ(p.constraints.psd.size(), 1u);
  EXPECT_TRUE(p.constraints.box.is_set());
  for (const auto& g : p.groups) {
    double n = 0.0;
    for (const auto& q : g) n += q.coefficient_norm() * q.coefficient_norm();
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
  EXPECT_THROW(autocalib_problem({}), InvalidArgument);
}

TEST(Autocalib, RecoversIntrinsicsFromExactViews) {
  const Eigen::Matrix3d K = test_K();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const FundamentalData d = synth_fundamentals(10, K, 0, seed);
    const RelaxedSolution sol = solve_nonminimal(autocalib_problem(d.Fs));
    ASSERT_EQ(sol.status, SolveStatus::Optimal);
    const Intrinsics in = recover_K(omega_from_x(sol.x));
    EXPECT_LE(std::abs(in.K(0, 0) - K(0, 0)) / K(0, 0), 1e-3);
    EXPECT_LE(std::abs(in.K(1, 1) - K(1, 1)) / K(1, 1), 1e-3);
    EXPECT_LE((in.K.block<2, 1>(0, 2) - K.block<2, 1>(0, 2)).norm(), 1e-3);
  }
}

TEST(RecoverK, IdentityAndRoundTrip) {
  EXPECT_LE((recover_K(Eigen::Matrix3d::Identity()).K - Eigen::Matrix3d::Identity()).norm(), 1e-15);
  Eigen::Matrix3d K;
  K << 800, 0, 320, 0, 800, 240, 0, 0, 1;
  const Eigen::Matrix3d w = K * K.transpose();
  const Intrinsics in = recover_K(w / w(2, 2));
  EXPECT_LE((in.K - K).norm() / K.norm(), 1e-8);
  EXPECT_FALSE(in.clipped);
  Eigen::Matrix3d Ks;
  Ks << 2.0, 0.01, 0.1, 0, 1.7, -0.2, 0, 0, 1;
  const Intrinsics is = recover_K(Ks * Ks.transpose());
  EXPECT_LE((is.K - Ks).norm(), 1e-12);
  EXPECT_NEAR(is.skew, 0.01, 1e-12);
}

TEST(RecoverK, ClipsTinyNegativeEigenvalue) {
  Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
  w(0, 0) = -1e-7;
  w(1, 1) = 1.0;
  w(2, 2) = 1.0;
  const Intrinsics in = recover_K(w);
  EXPECT_TRUE(in.clipped);
  EXPECT_TRUE(in.K.allFinite());
  w(0, 0) = -1e-3;
  EXPECT_THROW(recover_K(w), InvalidArgument);
}

// ---------------------------------------------------------------- NRSfM

TEST(Nrsfm, SingleSquaredDistanceQuartic) {
  const double a = 0.4, b = -0.7;
  const Polynomial k1 = Polynomial::variable(2, 0), k2 = Polynomial::variable(2, 1);
  const Polynomial d = (k1 - a) * (k1 - a) + (k2 - b) * (k2 - b);
  QuarticSystem sys;
  sys.polys = {d * d};
  const RelaxedSolution sol = nrsfm_solve(sys, 1);
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  EXPECT_NEAR(sol.x[0], a, 1e-4);
  EXPECT_NEAR(sol.x[1], b, 1e-4);
}

TEST(Nrsfm, NoisySystemNearPlantedRootAndGridOracle) {
  const QuarticData d = synth_quartics(5, 0.01, 17);
  const RelaxedSolution sol = nrsfm_solve(d.system, 1);
  EXPECT_LE((sol.x - d.root).norm(), 1e-2);
  auto l1 = [&](double x, double y) {
    const Eigen::Vector2d p(x, y);
    double s = 0.0;
    for (const auto& q : d.system.polys) s += std::abs(q.eval(Eigen::VectorXd(p)));
    return s;
  };
  // Coarse grid on [-3, 3]^2, then a 1e-3 grid around the coarse minimizer.
  Eigen::Vector2d best(0, 0);
  double fbest = std::numeric_limits<double>::infinity();
  for (double x = -3; x <= 3 + 1e-12; x += 1e-2)
    for (double y = -3; y <= 3 + 1e-12; y += 1e-2)
      if (const double f = l1(x, y); f < fbest) {
        fbest = f;
        best = {x, y};
      }
  const Eigen::Vector2d c = best;
  for (double x = c[0] - 2e-2; x <= c[0] + 2e-2; x += 1e-3)
    for (double y = c[1] - 2e-2; y <= c[1] + 2e-2; y += 1e-3)
      if (const double f = l1(x, y); f < fbest) {
        fbest = f;
        best = {x, y};
      }
  EXPECT_LE((sol.x - best).norm(), 1e-2);
}

TEST(Nrsfm, HierarchyComparison) {
  int tighter = 0;
  const int n = 10;
  for (int seed = 0; seed < n; ++seed) {
    const QuarticData d = synth_quartics(5, 0.01, 100 + seed);
    const RelaxedSolution s0 = nrsfm_solve(d.system, 0);
    const RelaxedSolution s1 = nrsfm_solve(d.system, 1);
    EXPECT_GE(s1.objective, s0.objective - 1e-6) << seed;
    if (s1.rank_gap < s0.rank_gap) ++tighter;
  }
  EXPECT_GE(tighter, 8);
}

TEST(Nrsfm, ExtractedPointPrecedesPolish) {
  int loose = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const QuarticData d = synth_quartics(5, 0.0, seed);
    const RelaxedSolution sol = nrsfm_solve(d.system, 0);
    ASSERT_EQ(sol.extracted.size(), 2);
    if (sol.relaxation_loose) {
      ++loose;
      const Eigen::VectorXd raw = extract_point(Eigen::MatrixXd(sol.moment_matrix.topLeftCorner(3, 3))).x;
      EXPECT_LE((sol.extracted - raw).norm(), 1e-12);
    } else {
      EXPECT_EQ(sol.extracted, sol.x);
    }
  }
  EXPECT_GT(loose, 0);
}

TEST(Nrsfm, RejectsHighDegree) {
  QuarticSystem sys;
  const Polynomial k1 = Polynomial::variable(2, 0);
  sys.polys = {k1 * k1 * k1 * k1 * k1};
  EXPECT_THROW(nrsfm_solve(sys, 1), DegreeError);
  sys.polys.clear();
  EXPECT_THROW(nrsfm_solve(sys, 1), InvalidArgument);
}

TEST(SynthQuartics, PlantedRootAndDeterminism) {
  const QuarticData a = synth_quartics(5, 0.0, 3);
  const QuarticData b = synth_quartics(5, 0.0, 3);
  ASSERT_EQ(a.system.polys.size(), 5u);
  EXPECT_EQ(a.root, b.root);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.system.polys[i], b.system.polys[i]);
    EXPECT_EQ(a.system.polys[i].degree(), 4);
    EXPECT_NEAR(a.system.polys[i].eval(Eigen::VectorXd(a.root)), 0.0, 1e-12);
  }
}
