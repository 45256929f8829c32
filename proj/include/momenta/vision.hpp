// 3D-vision adapters (rigid registration, Kruppa autocalibration, quartic
// NRSfM systems) and synthetic generators with planted ground truth.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "momenta/consensus.hpp"
#include "momenta/relax.hpp"

namespace momenta {

// ---------------------------------------------------------------- rigid

struct Correspondence3D {
  Eigen::Vector3d u, v;  // v = R u + t
};

inline constexpr double kQuatBias = 1e-3;
inline constexpr double kRigidTraceReg = 1e-3;

/// Quaternion (w, x, y, z) to rotation; exact for unit q.
Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q);
/// Rotation to unit quaternion with w >= 0.
Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& R);
/// Geodesic angle between two rotations, in degrees.
double rotation_error_deg(const Eigen::Matrix3d& A, const Eigen::Matrix3d& B);

struct RigidEstimate {
  Eigen::Vector4d q = Eigen::Vector4d(1, 0, 0, 0);
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Matrix3d R() const { return quat_to_rot(q); }
};

/// R(q) u as three quadratic polynomials in x = (q, t).
std::array<Polynomial, 3> rotate_poly(const Eigen::Vector3d& u);

/// x = (q, t); one 3-vector residual group v - R(q) u - t per correspondence,
/// equality ||q||^2 = 1, bias -kQuatBias q_w selecting q_w >= 0 of +-q.
/// Noiseless minima are sharp, so neither regularizer moves them.
NonMinimalProblem rigid_residuals(const std::vector<Correspondence3D>& corrs, Norm norm = Norm::L2);
/// Makes q_w >= 0 and renormalizes q.
void rigid_canonicalize(Eigen::VectorXd& x);
RigidEstimate rigid_from_x(const Eigen::VectorXd& x);

struct RigidFit {
  RigidEstimate estimate;
  RelaxedSolution solution;
};
RigidFit solve_rigid(const std::vector<Correspondence3D>& corrs, Norm norm = Norm::L2,
                     const SolverOptions& opts = SolverOptions{1e-9, 1e-10, 1e-10});

/// Consensus problem on correspondences with a box on (q, t) derived from
/// the data.
ConsensusProblem rigid_consensus(const std::vector<Correspondence3D>& corrs, double eps);

struct RigidData {
  std::vector<Correspondence3D> corrs;
  RigidEstimate truth;
  std::vector<bool> inlier;
  double sigma = 0.0;  // absolute noise standard deviation
};

/// Points uniform in [-1, 1]^3, t uniform in [-1, 1]^3, R from a normalized
/// Gaussian quaternion, noise sigma = noise * cloud diameter, outliers
/// replace v by uniform points in [-2, 2]^3.
RigidData synth_rigid(int npts, double noise, double outlier_frac, std::uint64_t seed);

// ------------------------------------------------------------ autocalib

struct FundamentalInput {
  Eigen::Matrix3d F;
  Eigen::Matrix3d U, V;
  double r = 0.0, s = 0.0;

  /// Caches the SVD; throws InvalidArgument unless rank(F) = 2.
  static FundamentalInput from_matrix(const Eigen::Matrix3d& F);
};

/// omega(x) for x = (w11, w12, w13, w22, w23), w33 = 1.
Eigen::Matrix3d omega_from_x(const Eigen::VectorXd& x);
Eigen::VectorXd x_from_omega(const Eigen::Matrix3d& omega);
/// omega(x) as a matrix of affine polynomials in 5 variables.
std::vector<std::vector<Polynomial>> omega_poly();

/// The two simplified Kruppa equations (quadratic in x), not normalized.
std::array<Polynomial, 2> kruppa_polys(const FundamentalInput& F);
/// kruppa_polys plus the third cross-multiplied ratio
/// (r^2 v1'w v1)(u1'w u1) - (s^2 v2'w v2)(u2'w u2). The first two alone vanish
/// at omega = I for every F; with the third, PD roots are the true ones.
std::array<Polynomial, 3> kruppa_system(const FundamentalInput& F);

/// Intrinsics box in image-size units: focal f, aspect ratio fy / fx,
/// principal point offset from the image center, absolute skew.
struct DiacBounds {
  double f_lo = 1.0, f_hi = 10.0;
  double aspect_lo = 0.7, aspect_hi = 1.25;
  double pp_radius = 0.25;
  double skew = 0.01;

  void validate() const;
};
/// Interval bounds on x implied by the intrinsics box.
Box diac_box(const DiacBounds& b);

/// Residual groups are kruppa_system, normalized jointly per F; K has
/// omega(x) PSD and the DIAC box.
NonMinimalProblem autocalib_problem(const std::vector<FundamentalInput>& Fs, const DiacBounds& bounds = {},
                                    Norm norm = Norm::L1, int order = 0);
ConsensusProblem autocalib_consensus(const std::vector<FundamentalInput>& Fs, double eps,
                                     const DiacBounds& bounds = {}, int order = 0);

struct Intrinsics {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  double skew = 0.0;
  bool clipped = false;  // omega was slightly indefinite and projected
};
/// Upper-triangular K with omega = K K^T and K(2,2) = 1.
Intrinsics recover_K(const Eigen::Matrix3d& omega);

struct FundamentalData {
  std::vector<FundamentalInput> Fs;
  Eigen::Matrix3d K;
  Eigen::Matrix3d omega;  // K K^T with omega(2,2) = 1
  std::vector<bool> inlier;
};

/// `count` fundamental matrices from random relative poses; the first
/// count - outliers share K, the rest use per-matrix random intrinsics and
/// are resampled until their normalized residual at omega* is >= 1e-2.
/// The outlier positions are shuffled deterministically.
FundamentalData synth_fundamentals(int count, const Eigen::Matrix3d& K, int outliers, std::uint64_t seed);

// ---------------------------------------------------------------- NRSfM

struct QuarticSystem {
  std::vector<Polynomial> polys;  // in (k1, k2)
  Box box;                        // optional search box
  void validate() const;
};

/// Non-minimal L1 solve; for s >= 1 residuals use the localizing band.
RelaxedSolution nrsfm_solve(const QuarticSystem& sys, int s, const SolverOptions& opts = {});

struct QuarticData {
  QuarticSystem system;
  Eigen::Vector2d root;
};

/// `count` quartics with N(0, 1) coefficients sharing a root drawn from
/// U(-1, 1)^2; relative coefficient noise `noise` is added afterwards.
QuarticData synth_quartics(int count, double noise, std::uint64_t seed);

}  // namespace momenta
