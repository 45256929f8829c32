#include "momenta/vision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "momenta/error.hpp"
#include "momenta/log.hpp"

namespace momenta {

namespace {

constexpr int kRigidVars = 7;

Polynomial pvar(int n, int j) { return Polynomial::variable(n, j); }

Eigen::Vector4d random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q[i] = g(rng);
  } while (q.norm() < 1e-8);
  q.normalize();
  if (q[0] < 0) q = -q;
  return q;
}

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& t) {
  Eigen::Matrix3d S;
  S << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  return S;
}

// Index into x = (w11, w12, w13, w22, w23) for omega(i, j); -1 is w33 = 1.
int omega_slot(int i, int j) {
  if (i > j) std::swap(i, j);
  static constexpr int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, -1}};
  return table[i][j];
}

// a^T omega(x) b as an affine polynomial in 5 variables.
Polynomial bilinear(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  Polynomial p(5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double c = a[i] * b[j];
      if (c == 0.0) continue;
      const int k = omega_slot(i, j);
      if (k < 0)
        p.add_term(Monomial::constant(5), c);
      else
        p.add_term(Monomial::variable(5, k), c);
    }
  }
  return p;
}

double joint_norm(const std::array<Polynomial, 3>& ps) {
  double n = 0.0;
  for (const auto& p : ps) n += p.coefficient_norm() * p.coefficient_norm();
  return std::sqrt(n);
}

double kruppa_residual(const FundamentalInput& F, const Eigen::Matrix3d& omega) {
  const auto ps = kruppa_system(F);
  const Eigen::VectorXd x = x_from_omega(omega);
  double r = 0.0;
  for (const auto& p : ps) r = std::max(r, std::abs(p.eval(x)));
  return r / joint_norm(ps);
}

Eigen::Matrix3d random_intrinsics(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(1.0, 5.0), a(0.8, 1.2), pp(-0.2, 0.2);
  const double fx = f(rng);
  const double ar = a(rng);
  const double u = pp(rng);
  const double v = pp(rng);
  Eigen::Matrix3d K;
  K << fx, 0, u, 0, ar * fx, v, 0, 0, 1;
  return K;
}

Eigen::Matrix3d random_fundamental(const Eigen::Matrix3d& K, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const Eigen::Matrix3d R = quat_to_rot(random_quat(rng));
  Eigen::Vector3d t(g(rng), g(rng), g(rng));
  t.normalize();
  const Eigen::Matrix3d Kinv = K.inverse();
  Eigen::Matrix3d F = Kinv.transpose() * cross_matrix(t) * R * Kinv;
  return F / F.norm();
}

}  // namespace

// ---------------------------------------------------------------- rigid

Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d R;
  R << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return R;
}

Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& R) {
  const Eigen::Quaterniond qq(R);
  Eigen::Vector4d q(qq.w(), qq.x(), qq.y(), qq.z());
  q.normalize();
  if (q[0] < 0) q = -q;
  return q;
}

double rotation_error_deg(const Eigen::Matrix3d& A, const Eigen::Matrix3d& B) {
  const double d = std::min(1.0, (A - B).norm() / (2.0 * std::sqrt(2.0)));
  return 2.0 * std::asin(d) * 180.0 / M_PI;
}

std::array<Polynomial, 3> rotate_poly(const Eigen::Vector3d& u) {
  const int n = kRigidVars;
  const Polynomial w = pvar(n, 0), x = pvar(n, 1), y = pvar(n, 2), z = pvar(n, 3);
  const Polynomial R[3][3] = {
      {w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)},
      {2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x)},
      {2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z}};
  std::array<Polynomial, 3> out{Polynomial(n), Polynomial(n), Polynomial(n)};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i] += u[j] * R[i][j];
  return out;
}

NonMinimalProblem rigid_residuals(const std::vector<Correspondence3D>& corrs, Norm norm) {
  if (corrs.size() < 3) throw InvalidArgument("rigid registration needs at least 3 correspondences");
  NonMinimalProblem prob;
  prob.nvars = kRigidVars;
  prob.norm = norm;
  for (const auto& c : corrs) {
    if (!c.u.allFinite() || !c.v.allFinite()) throw InvalidArgument("correspondence has non-finite entries");
    const auto Ru = rotate_poly(c.u);
    std::vector<Polynomial> g;
    for (int i = 0; i < 3; ++i) g.push_back(Polynomial::constant(kRigidVars, c.v[i]) - Ru[i] - pvar(kRigidVars, 4 + i));
    prob.groups.push_back(std::move(g));
  }
  Polynomial qq = Polynomial::constant(kRigidVars, -1.0);
  for (int i = 0; i < 4; ++i) qq += pvar(kRigidVars, i) * pvar(kRigidVars, i);
  prob.constraints.equalities.push_back(qq);
  prob.trace_reg = kRigidTraceReg;
  prob.bias = -kQuatBias * pvar(kRigidVars, 0);
  return prob;
}

void rigid_canonicalize(Eigen::VectorXd& x) {
  if (x.size() != kRigidVars) return;
  Eigen::Vector4d q = x.head<4>();
  const double n = q.norm();
  if (n < 1e-12) return;
  q /= n;
  if (q[0] < 0) q = -q;
  x.head<4>() = q;
}

RigidEstimate rigid_from_x(const Eigen::VectorXd& x) {
  if (x.size() != kRigidVars) throw DimensionMismatch("rigid estimate needs 7 values");
  Eigen::VectorXd c = x;
  rigid_canonicalize(c);
  RigidEstimate e;
  e.q = c.head<4>();
  e.t = c.tail<3>();
  return e;
}

RigidFit solve_rigid(const std::vector<Correspondence3D>& corrs, Norm norm, const SolverOptions& opts) {
  RigidFit fit;
  fit.solution = solve_nonminimal(rigid_residuals(corrs, norm), opts, rigid_canonicalize);
  if (fit.solution.x.size() == kRigidVars) fit.estimate = rigid_from_x(fit.solution.x);
  return fit;
}

ConsensusProblem rigid_consensus(const std::vector<Correspondence3D>& corrs, double eps) {
  const NonMinimalProblem nm = rigid_residuals(corrs, Norm::L2);
  ConsensusProblem prob;
  prob.nvars = kRigidVars;
  prob.groups = nm.groups;
  prob.constraints = nm.constraints;
  prob.trace_reg = nm.trace_reg;
  prob.bias = nm.bias;
  prob.eps = eps;
  // |t_i| <= |v_i| + |R u|_inf <= max |v_i| + max ||u||.
  Eigen::Vector3d vmax = Eigen::Vector3d::Zero();
  double umax = 0.0;
  for (const auto& c : corrs) {
    vmax = vmax.cwiseMax(c.v.cwiseAbs());
    umax = std::max(umax, c.u.norm());
  }
  Box box = Box::unbounded(kRigidVars);
  for (int i = 0; i < 4; ++i) {
    box.lo[i] = -1.0;
    box.hi[i] = 1.0;
  }
  for (int i = 0; i < 3; ++i) {
    box.lo[4 + i] = -(vmax[i] + umax + eps);
    box.hi[4 + i] = vmax[i] + umax + eps;
  }
  prob.constraints.box = box;
  prob.hook = rigid_canonicalize;
  return prob;
}

RigidData synth_rigid(int npts, double noise, double outlier_frac, std::uint64_t seed) {
  if (npts < 3) throw InvalidArgument("synth_rigid needs at least 3 points");
  if (!(outlier_frac >= 0.0 && outlier_frac < 1.0)) throw InvalidArgument("outlier fraction must be in [0, 1)");
  if (!(noise >= 0.0)) throw InvalidArgument("noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss;

  RigidData d;
  d.truth.q = random_quat(rng);
  for (int i = 0; i < 3; ++i) d.truth.t[i] = unit(rng);
  const Eigen::Matrix3d R = d.truth.R();

  std::vector<Eigen::Vector3d> us(npts);
  for (auto& u : us)
    for (int i = 0; i < 3; ++i) u[i] = unit(rng);
  double diameter = 0.0;
  for (int a = 0; a < npts; ++a)
    for (int b = a + 1; b < npts; ++b) diameter = std::max(diameter, (us[a] - us[b]).norm());
  d.sigma = noise * diameter;

  const int nout = static_cast<int>(std::ceil(outlier_frac * npts - 1e-9));
  std::vector<int> perm(npts);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  d.inlier.assign(npts, true);
  for (int k = 0; k < nout; ++k) d.inlier[perm[k]] = false;

  d.corrs.resize(npts);
  for (int a = 0; a < npts; ++a) {
    auto& c = d.corrs[a];
    c.u = us[a];
    if (d.inlier[a]) {
      c.v = R * c.u + d.truth.t;
      for (int i = 0; i < 3; ++i) c.v[i] += d.sigma * gauss(rng);
    } else {
      for (int i = 0; i < 3; ++i) c.v[i] = 2.0 * unit(rng);
    }
  }
  return d;
}

// ------------------------------------------------------------ autocalib

FundamentalInput FundamentalInput::from_matrix(const Eigen::Matrix3d& F) {
  if (!F.allFinite()) throw InvalidArgument("fundamental matrix has non-finite entries");
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] || sv[2] > 1e-8 * sv[0])
    throw InvalidArgument("fundamental matrix must have rank 2");
  FundamentalInput out;
  out.F = F;
  out.U = svd.matrixU();
  out.V = svd.matrixV();
  out.r = sv[0];
  out.s = sv[1];
  return out;
}

Eigen::Matrix3d omega_from_x(const Eigen::VectorXd& x) {
  if (x.size() != 5) throw DimensionMismatch("omega parameterization has 5 entries");
  Eigen::Matrix3d w;
  w << x[0], x[1], x[2], x[1], x[3], x[4], x[2], x[4], 1.0;
  return w;
}

Eigen::VectorXd x_from_omega(const Eigen::Matrix3d& omega) {
  Eigen::VectorXd x(5);
  x << omega(0, 0), omega(0, 1), omega(0, 2), omega(1, 1), omega(1, 2);
  return x;
}

std::vector<std::vector<Polynomial>> omega_poly() {
  std::vector<std::vector<Polynomial>> P(3, std::vector<Polynomial>(3, Polynomial(5)));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int k = omega_slot(i, j);
      P[i][j] = k < 0 ? Polynomial::constant(5, 1.0) : pvar(5, k);
    }
  }
  return P;
}

std::array<Polynomial, 2> kruppa_polys(const FundamentalInput& F) {
  const Eigen::Vector3d u1 = F.U.col(0), u2 = F.U.col(1);
  const Eigen::Vector3d v1 = F.V.col(0), v2 = F.V.col(1);
  const double r = F.r, s = F.s;
  const Polynomial v11 = bilinear(v1, v1), v12 = bilinear(v1, v2), v22 = bilinear(v2, v2);
  const Polynomial u11 = bilinear(u1, u1), u12 = bilinear(u1, u2), u22 = bilinear(u2, u2);
  return {(r * s) * v12 * u22 + (r * r) * v11 * u12, (r * s) * v12 * u11 + (s * s) * v22 * u12};
}

std::array<Polynomial, 3> kruppa_system(const FundamentalInput& F) {
  auto [p1, p2] = kruppa_polys(F);
  const Eigen::Vector3d u1 = F.U.col(0), u2 = F.U.col(1);
  const Eigen::Vector3d v1 = F.V.col(0), v2 = F.V.col(1);
  const Polynomial p3 =
      (F.r * F.r) * bilinear(v1, v1) * bilinear(u1, u1) - (F.s * F.s) * bilinear(v2, v2) * bilinear(u2, u2);
  return {p1, p2, p3};
}

void DiacBounds::validate() const {
  if (!(f_lo > 0.0 && f_hi >= f_lo)) throw InvalidArgument("focal bounds must satisfy 0 < lo <= hi");
  if (!(aspect_lo > 0.0 && aspect_hi >= aspect_lo)) throw InvalidArgument("aspect bounds must satisfy 0 < lo <= hi");
  if (!(pp_radius >= 0.0) || !(skew >= 0.0)) throw InvalidArgument("principal point and skew bounds must be >= 0");
}

Box diac_box(const DiacBounds& b) {
  b.validate();
  const double r = b.pp_radius, k = b.skew;
  Box box = Box::unbounded(5);
  // w11 = f^2 + k^2 + u^2, w12 = k a f + u v, w13 = u, w22 = a^2 f^2 + v^2, w23 = v
  box.lo = {b.f_lo * b.f_lo, -(k * b.aspect_hi * b.f_hi + r * r), -r, b.aspect_lo * b.aspect_lo * b.f_lo * b.f_lo, -r};
  box.hi = {b.f_hi * b.f_hi + k * k + r * r, k * b.aspect_hi * b.f_hi + r * r, r,
            b.aspect_hi * b.aspect_hi * b.f_hi * b.f_hi + r * r, r};
  return box;
}

NonMinimalProblem autocalib_problem(const std::vector<FundamentalInput>& Fs, const DiacBounds& bounds, Norm norm,
                                    int order) {
  if (Fs.empty()) throw InvalidArgument("autocalibration needs at least one fundamental matrix");
  NonMinimalProblem prob;
  prob.nvars = 5;
  prob.norm = norm;
  prob.order = order;
  for (const auto& F : Fs) {
    const auto ps = kruppa_system(F);
    const double n = joint_norm(ps);
    if (!(n > 0.0)) throw InvalidArgument("degenerate fundamental matrix gives vanishing Kruppa equations");
    prob.groups.push_back({ps[0] * (1.0 / n), ps[1] * (1.0 / n), ps[2] * (1.0 / n)});
  }
  prob.constraints.psd.push_back(omega_poly());
  prob.constraints.box = diac_box(bounds);
  return prob;
}

ConsensusProblem autocalib_consensus(const std::vector<FundamentalInput>& Fs, double eps, const DiacBounds& bounds,
                                     int order) {
  const NonMinimalProblem nm = autocalib_problem(Fs, bounds, Norm::L1, order);
  ConsensusProblem prob;
  prob.nvars = 5;
  prob.groups = nm.groups;
  prob.constraints = nm.constraints;
  prob.eps = eps;
  prob.order = order;
  return prob;
}

Intrinsics recover_K(const Eigen::Matrix3d& omega_in) {
  if (!omega_in.allFinite()) throw InvalidArgument("omega has non-finite entries");
  if (!(omega_in(2, 2) > 0.0)) throw InvalidArgument("omega(3,3) must be positive");
  Eigen::Matrix3d w = 0.5 * (omega_in + omega_in.transpose()) / omega_in(2, 2);
  Intrinsics out;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(w);
  const double lmin = es.eigenvalues()[0];
  if (lmin < -1e-6) throw InvalidArgument("omega is indefinite; no intrinsics recoverable");
  if (lmin < 0.0) {
    MOMENTA_LOG_WARN("omega slightly indefinite (%.3g); clipping eigenvalues", lmin);
    w = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    w /= w(2, 2);
    out.clipped = true;
  }
  const double u = w(0, 2), v = w(1, 2);
  const double c = std::sqrt(std::max(0.0, w(1, 1) - v * v));
  const double b = c > 0.0 ? (w(0, 1) - u * v) / c : 0.0;
  const double a = std::sqrt(std::max(0.0, w(0, 0) - u * u - b * b));
  out.K << a, b, u, 0, c, v, 0, 0, 1;
  out.skew = b;
  return out;
}

FundamentalData synth_fundamentals(int count, const Eigen::Matrix3d& K, int outliers, std::uint64_t seed) {
  if (count < 2) throw InvalidArgument("synth_fundamentals needs at least 2 matrices");
  if (outliers < 0 || outliers > count) throw InvalidArgument("outlier count out of range");
  if (std::abs(K(2, 2)) < 1e-12 || K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0)
    throw InvalidArgument("K must be upper triangular with nonzero K(3,3)");
  std::mt19937_64 rng(seed);
  FundamentalData d;
  d.K = K / K(2, 2);
  d.omega = d.K * d.K.transpose();
  d.omega /= d.omega(2, 2);

  std::vector<int> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  d.inlier.assign(count, true);
  for (int k = 0; k < outliers; ++k) d.inlier[perm[k]] = false;

  for (int i = 0; i < count; ++i) {
    if (d.inlier[i]) {
      d.Fs.push_back(FundamentalInput::from_matrix(random_fundamental(d.K, rng)));
      continue;
    }
    for (;;) {
      const FundamentalInput F = FundamentalInput::from_matrix(random_fundamental(random_intrinsics(rng), rng));
      if (kruppa_residual(F, d.omega) >= 1e-2) {
        d.Fs.push_back(F);
        break;
      }
    }
  }
  return d;
}

// ---------------------------------------------------------------- NRSfM

void QuarticSystem::validate() const {
  if (polys.empty()) throw InvalidArgument("quartic system needs at least one polynomial");
  for (const auto& p : polys) {
    if (p.nvars() != 2) throw DimensionMismatch("quartic system polynomials must have 2 variables");
    if (p.degree() > 4) throw DegreeError("quartic system polynomial has degree > 4");
  }
  if (box.is_set()) box.validate(2);
}

RelaxedSolution nrsfm_solve(const QuarticSystem& sys, int s, const SolverOptions& opts) {
  sys.validate();
  NonMinimalProblem prob;
  prob.nvars = 2;
  prob.norm = Norm::L1;
  prob.order = s;
  prob.bound = s > 0 ? ResidualBound::LocalizingBand : ResidualBound::Scalar;
  // Quartic minima can be flat; a trace term would shift them by ~reg^(1/3).
  prob.trace_reg = 0.0;
  for (const auto& p : sys.polys) prob.groups.push_back({p});
  if (sys.box.is_set()) prob.constraints.box = sys.box;
  return solve_nonminimal(prob, opts);
}

QuarticData synth_quartics(int count, double noise, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("synth_quartics needs at least one polynomial");
  if (!(noise >= 0.0)) throw InvalidArgument("noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss;
  QuarticData d;
  d.root = Eigen::Vector2d(unit(rng), unit(rng));
  const MonomialBasis basis(2, 4);
  for (int k = 0; k < count; ++k) {
    Polynomial p(2);
    for (const auto& m : basis.monomials()) p.add_term(m, gauss(rng));
    p.add_term(Monomial::constant(2), -p.eval(Eigen::VectorXd(d.root)));
    if (noise > 0.0) {
      Polynomial q(2);
      for (const auto& [m, c] : p.terms()) q.add_term(m, c * (1.0 + noise * gauss(rng)));
      p = q;
    }
    d.system.polys.push_back(p);
  }
  return d;
}

}  // namespace momenta
