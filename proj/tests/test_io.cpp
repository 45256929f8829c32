#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "momenta/io.hpp"

using namespace momenta;
namespace fs = std::filesystem;

namespace {

Polynomial X(int n, int i) { return Polynomial::variable(n, i); }

fs::path tmp(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "momenta_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(IoPolynomial, ParsesDocumentedFormat) {
  const auto j = io::json::parse(R"({"nvars": 2, "terms": [{"exp": [2, 0], "coef": 1.0}, {"exp": [0, 1], "coef": -3}]})");
  const Polynomial p = io::polynomial_from_json(j);
  EXPECT_EQ(p, X(2, 0) * X(2, 0) - 3.0 * X(2, 1));
}

TEST(IoPolynomial, RoundTripIsExact) {
  const Polynomial p = 0.1 * X(3, 0) * X(3, 2) * X(3, 2) - 1.0 / 3.0 * X(3, 1) + 2.5;
  EXPECT_EQ(io::polynomial_from_json(io::json::parse(io::to_json(p).dump())), p);
}

TEST(IoPolynomial, RejectsMalformed) {
  EXPECT_THROW(io::polynomial_from_json(io::json::parse(R"({"terms": []})")), InvalidArgument);
  EXPECT_THROW(io::polynomial_from_json(io::json::parse(R"({"nvars": 2, "terms": [{"exp": [1], "coef": 1}]})")),
               DimensionMismatch);
  EXPECT_THROW(io::polynomial_from_json(io::json::parse(R"({"nvars": 1, "terms": [{"exp": [-1], "coef": 1}]})")),
               InvalidArgument);
  EXPECT_THROW(io::polynomial_from_json(io::json::parse(R"({"nvars": 1, "terms": [{"exp": [1], "coef": "a"}]})")),
               InvalidArgument);
}

TEST(IoBox, InfiniteSidesAreNull) {
  Box b = Box::unbounded(2);
  b.lo[0] = -1.0;
  const io::json j = io::to_json(b);
  EXPECT_TRUE(j["hi"][0].is_null());
  EXPECT_EQ(j["lo"][0].get<double>(), -1.0);
  const Box c = io::box_from_json(j, 2);
  EXPECT_EQ(c.lo, b.lo);
  EXPECT_EQ(c.hi, b.hi);
}

TEST(IoPop, RoundTrip) {
  Pop pop;
  pop.nvars = 2;
  pop.objective = X(2, 0) * X(2, 1);
  pop.inequalities = {-(X(2, 0) * X(2, 0)) + 1.0};
  pop.equalities = {X(2, 0) + X(2, 1) - 1.0};
  int order = -1;
  const Pop back = io::pop_from_json(io::json::parse(io::to_json(pop, 2).dump()), &order);
  EXPECT_EQ(order, 2);
  EXPECT_EQ(back.objective, pop.objective);
  EXPECT_EQ(back.inequalities, pop.inequalities);
  EXPECT_EQ(back.equalities, pop.equalities);
}

TEST(IoNonMinimal, RoundTrip) {
  NonMinimalProblem p;
  p.nvars = 2;
  p.groups = {{X(2, 0) - 1.0, X(2, 1)}, {X(2, 0) * X(2, 1) - 0.5}};
  p.constraints.box = Box{{-1, -2}, {1, 2}};
  p.constraints.psd = {{{X(2, 0) + 2.0, X(2, 1)}, {X(2, 1), Polynomial::constant(2, 1.0)}}};
  p.norm = Norm::L2;
  p.order = 1;
  p.bound = ResidualBound::LocalizingBand;
  p.trace_reg = 0.0;
  const NonMinimalProblem q = io::nonminimal_from_json(io::json::parse(io::to_json(p).dump()));
  EXPECT_EQ(q.groups, p.groups);
  EXPECT_EQ(q.constraints.psd, p.constraints.psd);
  EXPECT_EQ(q.constraints.box.lo, p.constraints.box.lo);
  EXPECT_EQ(q.norm, p.norm);
  EXPECT_EQ(q.order, 1);
  EXPECT_EQ(q.bound, p.bound);
  EXPECT_EQ(q.trace_reg, 0.0);
}

TEST(IoNonMinimal, BarePolynomialIsOneGroup) {
  const auto j = io::json::parse(
      R"({"nvars": 1, "groups": [{"nvars": 1, "terms": [{"exp": [1], "coef": 1}]}], "norm": "linf"})");
  const NonMinimalProblem p = io::nonminimal_from_json(j);
  ASSERT_EQ(p.groups.size(), 1u);
  EXPECT_EQ(p.groups[0].size(), 1u);
  EXPECT_EQ(p.norm, Norm::Linf);
}

TEST(IoNonMinimal, RejectsUnknownNorm) {
  const auto j = io::json::parse(R"({"nvars": 1, "groups": [], "norm": "l3"})");
  EXPECT_THROW(io::nonminimal_from_json(j), InvalidArgument);
}

TEST(IoConsensus, RoundTrip) {
  ConsensusProblem p;
  p.nvars = 1;
  p.groups = {{X(1, 0) - 1.0}, {X(1, 0) - 10.0}};
  p.eps = 0.1;
  p.constraints.box = Box{{-20}, {20}};
  p.big_m = {30.0, 40.0};
  p.node_limit = 77;
  const ConsensusProblem q = io::consensus_from_json(io::json::parse(io::to_json(p).dump()));
  EXPECT_EQ(q.groups, p.groups);
  EXPECT_EQ(q.eps, p.eps);
  EXPECT_EQ(q.big_m, p.big_m);
  EXPECT_EQ(q.node_limit, 77);
  EXPECT_TRUE(std::isinf(q.time_limit));
}

TEST(IoConsensus, ResultCarriesTrace) {
  ConsensusProblem p;
  p.nvars = 1;
  p.groups = {{X(1, 0) - 1.0}, {X(1, 0) - 1.0}, {X(1, 0) - 10.0}};
  p.eps = 0.1;
  p.constraints.box = Box{{-20}, {20}};
  const ConsensusResult r = maximize_consensus(p);
  const io::json j = io::to_json(r);
  EXPECT_EQ(j["status"], "certified");
  EXPECT_EQ(j["inliers"].get<std::vector<bool>>(), r.inliers);
  ASSERT_EQ(j["trace"].size(), r.trace.size());
  EXPECT_EQ(j["trace"].back()["pessimistic"].get<int>(), 2);
}

TEST(IoSolution, LowerBoundNullWhenUnknown) {
  RelaxedSolution s;
  s.x = Eigen::VectorXd::Ones(2);
  const io::json j = io::to_json(s);
  EXPECT_TRUE(j["lower_bound"].is_null());
  EXPECT_EQ(j["x"].get<std::vector<double>>(), (std::vector<double>{1.0, 1.0}));
}

TEST(IoMatrix, AcceptsNestedAndFlat) {
  Eigen::Matrix3d M;
  M << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  EXPECT_EQ(io::matrix3_from_json(io::to_json(M)), M);
  EXPECT_EQ(io::matrix3_from_json(io::json::parse("[1,2,3,4,5,6,7,8,9]")), M);
  EXPECT_THROW(io::matrix3_from_json(io::json::parse("[1,2]")), InvalidArgument);
}

TEST(IoCorrespondences, RoundTripIsExact) {
  const RigidData d = synth_rigid(7, 0.01, 0.0, 3);
  const fs::path p = tmp("corr.csv");
  io::write_correspondences(p, d.corrs);
  const auto back = io::read_correspondences(p);
  ASSERT_EQ(back.size(), d.corrs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].u, d.corrs[i].u);
    EXPECT_EQ(back[i].v, d.corrs[i].v);
  }
}

TEST(IoCorrespondences, HeaderlessAndErrors) {
  const fs::path p = tmp("plain.csv");
  write_text(p, "1,2,3,4,5,6\n\n0.5, 0, 0, 1, 1, 1\n");
  const auto c = io::read_correspondences(p);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1].u, Eigen::Vector3d(0.5, 0, 0));
  write_text(p, "1,2,3,4,5\n");
  EXPECT_THROW(io::read_correspondences(p), InvalidArgument);
  write_text(p, "1,2,3,4,5,6\n1,2,x,4,5,6\n");
  EXPECT_THROW(io::read_correspondences(p), InvalidArgument);
  EXPECT_THROW(io::read_correspondences(tmp("missing.csv")), InvalidArgument);
}

TEST(IoFundamentals, RoundTrip) {
  const FundamentalData d = synth_fundamentals(3, Eigen::Matrix3d::Identity(), 0, 5);
  std::vector<Eigen::Matrix3d> Fs;
  for (const auto& f : d.Fs) Fs.push_back(f.F);
  const fs::path p = tmp("f.json");
  io::write_fundamentals(p, Fs);
  EXPECT_EQ(io::read_fundamentals(p), Fs);
}

TEST(IoQuartics, RoundTrip) {
  QuarticData d = synth_quartics(4, 0.0, 2);
  d.system.box = Box{{-1, -1}, {1, 1}};
  const fs::path p = tmp("q.json");
  io::write_quartics(p, d.system);
  const QuarticSystem back = io::read_quartics(p);
  EXPECT_EQ(back.polys, d.system.polys);
  EXPECT_EQ(back.box.hi, d.system.box.hi);
}

TEST(IoJson, MalformedFileIsInvalidArgument) {
  const fs::path p = tmp("bad.json");
  write_text(p, "{not json");
  EXPECT_THROW(io::read_json(p), InvalidArgument);
  EXPECT_THROW(io::write_json(fs::path("/nonexistent-dir/x.json"), io::json::object()), InvalidArgument);
}

TEST(IoSidecar, RigidFields) {
  const RigidData d = synth_rigid(5, 0.02, 0.4, 8);
  const io::json j = io::sidecar(d);
  EXPECT_EQ(j["kind"], "rigid");
  EXPECT_EQ(j["sigma"].get<double>(), d.sigma);
  EXPECT_EQ(j["inliers"].get<std::vector<bool>>(), d.inlier);
  EXPECT_EQ(io::matrix3_from_json(j["R"]), d.truth.R());
}
