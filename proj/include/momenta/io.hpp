// JSON and CSV file formats for problems, results and synthetic data.
//
// Polynomial: {"nvars": 2, "terms": [{"exp": [2, 0], "coef": 1.0}, ...]}.
// Infinite box sides and lower bounds are written as null.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "momenta/consensus.hpp"
#include "momenta/relax.hpp"
#include "momenta/vision.hpp"

namespace momenta::io {

using json = nlohmann::ordered_json;

json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const json& j);

json to_json(const Box& b);
Box box_from_json(const json& j, int nvars);

json to_json(const ConstraintSet& K);
ConstraintSet constraints_from_json(const json& j, int nvars);

/// {"nvars", "objective", "inequalities", "equalities", "order"}; order is
/// returned separately since it belongs to the solve.
json to_json(const Pop& pop, int order);
Pop pop_from_json(const json& j, int* order = nullptr);

/// {"nvars", "groups": [[poly, ...], ...], "constraints", "norm", "order",
///  "bound", "trace_reg"}.
json to_json(const NonMinimalProblem& p);
NonMinimalProblem nonminimal_from_json(const json& j);

/// {"nvars", "groups", "eps", "constraints", "big_m", "order", "bound",
///  "trace_reg", "node_limit", "time_limit"}.
json to_json(const ConsensusProblem& p);
ConsensusProblem consensus_from_json(const json& j);

json to_json(const RelaxedSolution& s);
json to_json(const ConsensusResult& r);

ResidualBound parse_bound(const std::string& s);

json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);
json to_json(const Eigen::Matrix3d& M);  // [[r0], [r1], [r2]]
Eigen::Matrix3d matrix3_from_json(const json& j);

/// One `ux,uy,uz,vx,vy,vz` row per correspondence; an optional header row is
/// skipped.
std::vector<Correspondence3D> read_correspondences(const std::filesystem::path& path);
void write_correspondences(const std::filesystem::path& path, const std::vector<Correspondence3D>& c);

/// {"fundamentals": [F, ...]} with each F a row-major 3x3 list.
std::vector<Eigen::Matrix3d> read_fundamentals(const std::filesystem::path& path);
void write_fundamentals(const std::filesystem::path& path, const std::vector<Eigen::Matrix3d>& Fs);

/// {"nvars": 2, "polys": [poly, ...], "box": optional}.
QuarticSystem read_quartics(const std::filesystem::path& path);
void write_quartics(const std::filesystem::path& path, const QuarticSystem& sys);

json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; throws InvalidArgument when the
/// file cannot be opened.
void write_json(const std::filesystem::path& path, const json& j);

/// Ground truth written next to generated data.
json sidecar(const RigidData& d);
json sidecar(const FundamentalData& d);
json sidecar(const QuarticData& d);

}  // namespace momenta::io
