#include "momenta/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace momenta::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
auto guard(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed ") + what + ": " + e.what());
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or(const json& j, double null_value) { return j.is_null() ? null_value : j.get<double>(); }

json poly_list(const std::vector<Polynomial>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(to_json(p));
  return a;
}

std::vector<Polynomial> poly_list_from(const json& j, int nvars) {
  std::vector<Polynomial> out;
  for (const auto& e : j) {
    out.push_back(polynomial_from_json(e));
    if (out.back().nvars() != nvars) throw DimensionMismatch("polynomial has wrong number of variables");
  }
  return out;
}

json groups_json(const std::vector<std::vector<Polynomial>>& groups) {
  json a = json::array();
  for (const auto& g : groups) a.push_back(poly_list(g));
  return a;
}

std::vector<std::vector<Polynomial>> groups_from(const json& j, int nvars) {
  std::vector<std::vector<Polynomial>> out;
  for (const auto& g : j) {
    // A bare polynomial is a one-element group.
    out.push_back(g.is_object() ? std::vector<Polynomial>{polynomial_from_json(g)} : poly_list_from(g, nvars));
    for (const auto& p : out.back()) {
      if (p.nvars() != nvars) throw DimensionMismatch("residual has wrong number of variables");
    }
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

json to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [m, c] : p.terms()) terms.push_back({{"exp", m.exponents()}, {"coef", c}});
  return {{"nvars", p.nvars()}, {"terms", terms}};
}

Polynomial polynomial_from_json(const json& j) {
  return guard("polynomial", [&] {
    const int n = j.at("nvars").get<int>();
    if (n < 1) throw InvalidArgument("polynomial needs nvars >= 1");
    Polynomial p(n);
    for (const auto& t : j.at("terms")) {
      const auto e = t.at("exp").get<std::vector<int>>();
      if (static_cast<int>(e.size()) != n) throw DimensionMismatch("exponent length differs from nvars");
      for (int k : e) {
        if (k < 0) throw InvalidArgument("negative exponent");
      }
      p.add_term(Monomial(e), t.at("coef").get<double>());
    }
    return p;
  });
}

json to_json(const Box& b) {
  json lo = json::array(), hi = json::array();
  for (double v : b.lo) lo.push_back(finite_or_null(v));
  for (double v : b.hi) hi.push_back(finite_or_null(v));
  return {{"lo", lo}, {"hi", hi}};
}

Box box_from_json(const json& j, int nvars) {
  return guard("box", [&] {
    Box b;
    for (const auto& v : j.at("lo")) b.lo.push_back(number_or(v, -kInf));
    for (const auto& v : j.at("hi")) b.hi.push_back(number_or(v, kInf));
    b.validate(nvars);
    return b;
  });
}

json to_json(const ConstraintSet& K) {
  json psd = json::array();
  for (const auto& P : K.psd) {
    json rows = json::array();
    for (const auto& row : P) rows.push_back(poly_list(row));
    psd.push_back(rows);
  }
  json j = {{"equalities", poly_list(K.equalities)}, {"inequalities", poly_list(K.inequalities)}, {"psd", psd}};
  if (K.box.is_set()) j["box"] = to_json(K.box);
  return j;
}

ConstraintSet constraints_from_json(const json& j, int nvars) {
  return guard("constraints", [&] {
    ConstraintSet K;
    if (j.is_null()) return K;
    if (j.contains("equalities")) K.equalities = poly_list_from(j["equalities"], nvars);
    if (j.contains("inequalities")) K.inequalities = poly_list_from(j["inequalities"], nvars);
    if (j.contains("psd")) {
      for (const auto& P : j["psd"]) {
        std::vector<std::vector<Polynomial>> rows;
        for (const auto& row : P) rows.push_back(poly_list_from(row, nvars));
        K.psd.push_back(rows);
      }
    }
    if (j.contains("box") && !j["box"].is_null()) K.box = box_from_json(j["box"], nvars);
    K.validate(nvars);
    return K;
  });
}

json to_json(const Pop& pop, int order) {
  return {{"nvars", pop.nvars},
          {"objective", to_json(pop.objective)},
          {"inequalities", poly_list(pop.inequalities)},
          {"equalities", poly_list(pop.equalities)},
          {"order", order}};
}

Pop pop_from_json(const json& j, int* order) {
  return guard("POP", [&] {
    Pop pop;
    pop.nvars = j.at("nvars").get<int>();
    pop.objective = polynomial_from_json(j.at("objective"));
    if (j.contains("inequalities")) pop.inequalities = poly_list_from(j["inequalities"], pop.nvars);
    if (j.contains("equalities")) pop.equalities = poly_list_from(j["equalities"], pop.nvars);
    if (order) *order = j.value("order", 0);
    pop.validate();
    return pop;
  });
}

ResidualBound parse_bound(const std::string& s) {
  if (s == "scalar") return ResidualBound::Scalar;
  if (s == "trace") return ResidualBound::Trace;
  if (s == "band") return ResidualBound::LocalizingBand;
  throw InvalidArgument("unknown residual bound '" + s + "' (expected scalar, trace or band)");
}

json to_json(const NonMinimalProblem& p) {
  return {{"nvars", p.nvars},
          {"groups", groups_json(p.groups)},
          {"constraints", to_json(p.constraints)},
          {"norm", to_string(p.norm)},
          {"order", p.order},
          {"bound", to_string(p.bound)},
          {"trace_reg", p.trace_reg}};
}

NonMinimalProblem nonminimal_from_json(const json& j) {
  return guard("non-minimal problem", [&] {
    NonMinimalProblem p;
    p.nvars = j.at("nvars").get<int>();
    p.groups = groups_from(j.at("groups"), p.nvars);
    if (j.contains("constraints")) p.constraints = constraints_from_json(j["constraints"], p.nvars);
    p.norm = parse_norm(j.value("norm", std::string("l1")));
    p.order = j.value("order", 0);
    p.bound = parse_bound(j.value("bound", std::string("scalar")));
    p.trace_reg = j.value("trace_reg", p.trace_reg);
    p.validate();
    return p;
  });
}

json to_json(const ConsensusProblem& p) {
  return {{"nvars", p.nvars},
          {"groups", groups_json(p.groups)},
          {"eps", p.eps},
          {"constraints", to_json(p.constraints)},
          {"big_m", p.big_m},
          {"order", p.order},
          {"bound", to_string(p.bound)},
          {"trace_reg", p.trace_reg},
          {"node_limit", p.node_limit},
          {"time_limit", finite_or_null(p.time_limit)}};
}

ConsensusProblem consensus_from_json(const json& j) {
  return guard("consensus problem", [&] {
    ConsensusProblem p;
    p.nvars = j.at("nvars").get<int>();
    p.groups = groups_from(j.at("groups"), p.nvars);
    p.eps = j.at("eps").get<double>();
    if (j.contains("constraints")) p.constraints = constraints_from_json(j["constraints"], p.nvars);
    if (j.contains("big_m")) p.big_m = j["big_m"].get<std::vector<double>>();
    p.order = j.value("order", 0);
    p.bound = parse_bound(j.value("bound", std::string("scalar")));
    p.trace_reg = j.value("trace_reg", p.trace_reg);
    p.node_limit = j.value("node_limit", p.node_limit);
    if (j.contains("time_limit")) p.time_limit = number_or(j["time_limit"], kInf);
    p.validate();
    return p;
  });
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const Eigen::Matrix3d& M) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({M(i, 0), M(i, 1), M(i, 2)});
  return rows;
}

Eigen::Matrix3d matrix3_from_json(const json& j) {
  return guard("3x3 matrix", [&] {
    Eigen::Matrix3d M;
    if (j.size() == 9) {
      for (int k = 0; k < 9; ++k) M(k / 3, k % 3) = j.at(k).get<double>();
      return M;
    }
    if (j.size() != 3) throw InvalidArgument("3x3 matrix needs 3 rows or 9 entries");
    for (int i = 0; i < 3; ++i) {
      if (j.at(i).size() != 3) throw InvalidArgument("3x3 matrix rows need 3 entries");
      for (int k = 0; k < 3; ++k) M(i, k) = j.at(i).at(k).get<double>();
    }
    return M;
  });
}

json to_json(const RelaxedSolution& s) {
  return {{"status", to_string(s.status)},
          {"x", to_json(s.x)},
          {"extracted", to_json(s.extracted)},
          {"objective", s.objective},
          {"lower_bound", finite_or_null(s.lower_bound)},
          {"rank_gap", s.rank_gap},
          {"relaxation_loose", s.relaxation_loose},
          {"residuals", s.residuals},
          {"iterations", s.iterations},
          {"seconds", s.seconds}};
}

json to_json(const ConsensusResult& r) {
  json trace = json::array();
  for (const auto& t : r.trace) {
    trace.push_back({{"iteration", t.iteration},
                     {"pessimistic", t.pessimistic},
                     {"optimistic", t.optimistic},
                     {"open_nodes", t.open_nodes},
                     {"seconds", t.seconds}});
  }
  return {{"status", to_string(r.status)},
          {"certified", r.certified},
          {"inlier_count", r.inlier_count},
          {"gap", r.gap},
          {"inliers", r.inliers},
          {"x", to_json(r.x)},
          {"nodes", r.nodes},
          {"seconds", r.seconds},
          {"trace", trace}};
}

std::vector<Correspondence3D> read_correspondences(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<Correspondence3D> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric && lineno == 1 && out.empty()) continue;  // header
    if (!numeric || v.size() != 6) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": expected six numbers");
    }
    out.push_back({Eigen::Vector3d(v[0], v[1], v[2]), Eigen::Vector3d(v[3], v[4], v[5])});
  }
  return out;
}

void write_correspondences(const std::filesystem::path& path, const std::vector<Correspondence3D>& c) {
  std::ofstream out = open_out(path);
  out << "ux,uy,uz,vx,vy,vz\n";
  char buf[160];
  for (const auto& p : c) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.u[0], p.u[1], p.u[2], p.v[0], p.v[1],
                  p.v[2]);
    out << buf;
  }
}

std::vector<Eigen::Matrix3d> read_fundamentals(const std::filesystem::path& path) {
  const json j = read_json(path);
  return guard("fundamental-matrix file", [&] {
    std::vector<Eigen::Matrix3d> out;
    const json& list = j.is_array() ? j : j.at("fundamentals");
    for (const auto& F : list) out.push_back(matrix3_from_json(F));
    return out;
  });
}

void write_fundamentals(const std::filesystem::path& path, const std::vector<Eigen::Matrix3d>& Fs) {
  json list = json::array();
  for (const auto& F : Fs) list.push_back(to_json(F));
  write_json(path, {{"fundamentals", list}});
}

QuarticSystem read_quartics(const std::filesystem::path& path) {
  const json j = read_json(path);
  return guard("quartic system", [&] {
    QuarticSystem sys;
    const int n = j.value("nvars", 2);
    sys.polys = poly_list_from(j.at("polys"), n);
    if (j.contains("box") && !j["box"].is_null()) sys.box = box_from_json(j["box"], n);
    sys.validate();
    return sys;
  });
}

void write_quartics(const std::filesystem::path& path, const QuarticSystem& sys) {
  json j = {{"nvars", 2}, {"polys", poly_list(sys.polys)}};
  if (sys.box.is_set()) j["box"] = to_json(sys.box);
  write_json(path, j);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return guard("JSON file", [&] { return json::parse(in); });
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw InvalidArgument("failed writing '" + path.string() + "'");
}

json sidecar(const RigidData& d) {
  return {{"kind", "rigid"},
          {"q", to_json(Eigen::VectorXd(d.truth.q))},
          {"t", to_json(Eigen::VectorXd(d.truth.t))},
          {"R", to_json(d.truth.R())},
          {"inliers", d.inlier},
          {"sigma", d.sigma}};
}

json sidecar(const FundamentalData& d) {
  return {{"kind", "autocalib"}, {"K", to_json(d.K)}, {"omega", to_json(d.omega)}, {"inliers", d.inlier}};
}

json sidecar(const QuarticData& d) { return {{"kind", "nrsfm"}, {"root", to_json(Eigen::VectorXd(d.root))}}; }

}  // namespace momenta::io
