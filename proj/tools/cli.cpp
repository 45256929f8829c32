#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

namespace momenta::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct Options {
  std::string input, truth, out, csv, kind, task;
  int order = -1;
  std::string norm;
  std::string eps;
  double big_m = 0.0;
  std::string box;
  long node_limit = 5000;
  double time_limit = -1.0;
  std::uint64_t seed = 0;
  int trials = 1;
  bool minimal = false;
  int n = 0;
  std::string noise;
  int inliers = 10;
  int outliers = 0;
};

json config_json(const std::string& cmd, const Options& o) {
  return {{"command", cmd},
          {"input", o.input},
          {"truth", o.truth},
          {"kind", o.kind},
          {"task", o.task},
          {"order", o.order},
          {"norm", o.norm},
          {"eps", o.eps},
          {"big_m", o.big_m},
          {"box", o.box},
          {"node_limit", o.node_limit},
          {"time_limit", o.time_limit},
          {"seed", o.seed},
          {"trials", o.trials},
          {"minimal", o.minimal},
          {"n", o.n},
          {"noise", o.noise},
          {"inliers", o.inliers},
          {"outliers", o.outliers},
          {"out", o.out}};
}

double parse_number(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("bad ") + what + " '" + s + "'");
  }
}

Box parse_box(const std::string& text, int nvars) {
  std::vector<std::pair<double, double>> pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto c = item.find(':');
    if (c == std::string::npos) throw InvalidArgument("--box expects lo:hi[,lo:hi...]");
    pairs.emplace_back(parse_number(item.substr(0, c), "box bound"), parse_number(item.substr(c + 1), "box bound"));
  }
  if (pairs.size() == 1) pairs.assign(nvars, pairs[0]);
  if (static_cast<int>(pairs.size()) != nvars) throw InvalidArgument("--box needs one interval or one per variable");
  Box b;
  for (const auto& [lo, hi] : pairs) {
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  b.validate(nvars);
  return b;
}

std::optional<double> explicit_eps(const Options& o) {
  if (o.eps.empty() || o.eps == "auto") return std::nullopt;
  const double e = parse_number(o.eps, "--eps");
  if (!(e > 0)) throw InvalidArgument("--eps must be positive");
  return e;
}

// 3 sigma for "auto", the given value otherwise.
double resolve_eps(const Options& o, std::optional<double> sigma) {
  if (auto e = explicit_eps(o)) return *e;
  if (o.eps == "auto") {
    if (sigma && *sigma > 0) return 3.0 * *sigma;
    throw InvalidArgument("--eps auto needs a noise sigma from a generator sidecar");
  }
  throw InvalidArgument("--eps is required");
}

json load_truth(const Options& o) {
  if (!o.truth.empty()) return io::read_json(o.truth);
  if (!o.input.empty()) {
    const fs::path sib = fs::path(o.input).parent_path() / "truth.json";
    if (fs::exists(sib)) return io::read_json(sib);
  }
  return nullptr;
}

std::optional<double> truth_sigma(const json& truth) {
  if (truth.is_object() && truth.contains("sigma")) return truth["sigma"].get<double>();
  return std::nullopt;
}

void apply_limits(ConsensusProblem& p, const Options& o) {
  if (o.big_m > 0) p.big_m.assign(p.groups.size(), o.big_m);
  p.node_limit = o.node_limit;
  if (o.time_limit > 0) p.time_limit = o.time_limit;
  if (o.order >= 0) p.order = o.order;
  if (!o.box.empty()) p.constraints.box = parse_box(o.box, p.nvars);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path results_path(const Options& o, const std::string& cmd) {
  return o.out.empty() ? fs::path(cmd + "_results.json") : fs::path(o.out);
}

fs::path csv_path(const Options& o, const fs::path& results) {
  if (!o.csv.empty()) return o.csv;
  fs::path p = results;
  return p.replace_extension(".csv");
}

void write_results(const Options& o, const std::string& cmd, json results) {
  const fs::path out = results_path(o, cmd);
  if (out.has_parent_path() && !fs::is_directory(out.parent_path())) {
    throw InvalidArgument("output directory '" + out.parent_path().string() + "' does not exist");
  }
  if (results.contains("records")) {
    const fs::path csv = csv_path(o, out);
    results["csv"] = csv.filename().string();
    io::write_json(out, results);
    std::ofstream f(csv);
    if (!f) throw InvalidArgument("cannot write '" + csv.string() + "'");
    f << summary_csv(results);
    std::cout << "wrote " << out.string() << " and " << csv.string() << "\n";
  } else {
    io::write_json(out, results);
    std::cout << "wrote " << out.string() << "\n";
  }
}

json sweep_header(const std::string& point, const std::vector<std::string>& metrics) {
  return {{"point", point}, {"metrics", metrics}};
}

Eigen::Matrix3d default_K() {
  Eigen::Matrix3d K;
  K << 1.25, 0, 0.05, 0, 1.3, -0.03, 0, 0, 1;
  return K;
}

struct CalibErrors {
  double df, duv, ds;
};

CalibErrors calib_errors(const Eigen::Matrix3d& K, const Eigen::Matrix3d& truth) {
  const double df = std::max(std::abs(K(0, 0) - truth(0, 0)) / truth(0, 0), std::abs(K(1, 1) - truth(1, 1)) / truth(1, 1));
  const double duv = std::hypot(K(0, 2) - truth(0, 2), K(1, 2) - truth(1, 2));
  return {df, duv, std::abs(K(0, 1) - truth(0, 1))};
}

json intrinsics_json(const Intrinsics& k) {
  return {{"K", io::to_json(k.K)}, {"skew", k.skew}, {"clipped", k.clipped}};
}

// ------------------------------------------------------------ commands

int cmd_solve_pop(const Options& o) {
  int file_order = 0;
  Pop pop = io::pop_from_json(io::read_json(o.input), &file_order);
  if (!o.box.empty()) {
    const Box b = parse_box(o.box, pop.nvars);
    for (int j = 0; j < pop.nvars; ++j) {
      const Polynomial x = Polynomial::variable(pop.nvars, j);
      pop.inequalities.push_back(x - b.lo[j]);
      pop.inequalities.push_back(-x + b.hi[j]);
    }
  }
  const int s = o.order >= 0 ? o.order : file_order;
  const RelaxedSolution sol = solve_pop(pop, s);
  json cfg = config_json("solve-pop", o);
  cfg["resolved"] = {{"order", s}};
  write_results(o, "solve-pop", {{"config", cfg}, {"solution", io::to_json(sol)}});
  std::cout << to_string(sol.status) << " objective " << sol.objective << " rank_gap " << sol.rank_gap << "\n";
  return sol.status == SolveStatus::NumericalLimit ? 3 : 0;
}

int cmd_nonminimal(const Options& o) {
  NonMinimalProblem p = io::nonminimal_from_json(io::read_json(o.input));
  if (!o.norm.empty()) p.norm = parse_norm(o.norm);
  if (o.order >= 0) p.order = o.order;
  if (!o.box.empty()) p.constraints.box = parse_box(o.box, p.nvars);
  const RelaxedSolution sol = solve_nonminimal(p);
  json cfg = config_json("nonminimal", o);
  cfg["resolved"] = {{"norm", to_string(p.norm)}, {"order", p.order}};
  write_results(o, "nonminimal", {{"config", cfg}, {"solution", io::to_json(sol)}});
  std::cout << to_string(sol.status) << " objective " << sol.objective << " rank_gap " << sol.rank_gap << "\n";
  return sol.status == SolveStatus::NumericalLimit ? 3 : 0;
}

int cmd_consensus(const Options& o) {
  json cfg = config_json("consensus", o);
  json runs = json::array();
  json records = json::array();
  bool limit = false;

  auto run_one = [&](ConsensusProblem p, std::uint64_t seed, const std::vector<bool>* truth) {
    apply_limits(p, o);
    const auto t0 = std::chrono::steady_clock::now();
    const ConsensusResult r = maximize_consensus(p);
    const double secs = elapsed(t0);
    limit = limit || r.status == ConsensusStatus::Limit;
    json run = {{"seed", seed}, {"eps", p.eps}, {"result", io::to_json(r)}};
    json rec = {{"m", p.num_groups()},
                {"seed", seed},
                {"status", to_string(r.status)},
                {"inlier_count", r.inlier_count},
                {"certified", r.certified ? 1 : 0},
                {"nodes", r.nodes},
                {"seconds", secs}};
    if (truth) {
      run["truth_inliers"] = *truth;
      rec["exact"] = r.inliers == *truth ? 1 : 0;
    }
    runs.push_back(run);
    records.push_back(rec);
    std::cout << "seed " << seed << ": " << to_string(r.status) << ", " << r.inlier_count << "/" << p.num_groups()
              << " inliers, " << r.nodes << " nodes" << (truth ? (r.inliers == *truth ? ", exact" : ", not exact") : "")
              << "\n";
  };

  std::vector<std::string> metrics = {"inlier_count", "certified", "nodes", "seconds"};
  if (o.task.empty()) {
    if (o.input.empty()) throw InvalidArgument("consensus needs a problem file or --task");
    ConsensusProblem p = io::consensus_from_json(io::read_json(o.input));
    if (auto e = explicit_eps(o)) p.eps = *e;
    run_one(p, o.seed, nullptr);
  } else if (o.task == "rigid") {
    if (!o.input.empty()) {
      const json truth = load_truth(o);
      const double eps = resolve_eps(o, truth_sigma(truth));
      cfg["resolved"] = {{"eps", eps}};
      std::vector<bool> mask;
      if (truth.is_object() && truth.contains("inliers")) mask = truth["inliers"].get<std::vector<bool>>();
      const auto corrs = io::read_correspondences(o.input);
      if (!mask.empty() && mask.size() != corrs.size()) throw InvalidArgument("sidecar mask size differs from input");
      run_one(rigid_consensus(corrs, eps), o.seed, mask.empty() ? nullptr : &mask);
    } else {
      const int m = o.inliers + o.outliers;
      const double noise = o.noise.empty() ? 0.01 : parse_number(o.noise, "--noise");
      for (int t = 0; t < o.trials; ++t) {
        const RigidData d = synth_rigid(m, noise, static_cast<double>(o.outliers) / m, o.seed + t);
        run_one(rigid_consensus(d.corrs, resolve_eps(o, d.sigma)), o.seed + t, &d.inlier);
      }
      metrics.insert(metrics.begin(), "exact");
    }
  } else if (o.task == "autocalib") {
    const double eps = resolve_eps(o, std::nullopt);
    cfg["resolved"] = {{"eps", eps}};
    auto problem = [&](const std::vector<FundamentalInput>& Fs) {
      return autocalib_consensus(Fs, eps, DiacBounds{}, std::max(o.order, 0));
    };
    if (!o.input.empty()) {
      std::vector<FundamentalInput> Fs;
      for (const auto& F : io::read_fundamentals(o.input)) Fs.push_back(FundamentalInput::from_matrix(F));
      const json truth = load_truth(o);
      std::vector<bool> mask;
      if (truth.is_object() && truth.contains("inliers")) mask = truth["inliers"].get<std::vector<bool>>();
      run_one(problem(Fs), o.seed, mask.size() == Fs.size() ? &mask : nullptr);
    } else {
      for (int t = 0; t < o.trials; ++t) {
        const FundamentalData d = synth_fundamentals(o.inliers + o.outliers, default_K(), o.outliers, o.seed + t);
        run_one(problem(d.Fs), o.seed + t, &d.inlier);
      }
      metrics.insert(metrics.begin(), "exact");
    }
  } else {
    throw InvalidArgument("--task must be rigid or autocalib");
  }

  json results = {{"config", cfg}, {"runs", runs}};
  if (o.input.empty()) {
    results["sweep"] = sweep_header("m", metrics);
    results["records"] = records;
  }
  write_results(o, "consensus", results);
  return limit ? 3 : 0;
}

int cmd_rigid(const Options& o) {
  const Norm norm = o.norm.empty() ? Norm::L2 : parse_norm(o.norm);
  json cfg = config_json("rigid", o);
  if (!o.input.empty()) {
    const auto corrs = io::read_correspondences(o.input);
    const RigidFit fit = solve_rigid(corrs, norm);
    json res = {{"config", cfg},
                {"q", io::to_json(Eigen::VectorXd(fit.estimate.q))},
                {"t", io::to_json(Eigen::VectorXd(fit.estimate.t))},
                {"R", io::to_json(fit.estimate.R())},
                {"solution", io::to_json(fit.solution)}};
    const json truth = load_truth(o);
    if (truth.is_object() && truth.contains("R")) {
      res["rot_err_deg"] = rotation_error_deg(fit.estimate.R(), io::matrix3_from_json(truth["R"]));
      res["trans_err"] = (fit.estimate.t - io::vector_from_json(truth["t"])).norm();
    }
    write_results(o, "rigid", res);
    std::cout << to_string(fit.solution.status) << " rank_gap " << fit.solution.rank_gap << "\n";
    return fit.solution.status == SolveStatus::NumericalLimit ? 3 : 0;
  }

  const int n = o.minimal ? 3 : (o.n > 0 ? o.n : 10);
  const std::vector<double> levels = parse_levels(o.noise.empty() ? "0" : o.noise);
  cfg["resolved"] = {{"points", n}, {"noise_levels", levels}, {"norm", to_string(norm)}};
  json records = json::array();
  bool limit = false;
  for (double noise : levels) {
    for (int t = 0; t < o.trials; ++t) {
      const std::uint64_t seed = o.seed + t;
      const RigidData d = synth_rigid(n, noise, 0.0, seed);
      const auto t0 = std::chrono::steady_clock::now();
      const RigidFit fit = solve_rigid(d.corrs, norm);
      const double secs = elapsed(t0);
      limit = limit || fit.solution.status == SolveStatus::NumericalLimit;
      records.push_back({{"noise", noise},
                         {"seed", seed},
                         {"status", to_string(fit.solution.status)},
                         {"rot_err_deg", rotation_error_deg(fit.estimate.R(), d.truth.R())},
                         {"trans_err", (fit.estimate.t - d.truth.t).norm()},
                         {"rank_gap", fit.solution.rank_gap},
                         {"seconds", secs}});
    }
  }
  json results = {{"config", cfg},
                  {"sweep", sweep_header("noise", {"rot_err_deg", "trans_err", "rank_gap", "seconds"})},
                  {"records", records}};
  write_results(o, "rigid", results);
  return limit ? 3 : 0;
}

int cmd_autocalib(const Options& o) {
  json cfg = config_json("autocalib", o);
  const DiacBounds bounds;
  const int order = std::max(o.order, 0);
  const std::optional<double> eps = explicit_eps(o);
  if (o.eps == "auto") throw InvalidArgument("--eps auto is not available for autocalibration; give a value");

  struct Outcome {
    Intrinsics k;
    json detail;
    bool limit;
    std::vector<bool> inliers;
  };
  auto solve_one = [&](const std::vector<FundamentalInput>& Fs) {
    Outcome out;
    if (eps) {
      ConsensusProblem p = autocalib_consensus(Fs, *eps, bounds, order);
      apply_limits(p, o);
      const ConsensusResult r = maximize_consensus(p);
      out.k = recover_K(omega_from_x(r.x));
      out.detail = io::to_json(r);
      out.limit = r.status == ConsensusStatus::Limit;
      out.inliers = r.inliers;
    } else {
      NonMinimalProblem p = autocalib_problem(Fs, bounds, o.norm.empty() ? Norm::L1 : parse_norm(o.norm), order);
      const RelaxedSolution s = solve_nonminimal(p);
      out.k = recover_K(omega_from_x(s.x));
      out.detail = io::to_json(s);
      out.limit = s.status == SolveStatus::NumericalLimit;
    }
    return out;
  };

  if (!o.input.empty()) {
    std::vector<FundamentalInput> Fs;
    for (const auto& F : io::read_fundamentals(o.input)) Fs.push_back(FundamentalInput::from_matrix(F));
    const Outcome out = solve_one(Fs);
    json res = {{"config", cfg}, {"intrinsics", intrinsics_json(out.k)}, {eps ? "consensus" : "solution", out.detail}};
    const json truth = load_truth(o);
    if (truth.is_object() && truth.contains("K")) {
      const CalibErrors e = calib_errors(out.k.K, io::matrix3_from_json(truth["K"]));
      res["df"] = e.df;
      res["duv"] = e.duv;
      res["ds"] = e.ds;
    }
    write_results(o, "autocalib", res);
    return out.limit ? 3 : 0;
  }

  const int views = o.n > 0 ? o.n : 10;
  if (o.outliers > 0 && !eps) throw InvalidArgument("--eps is required when --outliers > 0");
  const Eigen::Matrix3d K = default_K();
  cfg["resolved"] = {{"views", views}, {"K", io::to_json(K)}};
  json records = json::array();
  bool limit = false;
  for (int t = 0; t < o.trials; ++t) {
    const std::uint64_t seed = o.seed + t;
    const FundamentalData d = synth_fundamentals(views, K, o.outliers, seed);
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome out = solve_one(d.Fs);
    const double secs = elapsed(t0);
    limit = limit || out.limit;
    const CalibErrors e = calib_errors(out.k.K, K);
    json rec = {{"outliers", o.outliers}, {"seed", seed}, {"df", e.df}, {"duv", e.duv}, {"ds", e.ds}, {"seconds", secs}};
    rec["exact"] = eps ? (out.inliers == d.inlier ? 1 : 0) : 1;
    records.push_back(rec);
  }
  json results = {{"config", cfg},
                  {"sweep", sweep_header("outliers", {"df", "duv", "ds", "exact", "seconds"})},
                  {"records", records}};
  write_results(o, "autocalib", results);
  return limit ? 3 : 0;
}

int cmd_nrsfm(const Options& o) {
  json cfg = config_json("nrsfm", o);
  if (!o.input.empty()) {
    QuarticSystem sys = io::read_quartics(o.input);
    if (!o.box.empty()) sys.box = parse_box(o.box, 2);
    const int s = o.order >= 0 ? o.order : 1;
    const RelaxedSolution sol = nrsfm_solve(sys, s);
    json res = {{"config", cfg}, {"k", io::to_json(sol.x)}, {"solution", io::to_json(sol)}};
    const json truth = load_truth(o);
    if (truth.is_object() && truth.contains("root")) res["root_err"] = (sol.x - io::vector_from_json(truth["root"])).norm();
    write_results(o, "nrsfm", res);
    return sol.status == SolveStatus::NumericalLimit ? 3 : 0;
  }

  const int count = o.n > 0 ? o.n : 5;
  const double noise = o.noise.empty() ? 0.0 : parse_number(o.noise, "--noise");
  const std::vector<int> orders = o.order >= 0 ? std::vector<int>{o.order} : std::vector<int>{0, 1};
  cfg["resolved"] = {{"count", count}, {"noise", noise}, {"orders", orders}};
  json records = json::array();
  bool limit = false;
  for (int s : orders) {
    for (int t = 0; t < o.trials; ++t) {
      const std::uint64_t seed = o.seed + t;
      const QuarticData d = synth_quartics(count, noise, seed);
      const auto t0 = std::chrono::steady_clock::now();
      const RelaxedSolution sol = nrsfm_solve(d.system, s);
      const double secs = elapsed(t0);
      limit = limit || sol.status == SolveStatus::NumericalLimit;
      double rmax = 0.0;
      for (double r : sol.residuals) rmax = std::max(rmax, r);
      records.push_back({{"order", s},
                         {"seed", seed},
                         {"status", to_string(sol.status)},
                         {"root_err", (sol.x - d.root).norm()},
                         {"residual_max", rmax},
                         {"rank_gap", sol.rank_gap},
                         {"seconds", secs}});
    }
  }
  json results = {{"config", cfg},
                  {"sweep", sweep_header("order", {"root_err", "residual_max", "rank_gap", "seconds"})},
                  {"records", records}};
  write_results(o, "nrsfm", results);
  return limit ? 3 : 0;
}

int cmd_synth(const Options& o) {
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw InvalidArgument("cannot create output directory '" + dir.string() + "'");
  const double noise = o.noise.empty() ? (o.kind == "rigid" ? 0.01 : 0.0) : parse_number(o.noise, "--noise");
  json params = {{"kind", o.kind}, {"n", o.n}, {"noise", noise}, {"outliers", o.outliers}, {"seed", o.seed}};
  json truth;
  if (o.kind == "rigid") {
    const int n = o.n > 0 ? o.n : 10;
    params["n"] = n;
    if (o.outliers >= n) throw InvalidArgument("--outliers must be below --n");
    const RigidData d = synth_rigid(n, noise, static_cast<double>(o.outliers) / n, o.seed);
    io::write_correspondences(dir / "correspondences.csv", d.corrs);
    truth = io::sidecar(d);
  } else if (o.kind == "autocalib") {
    const int n = o.n > 0 ? o.n : 10;
    params["n"] = n;
    const FundamentalData d = synth_fundamentals(n, default_K(), o.outliers, o.seed);
    std::vector<Eigen::Matrix3d> Fs;
    for (const auto& f : d.Fs) Fs.push_back(f.F);
    io::write_fundamentals(dir / "fundamentals.json", Fs);
    truth = io::sidecar(d);
  } else if (o.kind == "nrsfm") {
    const int n = o.n > 0 ? o.n : 5;
    params["n"] = n;
    const QuarticData d = synth_quartics(n, noise, o.seed);
    io::write_quartics(dir / "quartics.json", d.system);
    truth = io::sidecar(d);
  } else {
    throw InvalidArgument("synth kind must be rigid, autocalib or nrsfm");
  }
  truth["params"] = params;
  io::write_json(dir / "truth.json", truth);
  std::cout << "wrote " << o.kind << " data to " << dir.string() << "\n";
  return 0;
}

int cmd_verify(const Options& o) {
  const fs::path res = o.input;
  const json results = io::read_json(res);
  if (!results.contains("records")) throw InvalidArgument("results file has no per-trial records");
  fs::path csv = o.csv;
  if (csv.empty()) {
    csv = results.contains("csv") ? res.parent_path() / results["csv"].get<std::string>() : fs::path(res).replace_extension(".csv");
  }
  std::ifstream f(csv);
  if (!f) throw InvalidArgument("cannot open '" + csv.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  if (ss.str() == summary_csv(results)) {
    std::cout << "ok: " << csv.string() << " matches the records\n";
    return 0;
  }
  std::cout << "mismatch: " << csv.string() << " differs from the records\n";
  return 1;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto a = text.find(':'), b = text.rfind(':');
    const double lo = parse_number(text.substr(0, a), "level");
    const double hi = parse_number(text.substr(a + 1, b - a - 1), "level");
    const double n = parse_number(text.substr(b + 1), "level count");
    if (n < 1 || n != std::floor(n) || !(hi >= lo)) throw InvalidArgument("levels 'lo:hi:n' need hi >= lo and n >= 1");
    for (int k = 0; k <= static_cast<int>(n); ++k) out.push_back(lo + (hi - lo) * k / n);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, "level"));
  if (out.empty()) throw InvalidArgument("empty level list");
  return out;
}

std::string summary_csv(const json& results) {
  const json& sweep = results.at("sweep");
  const std::string point = sweep.at("point").get<std::string>();
  const auto metrics = sweep.at("metrics").get<std::vector<std::string>>();
  std::vector<double> keys;
  std::map<double, std::vector<const json*>> groups;
  for (const auto& r : results.at("records")) {
    const double k = r.at(point).get<double>();
    if (!groups.count(k)) keys.push_back(k);
    groups[k].push_back(&r);
  }
  std::string out = point + ",trials";
  for (const auto& m : metrics) out += "," + m + "_mean," + m + "_median," + m + "_max";
  out += "\n";
  for (double k : keys) {
    const auto& g = groups[k];
    out += fmt(k) + "," + std::to_string(g.size());
    for (const auto& m : metrics) {
      std::vector<double> v;
      for (const json* r : g) {
        if (r->contains(m) && (*r)[m].is_number()) v.push_back((*r)[m].get<double>());
      }
      if (v.empty()) {
        out += ",nan,nan,nan";
        continue;
      }
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      const std::size_t h = v.size() / 2;
      const double med = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
      out += "," + fmt(sum / v.size()) + "," + fmt(med) + "," + fmt(v.back());
    }
    out += "\n";
  }
  return out;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Polynomial-optimization relaxations, consensus maximization and geometric vision solvers"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--order", o.order, "Relaxation order s");
    s->add_option("--norm", o.norm, "Residual norm")->check(CLI::IsMember({"l1", "l2", "linf"}));
    s->add_option("--eps", o.eps, "Consensus threshold, or 'auto' for 3 sigma from the sidecar");
    s->add_option("--big-m", o.big_m, "Big-M for every group (default: from the box)");
    s->add_option("--box", o.box, "Variable box lo:hi or lo1:hi1,lo2:hi2,...");
    s->add_option("--node-limit", o.node_limit, "Branch-and-bound node budget");
    s->add_option("--time-limit", o.time_limit, "Time budget in seconds");
    s->add_option("--seed", o.seed, "Base seed; trial t uses seed + t");
    s->add_option("--trials", o.trials, "Trials per sweep point")->check(CLI::PositiveNumber);
    s->add_option("-o,--out", o.out, "Results file (directory for synth)");
    s->add_option("--truth", o.truth, "Ground-truth sidecar (default: truth.json next to the input)");
    s->add_option("--csv", o.csv, "CSV summary path (default: results path with .csv)");
    s->add_option("--n", o.n, "Points, views or polynomials for synthetic data");
    s->add_option("--noise", o.noise, "Noise level; sweeps accept lo:hi:n or a,b,c");
    s->add_option("--outliers", o.outliers, "Number of outliers")->check(CLI::NonNegativeNumber);
  };

  auto* pop = app.add_subcommand("solve-pop", "Lasserre relaxation of a POP file");
  pop->add_option("input", o.input, "POP JSON")->required();
  common(pop);
  auto* nm = app.add_subcommand("nonminimal", "Non-minimal residual solve of a problem file");
  nm->add_option("input", o.input, "Non-minimal problem JSON")->required();
  common(nm);
  auto* cons = app.add_subcommand("consensus", "Consensus maximization by branch and bound");
  cons->add_option("input", o.input, "Consensus problem JSON, or data for --task");
  cons->add_option("--task", o.task, "rigid or autocalib")->check(CLI::IsMember({"rigid", "autocalib"}));
  cons->add_option("--inliers", o.inliers, "Planted inliers for synthetic tasks")->check(CLI::NonNegativeNumber);
  common(cons);
  auto* rigid = app.add_subcommand("rigid", "Rigid registration on a CSV or a synthetic noise sweep");
  rigid->add_option("input", o.input, "Correspondence CSV");
  rigid->add_flag("--minimal", o.minimal, "Three-point instances");
  common(rigid);
  auto* cal = app.add_subcommand("autocalib", "Kruppa autocalibration on a file or synthetic trials");
  cal->add_option("input", o.input, "Fundamental-matrix JSON");
  common(cal);
  auto* nr = app.add_subcommand("nrsfm", "Quartic NRSfM systems on a file or synthetic trials");
  nr->add_option("input", o.input, "Quartic-system JSON");
  common(nr);
  auto* syn = app.add_subcommand("synth", "Write synthetic data with a ground-truth sidecar");
  syn->add_option("kind", o.kind, "rigid, autocalib or nrsfm")->required();
  common(syn);
  auto* ver = app.add_subcommand("verify", "Recompute a CSV summary from its results file");
  ver->add_option("input", o.input, "Results JSON")->required();
  ver->add_option("--csv", o.csv, "CSV summary path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "solve-pop") return cmd_solve_pop(o);
    if (cmd == "nonminimal") return cmd_nonminimal(o);
    if (cmd == "consensus") return cmd_consensus(o);
    if (cmd == "rigid") return cmd_rigid(o);
    if (cmd == "autocalib") return cmd_autocalib(o);
    if (cmd == "nrsfm") return cmd_nrsfm(o);
    if (cmd == "synth") return cmd_synth(o);
    return cmd_verify(o);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ExtractionError& e) {
    std::cerr << "solver limit: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace momenta::cli
