#include "cli.hpp"

#include <CLI/CLI.hpp>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "slitbundle/distribution.hpp"
#include "slitbundle/error.hpp"
#include "slitbundle/io.hpp"
#include "slitbundle/planner.hpp"
#include "slitbundle/verification.hpp"

namespace slitbundle::cli {

namespace {

using Json = nlohmann::ordered_json;

Vec parse_numbers(const std::string& text, int expected, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + text + "' is not a comma-separated list of numbers");
    }
  }
  if (static_cast<int>(vals.size()) != expected) {
    throw ConfigError(what + " needs " + std::to_string(expected) + " numbers, got " + std::to_string(vals.size()));
  }
  return Eigen::Map<const Vec>(vals.data(), expected);
}

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json validation_json(const ValidationReport& r) {
  Json j;
  j["trivial"] = r.trivial;
  j["arcs"] = r.arcs;
  j["samples"] = r.samples;
  j["horizontality"] = r.horizontality;
  j["min_speed"] = r.min_speed;
  j["min_fiber_norm"] = r.min_fiber_norm;
  j["junction_velocity_jump"] = r.junction_velocity_jump;
  j["junction_position_jump"] = r.junction_position_jump;
  j["position_error"] = r.position_error ? Json(*r.position_error) : Json(nullptr);
  j["velocity_error"] = r.velocity_error ? Json(*r.velocity_error) : Json(nullptr);
  j["region_violations"] = r.region_violations;
  j["passed"] = passes(r);
  return j;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << text;
}

struct CheckArgs {
  std::string system;
  int points = 100;
  int depth = kDefaultDepth;
  std::uint64_t seed = 1;
  int trials = 50;
  std::vector<std::string> at;
};

int run_check(const CheckArgs& a, std::ostream& out) {
  const System sys = load_system(a.system);
  std::vector<Point> points;
  for (const auto& text : a.at) {
    Point p(parse_numbers(text, sys.dim, "--at"));
    if (!sys.contains(p)) throw ConfigError("--at point outside the system domain");
    sys.check_at(p);
    points.push_back(std::move(p));
  }
  if (points.empty()) points = sample_points(sys, a.points, a.seed);
  const BracketReport report = is_bracket_generating(sys, points, a.depth);

  // Orbit estimates at the explicit points, or at the first sample and the witnesses.
  std::vector<Point> orbit_points;
  if (!a.at.empty()) {
    orbit_points = points;
  } else {
    orbit_points.push_back(points.front());
    for (std::size_t i = 0; i < report.witnesses.size() && i < 4; ++i) orbit_points.push_back(report.witnesses[i]);
  }

  Json doc;
  doc["system"] = sys.name;
  doc["label"] = BracketReport::kLabel;
  doc["verdict"] = to_string(report.verdict);
  doc["depth_cap"] = report.depth_cap;
  doc["points"] = Json::array();
  for (const auto& pv : report.points) {
    doc["points"].push_back(
        {{"point", to_json(pv.growth.point.coords)}, {"growth", pv.growth.dims}, {"verdict", to_string(pv.verdict)}});
  }
  doc["witnesses"] = Json::array();
  for (const auto& w : report.witnesses) doc["witnesses"].push_back(to_json(w.coords));
  doc["orbit"] = Json::array();
  int orbit_min = sys.dim;
  for (const auto& p : orbit_points) {
    const OrbitEstimate e = orbit_dimension(sys, p, a.trials, a.seed);
    orbit_min = std::min(orbit_min, e.dimension);
    doc["orbit"].push_back(
        {{"point", to_json(p.coords)}, {"dimension", e.dimension}, {"trials", e.trials}, {"skipped", e.skipped}});
  }
  doc["orbit_dimension"] = orbit_min;
  out << doc.dump(2) << '\n';
  switch (report.verdict) {
    case Verdict::Generating:
      return kOk;
    case Verdict::NotGenerating:
      return kNotGenerating;
    case Verdict::Inconclusive:
      break;
  }
  return kInconclusive;
}

struct VerifyArgs {
  std::string system;
  int trials = 200;
  std::uint64_t seed = 1;
  std::string report;
};

int run_verify(const VerifyArgs& a, std::ostream& out) {
  const System sys = load_system(a.system);
  const IdentityReport report = verify_identities(sys, a.trials, a.seed);
  write_text(a.report, report.to_json() + "\n", out);
  return report.passed() ? kOk : kCheckFailed;
}

struct GeodesicArgs {
  std::string system;
  std::string from;
  std::string fiber;
  double time = 1.0;
  std::string out;
};

int run_geodesic(const GeodesicArgs& a, std::ostream& out) {
  const System sys = load_system(a.system);
  const Point q(parse_numbers(a.from, sys.dim, "--from"));
  const Vec fiber = parse_numbers(a.fiber, sys.rank(), "--fiber");
  if (!sys.contains(q)) throw ConfigError("--from point outside the system domain");
  if (!(a.time > 0.0)) throw ConfigError("--time must be positive");
  if (!(fiber.norm() >= kDefaultSlitEps)) throw ConfigError("--fiber must be nonzero");
  const std::vector<ControlArc> schedule{{SecondOrderControl{Vec::Zero(sys.rank())}, a.time}};
  const BundleTrajectory traj = integrate(sys, BundleState{q, fiber}, schedule);
  PiecewisePath path;
  path.start = BundleState{q, fiber};
  path.arcs.push_back({schedule.front().control, a.time, traj.samples});
  write_text(a.out, csv_string(sys, path), out);
  return kOk;
}

struct PlanArgs {
  std::string system;
  std::string from, vfrom, to, vto;
  int segments = 8;
  int restarts = 20;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string region;
  std::string out;
  std::string report;
  std::string svg;
};

int run_plan(const PlanArgs& a, std::ostream& out, std::ostream& err) {
  const System sys = load_system(a.system);
  PlanRequest req;
  req.p = Point(parse_numbers(a.from, sys.dim, "--from"));
  req.q = Point(parse_numbers(a.to, sys.dim, "--to"));
  req.v_p = sys.ambient(req.p, parse_numbers(a.vfrom, sys.rank(), "--vfrom"));
  req.v_q = sys.ambient(req.q, parse_numbers(a.vto, sys.rank(), "--vto"));
  if (!a.region.empty()) req.region = load_region(a.region, sys.dim);
  req.options.segments = a.segments;
  req.options.restarts = a.restarts;
  req.options.seed = a.seed;
  req.options.threads = a.threads;

  Json doc;
  doc["system"] = sys.name;
  try {
    const PiecewisePath path = plan(sys, req);
    const ValidationReport rep = validate(sys, path, req.q, req.v_q, req.region);
    doc["status"] = "accepted";
    doc["restart"] = path.meta.restart;
    doc["iterations"] = path.meta.iterations;
    doc["residual"] = path.meta.residual;
    doc["checks_passed"] = path.meta.checks_passed;
    doc["validation"] = validation_json(rep);
    write_text(a.out, csv_string(sys, path), out);
    if (!a.svg.empty()) {
      std::ostringstream svg;
      write_svg(svg, path);
      write_text(a.svg, svg.str(), out);
    }
    if (a.report.empty()) {
      err << doc.dump() << '\n';
    } else {
      write_text(a.report, doc.dump(2) + "\n", out);
    }
    return kOk;
  } catch (const PlanError& e) {
    if (e.kind() == PlanErrorKind::SlitViolation) throw ConfigError(e.what());
    doc["status"] = to_string(e.kind());
    doc["message"] = e.what();
    doc["best_residual"] = e.best_residual();
    doc["best_restart"] = e.best_restart();
    if (a.report.empty()) {
      err << doc.dump() << '\n';
    } else {
      write_text(a.report, doc.dump(2) + "\n", out);
    }
    return e.kind() == PlanErrorKind::NotReachable ? kNotGenerating : kNoConvergence;
  }
}

struct ValidateArgs {
  std::string system;
  std::string path;
  std::string to, vto;
  std::string region;
};

int run_validate(const ValidateArgs& a, std::ostream& out) {
  const System sys = load_system(a.system);
  std::ifstream in(a.path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + a.path + "'");
  const PiecewisePath path = read_csv(in, sys);
  std::optional<Point> q;
  std::optional<Vec> v;
  if (!a.to.empty()) q = Point(parse_numbers(a.to, sys.dim, "--to"));
  if (!a.vto.empty()) {
    if (!q) throw ConfigError("--vto needs --to");
    v = sys.ambient(*q, parse_numbers(a.vto, sys.rank(), "--vto"));
  }
  std::optional<Domain> region;
  if (!a.region.empty()) region = load_region(a.region, sys.dim);
  const ValidationReport rep = validate(sys, path, q, v, region);
  Json doc;
  doc["system"] = sys.name;
  doc["validation"] = validation_json(rep);
  out << doc.dump(2) << '\n';
  return passes(rep) ? kOk : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calculus of smooth distributions and horizontal path planning on the slit bundle", "slitbundle"};
  app.require_subcommand(1);
  const char* system_help = "builtin name (heisenberg, unicycle, martinet, involutive3, flatbracket, flatN) or config file";

  CheckArgs check;
  auto* c = app.add_subcommand("check", "growth vectors, bracket-generating verdict and orbit dimension");
  c->add_option("--system", check.system, system_help)->required();
  c->add_option("--points", check.points, "number of sampled points")->check(CLI::PositiveNumber);
  c->add_option("--depth", check.depth, "bracket depth cap")->check(CLI::Range(1, 12));
  c->add_option("--seed", check.seed, "random seed");
  c->add_option("--trials", check.trials, "flow compositions per orbit estimate")->check(CLI::PositiveNumber);
  c->add_option("--at", check.at, "explicit point x1,...,xn (repeatable); replaces sampling");

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "randomized identity suite with a JSON report");
  v->add_option("--system", verify.system, system_help)->required();
  v->add_option("--trials", verify.trials, "samples per identity")->check(CLI::PositiveNumber);
  v->add_option("--seed", verify.seed, "random seed");
  v->add_option("--report", verify.report, "write the report here instead of stdout");

  GeodesicArgs geo;
  auto* g = app.add_subcommand("geodesic", "integrate the nonholonomic field, CSV out");
  g->add_option("--system", geo.system, system_help)->required();
  g->add_option("--from", geo.from, "base point x1,...,xn")->required();
  g->add_option("--fiber", geo.fiber, "frame coordinates a1,...,ak")->required();
  g->add_option("--time", geo.time, "duration");
  g->add_option("--out", geo.out, "CSV file (default stdout)");

  PlanArgs pl;
  auto* p = app.add_subcommand("plan", "steer between two points with given velocities");
  p->add_option("--system", pl.system, system_help)->required();
  p->add_option("--from", pl.from, "start point")->required();
  p->add_option("--vfrom", pl.vfrom, "start velocity in frame coordinates")->required();
  p->add_option("--to", pl.to, "end point")->required();
  p->add_option("--vto", pl.vto, "end velocity in frame coordinates")->required();
  p->add_option("--segments", pl.segments, "shooting segments")->check(CLI::PositiveNumber);
  p->add_option("--restarts", pl.restarts, "restarts")->check(CLI::PositiveNumber);
  p->add_option("--seed", pl.seed, "random seed");
  p->add_option("--threads", pl.threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
  p->add_option("--region", pl.region, "region file; the path must stay inside");
  p->add_option("--out", pl.out, "CSV file (default stdout)");
  p->add_option("--report", pl.report, "JSON report file (default: one line on stderr)");
  p->add_option("--svg", pl.svg, "write a 2-D polyline of (x1, x2)");

  ValidateArgs val;
  auto* va = app.add_subcommand("validate", "re-check a stored path");
  va->add_option("--system", val.system, system_help)->required();
  va->add_option("--path", val.path, "trajectory CSV")->required();
  va->add_option("--to", val.to, "expected end point");
  va->add_option("--vto", val.vto, "expected end velocity in frame coordinates");
  va->add_option("--region", val.region, "region file");

  std::vector<std::string> storage{"slitbundle"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kMalformed;
  }

  try {
    if (c->parsed()) return run_check(check, out);
    if (v->parsed()) return run_verify(verify, out);
    if (g->parsed()) return run_geodesic(geo, out);
    if (p->parsed()) return run_plan(pl, out, err);
    if (va->parsed()) return run_validate(val, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kMalformed;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kMalformed;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  }
  return kMalformed;
}

}  // namespace slitbundle::cli
