#include "slitbundle/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slitbundle/error.hpp"
#include "slitbundle/systems.hpp"

namespace slitbundle {

using nlohmann::json;

namespace {

std::vector<Expression> parse_inequalities(const json& list, int dim) {
  if (!list.is_array()) throw ConfigError("inequalities must be a list of expression strings");
  std::vector<Expression> out;
  for (const auto& e : list) {
    if (!e.is_string()) throw ConfigError("inequalities must be a list of expression strings");
    out.push_back(Expression::parse(e.get<std::string>(), dim));
  }
  return out;
}

Vec vec_of(const json& j, int dim, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(std::string(what) + " must be a list of " + std::to_string(dim) + " numbers");
  }
  Vec v(dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw ConfigError(std::string(what) + " entries must be numbers");
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

System parse_system_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed system config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("system config must be a JSON object");
  if (!doc.contains("dim") || !doc["dim"].is_number_integer()) throw ConfigError("system config needs an integer 'dim'");
  const int dim = doc["dim"].get<int>();
  if (dim < 2 || dim > kMaxDualDirections) throw ConfigError("'dim' out of range");
  if (!doc.contains("frame") || !doc["frame"].is_array()) throw ConfigError("system config needs a 'frame' list");

  std::vector<VectorField> frame;
  for (const auto& f : doc["frame"]) {
    if (!f.is_array()) throw ConfigError("each frame field must be a list of expression strings");
    std::vector<std::string> comps;
    for (const auto& c : f) {
      if (!c.is_string()) throw ConfigError("frame components must be expression strings");
      comps.push_back(c.get<std::string>());
    }
    frame.push_back(VectorField::from_expressions(comps, dim));
  }

  MetricField metric = MetricField::euclidean(dim);
  if (doc.contains("metric") && !doc["metric"].is_null()) {
    std::vector<std::vector<std::string>> rows;
    if (!doc["metric"].is_array()) throw ConfigError("'metric' must be a list of rows");
    for (const auto& row : doc["metric"]) {
      if (!row.is_array()) throw ConfigError("'metric' must be a list of rows");
      std::vector<std::string> r;
      for (const auto& c : row) {
        if (!c.is_string()) throw ConfigError("metric entries must be expression strings");
        r.push_back(c.get<std::string>());
      }
      rows.push_back(std::move(r));
    }
    metric = MetricField::from_expressions(rows, dim);
  }

  Domain domain;
  if (doc.contains("domain") && !doc["domain"].is_null()) domain = Domain(parse_inequalities(doc["domain"], dim));

  SampleBox box;
  if (doc.contains("sample_box")) {
    const auto& b = doc["sample_box"];
    if (!b.is_object() || !b.contains("lo") || !b.contains("hi")) throw ConfigError("'sample_box' needs 'lo' and 'hi'");
    box.lo = vec_of(b["lo"], dim, "sample_box.lo");
    box.hi = vec_of(b["hi"], dim, "sample_box.hi");
  }

  const std::string name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>() : "custom";
  System sys = make_system(name, dim, std::move(frame), std::move(metric), std::move(domain), std::move(box));
  // The frame and metric must pass their invariants on a sample.
  sample_points(sys, 16, 0);
  return sys;
}

System load_system(const std::string& name_or_path) {
  if (is_builtin(name_or_path)) return builtin(name_or_path);
  return parse_system_config(read_file(name_or_path));
}

Domain parse_region(const std::string& json_text, int dim) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed region file: ") + e.what());
  }
  if (doc.is_object()) {
    if (!doc.contains("inequalities")) throw ConfigError("region file needs 'inequalities'");
    return Domain(parse_inequalities(doc["inequalities"], dim));
  }
  return Domain(parse_inequalities(doc, dim));
}

Domain load_region(const std::string& path, int dim) { return parse_region(read_file(path), dim); }

void write_csv(std::ostream& out, const System& sys, const PiecewisePath& path) {
  const int n = sys.dim, k = sys.rank();
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",q_" << i;
  for (int i = 1; i <= n; ++i) out << ",v_" << i;
  for (int i = 1; i <= k; ++i) out << ",a_" << i;
  out << ",arc_index\n";
  auto row = [&](double t, const Vec& q, const Vec& v, const Vec& a, int arc) {
    out << fmt(t);
    for (int i = 0; i < n; ++i) out << ',' << fmt(q[i]);
    for (int i = 0; i < n; ++i) out << ',' << fmt(v[i]);
    for (int i = 0; i < k; ++i) out << ',' << fmt(a[i]);
    out << ',' << arc << '\n';
  };
  if (path.arcs.empty()) {
    row(0.0, path.start.q.coords, sys.ambient(path.start.q, path.start.a), path.start.a, 0);
    return;
  }
  for (const auto& arc : path.arcs) {
    for (const auto& s : arc.samples) row(s.t, s.q, s.qdot, s.a, s.arc);
  }
}

std::string csv_string(const System& sys, const PiecewisePath& path) {
  std::ostringstream ss;
  write_csv(ss, sys, path);
  return ss.str();
}

PiecewisePath read_csv(std::istream& in, const System& sys) {
  const int n = sys.dim, k = sys.rank();
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory file");
  const int columns = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns != 2 * n + k + 2 || line.rfind("t,", 0) != 0) {
    throw ConfigError("trajectory header does not match the system dimensions");
  }
  std::vector<BundleSample> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw ConfigError("");
      } catch (const std::exception&) {
        throw ConfigError("bad number on trajectory line " + std::to_string(lineno));
      }
    }
    if (static_cast<int>(vals.size()) != columns) {
      throw ConfigError("wrong column count on trajectory line " + std::to_string(lineno));
    }
    BundleSample s;
    s.t = vals[0];
    s.q = Eigen::Map<const Vec>(vals.data() + 1, n);
    s.qdot = Eigen::Map<const Vec>(vals.data() + 1 + n, n);
    s.a = Eigen::Map<const Vec>(vals.data() + 1 + 2 * n, k);
    s.arc = static_cast<int>(vals.back());
    rows.push_back(std::move(s));
  }
  if (rows.empty()) throw ConfigError("trajectory file has no samples");
  PiecewisePath path;
  path.start = BundleState{Point(rows.front().q), rows.front().a};
  if (rows.size() == 1) {
    path.trivial = true;
    return path;
  }
  for (auto& s : rows) {
    if (s.arc < 0) throw ConfigError("negative arc index in trajectory file");
    if (path.arcs.empty() || s.arc != path.arcs.back().samples.back().arc) {
      if (!path.arcs.empty() && s.arc < path.arcs.back().samples.back().arc) {
        throw ConfigError("arc indices must be nondecreasing");
      }
      path.arcs.push_back({});
    }
    path.arcs.back().samples.push_back(std::move(s));
  }
  for (auto& arc : path.arcs) arc.duration = arc.samples.back().t - arc.samples.front().t;
  return path;
}

void write_svg(std::ostream& out, const PiecewisePath& path, int x_axis, int y_axis) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& arc : path.arcs) {
    for (const auto& s : arc.samples) pts.emplace_back(s.q[x_axis], s.q[y_axis]);
  }
  if (pts.empty()) pts.emplace_back(path.start.q.coords[x_axis], path.start.q.coords[y_axis]);
  double x0 = pts[0].first, x1 = x0, y0 = pts[0].second, y1 = y0;
  for (const auto& [x, y] : pts) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-9});
  const double size = 480.0, pad = 16.0;
  auto sx = [&](double x) { return pad + (x - x0) / span * size; };
  auto sy = [&](double y) { return pad + size - (y - y0) / span * size; };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << size + 2 * pad
      << "\">\n<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << fmt(sx(pts[i].first)) << ',' << fmt(sy(pts[i].second));
  out << "\"/>\n</svg>\n";
}

}  // namespace slitbundle
