#pragma once

#include <iosfwd>
#include <string>

#include "slitbundle/planner.hpp"

namespace slitbundle {

// System config (JSON):
//   {
//     "name": "heisenberg-expr",
//     "dim": 3,
//     "frame": [["1", "0", "-x2/2"], ["0", "1", "x1/2"]],
//     "metric": [["1","0","0"], ["0","1","0"], ["0","0","1"]],   optional, identity by default
//     "domain": ["4 - x1^2 - x2^2"],                                optional, each entry means expr > 0
//     "sample_box": {"lo": [-2,-2,-2], "hi": [2,2,2]}               optional
//   }
// Region file (JSON): {"inequalities": ["4 - x1^2 - x2^2"]} or a bare list of strings.

/// Parses a config document; throws ConfigError (or ParseError for bad expressions).
System parse_system_config(const std::string& json_text);
/// A builtin name, or a path to a config file.
System load_system(const std::string& name_or_path);

Domain parse_region(const std::string& json_text, int dim);
Domain load_region(const std::string& path, int dim);

/// Trajectory CSV: header t,q_1..q_n,v_1..v_n,a_1..a_k,arc_index, values printed
/// with 17 significant digits. v is the ambient fiber vector E(q) a.
void write_csv(std::ostream& out, const System& sys, const PiecewisePath& path);
std::string csv_string(const System& sys, const PiecewisePath& path);
/// Reads a path back. A single row is read as a trivial (constant) path.
PiecewisePath read_csv(std::istream& in, const System& sys);

/// Static polyline of the base curve projected to coordinates (x_axis, y_axis).
void write_svg(std::ostream& out, const PiecewisePath& path, int x_axis = 0, int y_axis = 1);

std::string read_file(const std::string& path);

}  // namespace slitbundle
