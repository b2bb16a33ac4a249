#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "slitbundle/scalar.hpp"
#include "slitbundle/system.hpp"

namespace slitbundle {

/// Builtin systems: heisenberg, unicycle, martinet, involutive3, flatbracket
/// and flat(n) (also spelled flatN). All use the Euclidean metric.
/// Throws ConfigError for an unknown name.
System builtin(const std::string& name);

/// Canonical builtin names; flat(n) is listed as "flat(n)".
std::vector<std::string> builtin_names();

bool is_builtin(const std::string& name);

/// phi(x) = exp(-1/x^2) for x > 0 and exactly 0 otherwise.
template <class S>
S flat_bump(const S& x) {
  if (!(value_of(x) > 0.0)) return S(0.0);
  using std::exp;
  return exp(S(-reciprocal(x * x)));
}

}  // namespace slitbundle
