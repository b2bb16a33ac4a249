#pragma once

#include <cmath>

#include "slitbundle/dual.hpp"
#include "slitbundle/jet.hpp"

namespace slitbundle {

// Uniform access to the three scalar types the evaluators are instantiated
// with: double, Dual and Jet.

inline double value_of(double a) { return a; }
inline bool carries_derivatives(double) { return false; }
inline double reciprocal(double a) { return 1.0 / a; }

/// a^e for integer e by repeated squaring; e < 0 goes through the reciprocal.
template <class S>
S integer_power(const S& a, int e) {
  if (e < 0) return integer_power(S(reciprocal(a)), -e);
  S result(1.0);
  S base = a;
  bool first = true;
  while (e > 0) {
    if (e & 1) {
      if (first) {
        result = base;
        first = false;
      } else {
        result = result * base;
      }
    }
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return result;
}

}  // namespace slitbundle
