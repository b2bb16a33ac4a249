#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "slitbundle/chart.hpp"
#include "slitbundle/distribution.hpp"

namespace slitbundle::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng()); }

inline Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, -scale, scale);
  return v;
}

/// Richardson-extrapolated central difference of f along d at x.
inline Vec central_difference(const std::function<Vec(const Vec&)>& f, const Vec& x, const Vec& d, double h = 1e-3) {
  auto c = [&](double s) { return Vec((f(x + s * d) - f(x - s * d)) / (2.0 * s)); };
  return (4.0 * c(0.5 * h) - c(h)) / 3.0;
}

/// Random expression text over x1..x3 whose evaluation never hits a domain error.
inline std::string random_expression(std::mt19937_64& rng, int depth) {
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  if (depth == 0 || pick(4) == 0) {
    if (pick(3) == 0) return std::to_string(uniform(rng, -2.0, 2.0));
    return "x" + std::to_string(1 + pick(3));
  }
  const std::string a = random_expression(rng, depth - 1);
  switch (pick(10)) {
    case 0:
      return "(" + a + " + " + random_expression(rng, depth - 1) + ")";
    case 1:
      return "(" + a + " - " + random_expression(rng, depth - 1) + ")";
    case 2:
      return "(" + a + " * " + random_expression(rng, depth - 1) + ")";
    case 3:
      return "(" + a + " / (2 + cos(" + random_expression(rng, depth - 1) + ")))";
    case 4:
      return "sin(" + a + ")";
    case 5:
      return "cos(" + a + ")";
    case 6:
      return "exp(sin(" + a + "))";
    case 7:
      return "sqrt(1 + (" + a + ")^2)";
    case 8:
      return "(" + a + ")^" + std::to_string(pick(4));
    default:
      return "-" + a;
  }
}

}  // namespace slitbundle::testing
