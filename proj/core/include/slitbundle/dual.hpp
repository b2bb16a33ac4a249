#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace slitbundle {

inline constexpr int kMaxDualDirections = 16;

/// First-order forward-mode dual number carrying up to kMaxDualDirections
/// directional derivatives inline (no heap traffic in the integrator loop).
/// A dual with `dirs == 0` is a plain constant.
struct Dual {
  double value = 0.0;
  int dirs = 0;
  std::array<double, kMaxDualDirections> grad{};

  Dual() = default;
  Dual(double v) : value(v) {}  // NOLINT(google-explicit-constructor)

  static Dual variable(double v, int index, int dirs) {
    Dual d(v);
    d.dirs = dirs;
    d.grad[static_cast<std::size_t>(index)] = 1.0;
    return d;
  }

  static Dual directional(double v, double slope) {
    Dual d(v);
    d.dirs = 1;
    d.grad[0] = slope;
    return d;
  }

  double d(int i) const { return i < dirs ? grad[static_cast<std::size_t>(i)] : 0.0; }

  Dual& operator+=(const Dual& o) {
    value += o.value;
    if (o.dirs > dirs) dirs = o.dirs;
    for (int i = 0; i < o.dirs; ++i) grad[i] += o.grad[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value -= o.value;
    if (o.dirs > dirs) dirs = o.dirs;
    for (int i = 0; i < o.dirs; ++i) grad[i] -= o.grad[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    const int m = dirs > o.dirs ? dirs : o.dirs;
    for (int i = 0; i < m; ++i) grad[i] = grad[i] * o.value + value * o.grad[i];
    dirs = m;
    value *= o.value;
    return *this;
  }
};

inline Dual operator-(Dual a) {
  a.value = -a.value;
  for (int i = 0; i < a.dirs; ++i) a.grad[i] = -a.grad[i];
  return a;
}
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }

/// Applies the chain rule for a unary function with value `f` and slope `df`.
inline Dual chain(const Dual& a, double f, double df) {
  Dual r(f);
  r.dirs = a.dirs;
  for (int i = 0; i < a.dirs; ++i) r.grad[i] = df * a.grad[i];
  return r;
}

inline Dual reciprocal(const Dual& a) {
  const double inv = 1.0 / a.value;
  return chain(a, inv, -inv * inv);
}
inline Dual operator/(const Dual& a, const Dual& b) {
  if (b.dirs == 0) {
    Dual r = a;
    r.value /= b.value;
    for (int i = 0; i < r.dirs; ++i) r.grad[i] /= b.value;
    return r;
  }
  return a * reciprocal(b);
}

inline Dual sin(const Dual& a) { return chain(a, std::sin(a.value), std::cos(a.value)); }
inline Dual cos(const Dual& a) { return chain(a, std::cos(a.value), -std::sin(a.value)); }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return chain(a, e, e);
}
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  return chain(a, s, 0.5 / s);
}

inline double value_of(const Dual& a) { return a.value; }
inline bool carries_derivatives(const Dual& a) { return a.dirs > 0; }

}  // namespace slitbundle
