#include "slitbundle/ode.hpp"

#include <algorithm>
#include <cmath>

#include "slitbundle/error.hpp"

namespace slitbundle {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th- and 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(std::span<const double> err, std::span<const double> y, std::span<const double> ynew,
                  const OdeOptions& o) {
  double sum = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
    const double r = err[i] / sc;
    sum += r * r;
  }
  return err.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(err.size()));
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

OdeSolution integrate_dopri5(const OdeRhs& rhs, double t0, std::span<const double> y0, double t1,
                             const OdeOptions& options, const OdeGuard& guard, const OdeMonitor& monitor) {
  const std::size_t n = y0.size();
  OdeSolution sol(n);
  std::vector<double> y(y0.begin(), y0.end()), ynew(n), tmp(n), err(n);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);

  if (guard && !guard(t0, y)) throw DomainExit("initial state outside the domain", t0);
  rhs(t0, y, k1);
  if (!all_finite(k1)) throw DomainError("non-finite vector field at the initial state");
  sol.push(t0, y, k1);
  if (t1 == t0) return sol;

  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;

  double h = options.initial_step;
  if (h <= 0.0) {
    // Hairer-Wanner starting step heuristic.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = options.atol + options.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / std::max<double>(1.0, static_cast<double>(n)));
    d1 = std::sqrt(d1 / std::max<double>(1.0, static_cast<double>(n)));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, span);
    h = std::max(h, 1e-10 * span);
  }
  h = std::min(h, options.max_step);

  std::size_t steps = 0;
  bool last_rejected = false;
  while (dir * (t1 - t) > 0.0) {
    if (++steps > options.max_steps) throw StepUnderflow("step budget exhausted", t);
    const double remaining = std::abs(t1 - t);
    bool final_step = false;
    if (h >= remaining) {
      h = remaining;
      final_step = true;
    }
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_step) {
      if (last_rejected) throw DomainExit("integration halted at the domain boundary", t);
      throw StepUnderflow("step size underflow", t);
    }
    const double hs = dir * h;

    bool stage_ok = true;
    try {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * a21 * k1[i];
      rhs(t + c2 * hs, tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      rhs(t + c3 * hs, tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      rhs(t + c4 * hs, tmp, k4);
      for (std::size_t i = 0; i < n; ++i) {
        tmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      }
      rhs(t + c5 * hs, tmp, k5);
      for (std::size_t i = 0; i < n; ++i) {
        tmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      rhs(t + hs, tmp, k6);
      for (std::size_t i = 0; i < n; ++i) {
        ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      }
      const double tnew = final_step ? t1 : t + hs;
      if (guard && !guard(tnew, ynew)) {
        stage_ok = false;
      } else {
        rhs(tnew, ynew, k7);
      }
    } catch (const DomainError&) {
      stage_ok = false;
    } catch (const RankDeficiency&) {
      stage_ok = false;
    }
    if (stage_ok) stage_ok = all_finite(ynew) && all_finite(k7);
    if (!stage_ok) {
      h *= 0.25;
      last_rejected = true;
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
    const double en = error_norm(err, y, ynew, options);
    if (en <= 1.0) {
      t = final_step ? t1 : t + hs;
      y.swap(ynew);
      k1.swap(k7);
      sol.push(t, y, k1);
      if (monitor) monitor(t, y);
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h = std::min(h * (last_rejected ? std::min(fac, 1.0) : fac), options.max_step);
      last_rejected = false;
    } else {
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
      last_rejected = false;
    }
  }
  return sol;
}

}  // namespace slitbundle
