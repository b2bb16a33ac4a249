#include "slitbundle/verification.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "slitbundle/distribution.hpp"
#include "slitbundle/error.hpp"

namespace slitbundle {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng()); }

Vec random_vec(int size, std::mt19937_64& rng, double scale) {
  Vec v(size);
  for (int i = 0; i < size; ++i) v[i] = uniform(rng, -scale, scale);
  return v;
}

/// Quadratic polynomial map R^vars -> R^outs with dense coefficients.
struct Quadratic {
  int vars = 0;
  int outs = 0;
  std::vector<double> coef;  // per output: constant, linear (vars), upper-triangular quadratic

  int stride() const { return 1 + vars + vars * (vars + 1) / 2; }

  static Quadratic random(int vars, int outs, std::mt19937_64& rng) {
    Quadratic p{vars, outs, {}};
    p.coef.resize(static_cast<std::size_t>(outs * p.stride()));
    std::size_t c = 0;
    for (int m = 0; m < outs; ++m) {
      p.coef[c++] = uniform(rng, -0.5, 0.5);
      for (int i = 0; i < vars; ++i) p.coef[c++] = uniform(rng, -0.5, 0.5);
      for (int i = 0; i < vars * (vars + 1) / 2; ++i) p.coef[c++] = uniform(rng, -0.25, 0.25);
    }
    return p;
  }

  void eval(std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> out) const {
    std::vector<Dual> z(q.begin(), q.end());
    z.insert(z.end(), a.begin(), a.end());
    std::size_t c = 0;
    for (int m = 0; m < outs; ++m) {
      Dual acc = coef[c++];
      for (int i = 0; i < vars; ++i) acc += coef[c++] * z[static_cast<std::size_t>(i)];
      for (int i = 0; i < vars; ++i) {
        for (int j = i; j < vars; ++j) {
          acc += coef[c++] * z[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(j)];
        }
      }
      out[static_cast<std::size_t>(m)] = acc;
    }
  }
};

BundleState random_state(const System& sys, const Point& q, std::mt19937_64& rng) {
  return {q, random_fiber(sys.rank(), rng)};
}

double normalized(const Vec& diff, const Vec& reference) { return diff.norm() / std::max(1.0, reference.norm()); }

Vec stack(const Vec& top, const Vec& bottom) {
  Vec out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

/// Runs `body` for each sample point, tracking the maximum error and skips.
template <class Body>
IdentityCheck run_check(const System& sys, const char* name, double tol, int trials, std::uint64_t seed, Body body) {
  IdentityCheck check;
  check.name = name;
  check.tolerance = tol;
  std::mt19937_64 rng(seed);
  const auto points = sample_points(sys, trials, seed);
  for (const auto& p : points) {
    try {
      check.max_error = std::max(check.max_error, body(p, rng));
      ++check.samples;
    } catch (const DomainError&) {
      ++check.skipped;
    } catch (const DomainExit&) {
      ++check.skipped;
    }
  }
  return check;
}

}  // namespace

bool IdentityReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
}

std::string IdentityReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["system"] = system;
  doc["seed"] = seed;
  doc["trials"] = trials;
  doc["passed"] = passed();
  doc["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    doc["checks"].push_back({{"name", c.name},
                             {"samples", c.samples},
                             {"skipped", c.skipped},
                             {"max_error", c.max_error},
                             {"tolerance", c.tolerance},
                             {"passed", c.passed()}});
  }
  return doc.dump(2);
}

Vec random_fiber(int k, std::mt19937_64& rng) {
  Vec a = random_vec(k, rng, 1.0);
  while (a.norm() < 0.2) a = random_vec(k, rng, 1.0);
  return a;
}

BundleField random_polynomial_field(const System& sys, std::mt19937_64& rng, bool vertical) {
  const int n = sys.dim, k = sys.rank();
  BundleField f;
  f.dim = n;
  f.rank = k;
  const Quadratic conn = Quadratic::random(n + k, k, rng);
  if (vertical) {
    f.fn = [conn](std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> base, std::span<Dual> c) {
      std::fill(base.begin(), base.end(), Dual(0.0));
      conn.eval(q, a, c);
    };
  } else {
    const Quadratic b = Quadratic::random(n + k, n, rng);
    f.fn = [conn, b](std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> base, std::span<Dual> c) {
      b.eval(q, a, base);
      conn.eval(q, a, c);
    };
  }
  return f;
}

BundleMorphism random_morphism(const System& sys, FiberTarget target, std::mt19937_64& rng) {
  const int n = sys.dim, k = sys.rank();
  BundleMorphism b;
  b.target = target;
  b.fiber_dim = target == FiberTarget::Distribution ? k : target == FiberTarget::Tangent ? n : 2;
  const Quadratic p = Quadratic::random(n + k, b.fiber_dim, rng);
  b.fn = [p](std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> out) { p.eval(q, a, out); };
  return b;
}

RawTangent raw_bracket(const System& sys, const BundleField& x, const BundleField& y, const BundleState& s) {
  const int n = sys.dim, k = sys.rank();
  auto field = [&](const BundleField& f, const Vec& z) {
    const RawTangent r = raw_field(sys, f, BundleState{Point(Vec(z.head(n))), z.tail(k)});
    return stack(r.qdot, r.adot);
  };
  auto derivative = [&](const BundleField& f, const Vec& z, const Vec& d) -> Vec {
    const double len = d.norm();
    if (len == 0.0) return Vec::Zero(n + k);
    const Vec u = d / len;
    auto central = [&](double h) { return Vec((field(f, z + h * u) - field(f, z - h * u)) / (2.0 * h)); };
    const double h = 1e-3;
    return len * (4.0 * central(0.5 * h) - central(h)) / 3.0;
  };
  const Vec z = stack(s.q.coords, s.a);
  const Vec bracket = derivative(y, z, field(x, z)) - derivative(x, z, field(y, z));
  return {bracket.head(n), bracket.tail(k)};
}

IdentityCheck check_decomposition(const System& sys, int trials, std::uint64_t seed) {
  return run_check(sys, "decomposition", tolerance::kDecomposition, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     const BundleState s = random_state(sys, p, rng);
                     const RawTangent x{random_vec(sys.dim, rng, 1.0), random_vec(sys.rank(), rng, 1.0)};
                     const BundleTangent parts = split(sys, s, x);
                     const RawTangent h = to_raw(sys, horizontal_lift(sys, s, parts.base));
                     const RawTangent v = vertical_lift(s, parts.conn);
                     const Vec back = stack(h.qdot + v.qdot, h.adot + v.adot);
                     const Vec orig = stack(x.qdot, x.adot);
                     return normalized(back - orig, orig);
                   });
}

IdentityCheck check_vertical_inverse(const System& sys, int trials, std::uint64_t seed) {
  return run_check(sys, "connector_of_vertical_lift", tolerance::kVerticalInverse, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     const BundleState s = random_state(sys, p, rng);
                     const Vec c = random_vec(sys.rank(), rng, 1.0);
                     return normalized(connector(sys, s, vertical_lift(s, c)) - c, c);
                   });
}

IdentityCheck check_projector(const System& sys, int trials, std::uint64_t seed) {
  return run_check(sys, "projector", tolerance::kProjector, trials, seed, [&](const Point& p, std::mt19937_64&) {
    const Mat proj = projector(sys, p);
    const Mat g = sys.metric_matrix(p);
    const double idem = (proj * proj - proj).norm();
    const double adjoint = (g * proj - proj.transpose() * g).norm() / std::max(1.0, g.norm());
    return std::max(idem, adjoint);
  });
}

IdentityCheck check_composite_formula(const System& sys, int trials, std::uint64_t seed) {
  int index = 0;
  return run_check(sys, "composite_tangent_map", tolerance::kComposite, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     static constexpr FiberTarget kTargets[] = {FiberTarget::Distribution, FiberTarget::Tangent,
                                                                FiberTarget::Trivial};
                     const FiberTarget target = kTargets[index++ % 3];
                     const BundleState s = random_state(sys, p, rng);
                     const BundleMorphism b = random_morphism(sys, target, rng);
                     const RawTangent x{random_vec(sys.dim, rng, 1.0), random_vec(sys.rank(), rng, 1.0)};
                     const BundleTangent parts = split(sys, s, x);
                     const Vec lhs = tangent_map_connector(sys, b, s, x);
                     const Vec rhs = fiber_derivative(b, s, parts.conn) + parallel_derivative(sys, b, s, parts.base);
                     return normalized(lhs - rhs, lhs);
                   });
}

IdentityCheck check_vertical_bracket(const System& sys, int trials, std::uint64_t seed) {
  const BundleField xd = nonholonomic_bundle_field(sys);
  return run_check(sys, "bracket_with_vertical", tolerance::kVerticalBracket, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     const BundleState s = random_state(sys, p, rng);
                     const BundleField y = random_polynomial_field(sys, rng, true);
                     const BundleTangent oracle = split(sys, s, raw_bracket(sys, xd, y, s));
                     const Vec v = sys.ambient(s.q, s.a);
                     const Vec conn = parallel_derivative(sys, y.connector_part(), s, v);
                     const Vec base = -sys.ambient(s.q, y(s).conn);
                     return std::max(normalized(oracle.conn - conn, oracle.conn),
                                     normalized(oracle.base - base, oracle.base));
                   });
}

IdentityCheck check_bundle_bracket(const System& sys, int trials, std::uint64_t seed) {
  int index = 0;
  return run_check(sys, "bundle_bracket", tolerance::kBundleBracket, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     const BundleState s = random_state(sys, p, rng);
                     const BundleField x = index++ % 2 == 0
                                               ? controlled_bundle_field(sys, random_vec(sys.rank(), rng, 1.0))
                                               : random_polynomial_field(sys, rng, false);
                     const BundleField y = random_polynomial_field(sys, rng, false);
                     const BundleTangent oracle = split(sys, s, raw_bracket(sys, x, y, s));
                     const BundleTangent formula = bundle_bracket(sys, x, y, s);
                     const Vec expected = stack(oracle.base, oracle.conn);
                     return normalized(stack(formula.base, formula.conn) - expected, expected);
                   });
}

IdentityCheck check_nonholonomic_agreement(const System& sys, int trials, std::uint64_t seed) {
  const BundleField xd = nonholonomic_bundle_field(sys);
  return run_check(sys, "nonholonomic_two_formulations", tolerance::kNonholonomic, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     const BundleState s = random_state(sys, p, rng);
                     const RawTangent lift = raw_field(sys, xd, s);
                     const RawTangent spray = spray_projection(sys, s);
                     const Vec expected = stack(lift.qdot, lift.adot);
                     return normalized(stack(spray.qdot, spray.adot) - expected, expected);
                   });
}

IdentityCheck check_speed_conservation(const System& sys, int trials, std::uint64_t seed) {
  const int n = sys.dim, k = sys.rank();
  return run_check(sys, "speed_conservation", tolerance::kSpeed, trials, seed,
                   [&](const Point& p, std::mt19937_64& rng) {
                     const BundleState s = random_state(sys, p, rng);
                     const OdeSolution sol = integrate_arc(sys, s, SecondOrderControl{Vec::Zero(k)}, 1.0);
                     const double speed0 = sys.norm(s.q, sys.ambient(s.q, s.a));
                     double drift = 0.0;
                     for (std::size_t i = 0; i < sol.size(); ++i) {
                       const auto y = sol.state(i);
                       const Point q(Eigen::Map<const Vec>(y.data(), n));
                       const Vec a = Eigen::Map<const Vec>(y.data() + n, k);
                       drift = std::max(drift, std::abs(sys.norm(q, sys.ambient(q, a)) - speed0));
                     }
                     return drift / speed0;
                   });
}

IdentityCheck check_metric_compatibility(const System& sys, int trials, std::uint64_t seed) {
  const int n = sys.dim;
  auto gram = [&](const Vec& q) {
    const Point pt(q);
    const Mat e = sys.frame_matrix(pt);
    return Mat(e.transpose() * sys.metric_matrix(pt) * e);
  };
  return run_check(sys, "metric_compatibility", tolerance::kMetricCompat, trials, seed,
                   [&](const Point& p, std::mt19937_64&) {
                     const ProjectedCoeffs coeffs = projected_coeffs(sys, p);
                     const Mat g0 = gram(p.coords);
                     double worst = 0.0;
                     for (int j = 0; j < n; ++j) {
                       const Vec ej = Vec::Unit(n, j);
                       auto central = [&](double h) {
                         return Mat((gram(p.coords + h * ej) - gram(p.coords - h * ej)) / (2.0 * h));
                       };
                       const double h = 1e-3;
                       const Mat lhs = (4.0 * central(0.5 * h) - central(h)) / 3.0;
                       const Mat& c = coeffs.coeffs[static_cast<std::size_t>(j)];
                       const Mat rhs = c.transpose() * g0 + g0 * c;
                       worst = std::max(worst, (lhs - rhs).norm() / std::max(1.0, lhs.norm()));
                     }
                     return worst;
                   });
}

IdentityReport verify_identities(const System& sys, int trials, std::uint64_t seed) {
  IdentityReport report;
  report.system = sys.name;
  report.seed = seed;
  report.trials = trials;
  report.checks = {
      check_decomposition(sys, trials, seed),
      check_vertical_inverse(sys, trials, seed),
      check_projector(sys, trials, seed),
      check_composite_formula(sys, trials, seed),
      check_vertical_bracket(sys, trials, seed),
      check_bundle_bracket(sys, trials, seed),
      check_nonholonomic_agreement(sys, trials, seed),
      check_speed_conservation(sys, trials, seed),
      check_metric_compatibility(sys, trials, seed),
  };
  return report;
}

}  // namespace slitbundle
