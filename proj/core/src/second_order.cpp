#include "slitbundle/second_order.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "geometry_kernel.hpp"
#include "slitbundle/distribution.hpp"
#include "slitbundle/error.hpp"

namespace slitbundle {

namespace {

void check_slit(const BundleState& s, double slit_eps) {
  if (!(s.a.norm() >= slit_eps)) throw SlitViolation("fiber vector norm below the slit threshold");
}

void check_state(const System& sys, const BundleState& s) {
  if (s.dim() != sys.dim || s.rank() != sys.rank()) throw ConfigError("bundle state dimension mismatch");
}

// sum_i a_i E_i(q) with dual q and a.
void frame_combination(const System& sys, std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> out) {
  const int n = sys.dim;
  std::array<Dual, kMaxDualDirections> e;
  for (int l = 0; l < n; ++l) out[static_cast<std::size_t>(l)] = Dual(0.0);
  for (int i = 0; i < sys.rank(); ++i) {
    sys.frame[static_cast<std::size_t>(i)].evaluator().eval(q, std::span<Dual>(e.data(), static_cast<std::size_t>(n)));
    for (int l = 0; l < n; ++l) out[static_cast<std::size_t>(l)] += e[static_cast<std::size_t>(l)] * a[static_cast<std::size_t>(i)];
  }
}

}  // namespace

BundleTangent nonholonomic_field(const System& sys, const BundleState& s, double slit_eps) {
  check_state(sys, s);
  check_slit(s, slit_eps);
  return {s, sys.ambient(s.q, s.a), Vec::Zero(sys.rank())};
}

BundleTangent controlled_field(const System& sys, const BundleState& s, const SecondOrderControl& u, double slit_eps) {
  check_state(sys, s);
  check_slit(s, slit_eps);
  if (u.u.size() != sys.rank()) throw ConfigError("control dimension must equal the frame rank");
  return {s, sys.ambient(s.q, s.a), u.u};
}

void controlled_rhs(const System& sys, std::span<const double> u, std::span<const double> y, std::span<double> dy) {
  const auto n = static_cast<std::size_t>(sys.dim);
  const auto k = static_cast<std::size_t>(sys.rank());
  const auto q = y.first(n);
  const auto a = y.subspan(n, k);
  std::array<double, kMaxDualDirections> e{};
  for (std::size_t l = 0; l < n; ++l) dy[l] = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sys.frame[i].eval(q, {e.data(), n});
    for (std::size_t l = 0; l < n; ++l) dy[l] += e[l] * a[i];
  }
  const auto adot = dy.subspan(n, k);
  detail::connection_term_into(sys, q, dy.first(n), a, adot);
  for (std::size_t m = 0; m < k; ++m) adot[m] = u[m] - adot[m];
}

BundleField nonholonomic_bundle_field(const System& sys) {
  return controlled_bundle_field(sys, Vec::Zero(sys.rank()));
}

BundleField controlled_bundle_field(const System& sys, const Vec& u) {
  BundleField f;
  f.dim = sys.dim;
  f.rank = sys.rank();
  f.fn = [sys, u](std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> base, std::span<Dual> conn) {
    frame_combination(sys, q, a, base);
    for (std::size_t m = 0; m < conn.size(); ++m) conn[m] = Dual(u[static_cast<Eigen::Index>(m)]);
  };
  return f;
}

BundleField horizontal_lift_field(const System& sys, const VectorField& x, double tol) {
  if (x.dim() != sys.dim) throw ConfigError("field dimension does not match the system");
  BundleField f;
  f.dim = sys.dim;
  f.rank = sys.rank();
  f.fn = [sys, x, tol](std::span<const Dual> q, std::span<const Dual>, std::span<Dual> base, std::span<Dual> conn) {
    x.evaluator().eval(q, base);
    const int n = sys.dim;
    Point p(n > 0 ? Vec(n) : Vec());
    Vec v(n);
    for (int l = 0; l < n; ++l) {
      p.coords[l] = q[static_cast<std::size_t>(l)].value;
      v[l] = base[static_cast<std::size_t>(l)].value;
    }
    const Vec off = v - projector(sys, p) * v;
    if (off.norm() > tol * std::max(1.0, v.norm())) throw DomainError("vector field is not D-valued");
    for (auto& c : conn) c = Dual(0.0);
  };
  return f;
}

RawTangent spray_projection(const System& sys, const BundleState& s) {
  check_state(sys, s);
  const int n = sys.dim, k = sys.rank();
  const Vec v = sys.ambient(s.q, s.a);
  // Geodesic spray at v: qdot = v, vdot = -Gamma(v, v).
  const Vec vdot = -levi_civita_term(sys, s.q, v, v);

  detail::FrameData<Dual> f;
  f.n = n;
  f.k = k;
  f.euclidean = sys.metric.is_euclidean();
  f.E = detail::Dense<Dual>(n, k);
  std::vector<Dual> x(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = Dual::directional(s.q.coords[i], v[i]);
  for (int i = 0; i < k; ++i) {
    sys.frame[static_cast<std::size_t>(i)].evaluator().eval(std::span<const Dual>(x), std::span<Dual>(out));
    for (int l = 0; l < n; ++l) f.E(l, i) = out[static_cast<std::size_t>(l)];
  }
  if (!f.euclidean) {
    f.g = detail::Dense<Dual>(n, n);
    std::vector<Dual> g(static_cast<std::size_t>(n * n));
    sys.metric.evaluator().eval(std::span<const Dual>(x), std::span<Dual>(g));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) f.g(r, c) = g[static_cast<std::size_t>(r * n + c)];
    }
  }
  const auto L = detail::left_inverse(f);
  RawTangent t{v, Vec(k)};
  for (int m = 0; m < k; ++m) {
    Dual c(0.0);
    for (int l = 0; l < n; ++l) c += L(m, l) * Dual::directional(v[l], vdot[l]);
    t.adot[m] = c.d(0);
  }
  return t;
}

double chord_min_norm(std::span<const double> x0, std::span<const double> x1) {
  double dd = 0.0, xd = 0.0, xx = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double d = x1[i] - x0[i];
    dd += d * d;
    xd += x0[i] * d;
    xx += x0[i] * x0[i];
  }
  const double s = dd > 0.0 ? std::clamp(-xd / dd, 0.0, 1.0) : 0.0;
  return std::sqrt(std::max(0.0, xx + 2.0 * s * xd + s * s * dd));
}

double hermite_min_norm(std::span<const double> x0, std::span<const double> d0, std::span<const double> x1,
                        std::span<const double> d1, double h, int pieces) {
  const std::size_t k = x0.size();
  std::vector<double> prev(x0.begin(), x0.end()), cur(k);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= pieces; ++j) {
    const double s = static_cast<double>(j) / pieces, s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    for (std::size_t i = 0; i < k; ++i) cur[i] = h00 * x0[i] + h10 * h * d0[i] + h01 * x1[i] + h11 * h * d1[i];
    best = std::min(best, chord_min_norm(prev, cur));
    prev.swap(cur);
  }
  return best;
}

OdeSolution integrate_arc(const System& sys, const BundleState& s0, const SecondOrderControl& u, double duration,
                          const OdeOptions& options, double slit_eps) {
  check_state(sys, s0);
  check_slit(s0, slit_eps);
  if (u.u.size() != sys.rank()) throw ConfigError("control dimension must equal the frame rank");
  if (!sys.contains(s0.q)) throw DomainExit("arc starts outside the system domain", 0.0);
  const int n = sys.dim, k = sys.rank();
  Vec y0(n + k);
  y0 << s0.q.coords, s0.a;
  const std::span<const double> uu(u.u.data(), static_cast<std::size_t>(k));
  OdeRhs rhs = [&sys, uu](double, std::span<const double> y, std::span<double> dy) { controlled_rhs(sys, uu, y, dy); };
  OdeGuard guard;
  if (!sys.domain.unbounded()) {
    guard = [&sys, n](double, std::span<const double> y) { return sys.domain.contains(y.first(static_cast<std::size_t>(n))); };
  }
  OdeMonitor monitor = [n, k, slit_eps](double, std::span<const double> y) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += y[static_cast<std::size_t>(n + i)] * y[static_cast<std::size_t>(n + i)];
    if (!(std::sqrt(s) >= slit_eps)) throw SlitViolation("trajectory left the slit bundle");
  };
  OdeSolution sol =
      integrate_dopri5(rhs, 0.0, {y0.data(), static_cast<std::size_t>(n + k)}, duration, options, guard, monitor);
  const auto fiber = [n, k](std::span<const double> y) {
    return y.subspan(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
  };
  for (std::size_t i = 1; i < sol.size(); ++i) {
    const double h = sol.time(i) - sol.time(i - 1);
    if (!(hermite_min_norm(fiber(sol.state(i - 1)), fiber(sol.derivative(i - 1)), fiber(sol.state(i)),
                           fiber(sol.derivative(i)), h) >= slit_eps)) {
      throw SlitViolation("trajectory crosses the zero section between integrator steps");
    }
  }
  return sol;
}

BundleTrajectory integrate(const System& sys, const BundleState& s0, std::span<const ControlArc> schedule,
                           const OdeOptions& options, double slit_eps) {
  const int n = sys.dim, k = sys.rank();
  BundleTrajectory traj;
  BundleState s = s0;
  double t0 = 0.0;
  int arc = 0;
  for (const auto& entry : schedule) {
    const auto sol = integrate_arc(sys, s, entry.control, entry.duration, options, slit_eps);
    for (std::size_t i = 0; i < sol.size(); ++i) {
      const auto y = sol.state(i);
      const auto dy = sol.derivative(i);
      BundleSample smp;
      smp.t = t0 + sol.time(i);
      smp.q = Eigen::Map<const Vec>(y.data(), n);
      smp.a = Eigen::Map<const Vec>(y.data() + n, k);
      smp.qdot = Eigen::Map<const Vec>(dy.data(), n);
      smp.arc = arc;
      traj.samples.push_back(std::move(smp));
    }
    s = BundleState{Point(traj.samples.back().q), traj.samples.back().a};
    t0 += entry.duration;
    ++arc;
  }
  traj.end = s;
  return traj;
}

ReachabilityRank reachability(const System& sys, const BundleState& s, int depth, double tol) {
  check_state(sys, s);
  if (depth < 1) throw ConfigError("reachability depth must be at least 1");
  const int n = sys.dim, k = sys.rank(), dim = n + k;
  const int order = depth + 1;
  const JetSpace& space = JetSpace::get(dim, order + 1);
  const auto f = detail::frame_jets(sys, s.q, space, order);
  const auto gamma = detail::christoffel(f);
  const auto L = detail::left_inverse(f);
  const auto A = detail::projected(f, gamma, L);

  std::vector<Jet> a;
  for (int i = 0; i < k; ++i) a.push_back(Jet::variable(space, n + i, s.a[i], order));

  // The span of left-nested brackets of depth <= d depends only on the linear
  // span of the generators, and span{X_D, X_{+-e_i}} = span{X_D, (0, e_i)}.
  using Word = std::vector<Jet>;
  std::vector<Word> gens;
  Word xd(static_cast<std::size_t>(dim), Jet(0.0));
  std::vector<Jet> qdot(static_cast<std::size_t>(n), Jet(0.0));
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < k; ++i) qdot[static_cast<std::size_t>(l)] += f.E(l, i) * a[static_cast<std::size_t>(i)];
    xd[static_cast<std::size_t>(l)] = qdot[static_cast<std::size_t>(l)];
  }
  const auto corr = detail::contract<Jet>(A, qdot, a);
  for (int m = 0; m < k; ++m) xd[static_cast<std::size_t>(n + m)] = -corr[static_cast<std::size_t>(m)];
  gens.push_back(std::move(xd));
  for (int i = 0; i < k; ++i) {
    Word v(static_cast<std::size_t>(dim), Jet(0.0));
    v[static_cast<std::size_t>(n + i)] = Jet(1.0);
    gens.push_back(std::move(v));
  }

  auto scale_of = [](const Word& w) {
    double m = 0.0;
    for (const auto& c : w) m = std::max(m, c.max_abs());
    return m;
  };
  double scale = 0.0;
  for (const auto& g : gens) scale = std::max(scale, scale_of(g));
  const double zero_tol = 1e-12 * std::max(1.0, scale);

  std::vector<Vec> cols;
  auto rank_now = [&] {
    Mat m(dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
    return numerical_rank(m, tol);
  };
  auto push = [&](const Word& w) {
    Vec v(dim);
    for (int l = 0; l < dim; ++l) v[l] = w[static_cast<std::size_t>(l)].value();
    cols.push_back(std::move(v));
  };

  ReachabilityRank r;
  for (const auto& g : gens) push(g);
  r.rank = rank_now();
  if (r.rank == dim) {
    r.depth_attained = 1;
    return r;
  }
  std::vector<Word> level = gens;
  for (int d = 2; d <= depth; ++d) {
    std::vector<Word> next;
    if (d == 2) {
      for (std::size_t i = 0; i < gens.size(); ++i) {
        for (std::size_t j = i + 1; j < gens.size(); ++j) next.push_back(jet_bracket(gens[i], gens[j]));
      }
    } else {
      for (const auto& w : level) {
        for (const auto& g : gens) next.push_back(jet_bracket(w, g));
      }
    }
    std::erase_if(next, [&](const Word& w) { return scale_of(w) <= zero_tol; });
    for (const auto& w : next) push(w);
    r.rank = rank_now();
    if (r.rank == dim) {
      r.depth_attained = d;
      return r;
    }
    if (next.empty()) break;
    level = std::move(next);
  }
  return r;
}

int reachability_rank(const System& sys, const BundleState& s, int depth, double tol) {
  return reachability(sys, s, depth, tol).rank;
}

}  // namespace slitbundle
