#include "slitbundle/planner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "slitbundle/error.hpp"

namespace slitbundle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxState = 2 * kMaxDualDirections;

using State = std::array<double, kMaxState>;

// Shooting problem data shared (read-only) by every restart.
struct Problem {
  const System* sys = nullptr;
  int n = 0, k = 0, N = 0;
  Vec p, a_p, q, a_target, v_target;
  const Domain* region = nullptr;
  double penalty_floor = 0.0;  // soft speed floor used in the residual
  double hard_floor = 0.0;     // speed floor checked at acceptance
  double region_floor = 1e-3;
  double slit_eps = kDefaultSlitEps;
  double tau_max = 2.0;
  double tol_pos = 1e-6, tol_vel = 1e-6;
  int rk_steps = 16;
  OdeOptions ode;

  int vars() const { return N * (k + 1); }
  int residual_size() const { return n + k + N + (region ? N : 0); }
};

double speed_of(const Problem& P, std::span<const double> q, std::span<const double> qdot) {
  const System& sys = *P.sys;
  if (sys.metric.is_euclidean()) {
    double s = 0.0;
    for (int l = 0; l < P.n; ++l) s += qdot[static_cast<std::size_t>(l)] * qdot[static_cast<std::size_t>(l)];
    return std::sqrt(s);
  }
  const Point at(Eigen::Map<const Vec>(q.data(), P.n));
  return sys.norm(at, Eigen::Map<const Vec>(qdot.data(), P.n));
}

// Per-segment state of one simulation: segment start states and penalty statistics.
struct Cache {
  std::vector<State> starts;  // N + 1 entries
  std::vector<double> min_speed, min_margin;
  bool ok = false;
};

// Node bookkeeping shared by both integrators. Returns false on a slit or domain failure.
bool visit_node(const Problem& P, std::span<const double> y, std::span<const double> dy, double& speed, double& margin) {
  const auto n = static_cast<std::size_t>(P.n);
  double an = 0.0;
  for (int i = 0; i < P.k; ++i) an += y[n + static_cast<std::size_t>(i)] * y[n + static_cast<std::size_t>(i)];
  if (!std::isfinite(an) || !(std::sqrt(an) >= P.slit_eps)) return false;
  if (!P.sys->domain.contains(y.first(n))) return false;
  speed = std::min(speed, speed_of(P, y.first(n), dy.first(n)));
  if (P.region) margin = std::min(margin, P.region->margin(y.first(n)));
  return true;
}

// Classical RK4 with a fixed number of steps: the end state is a smooth
// function of (u, tau), which keeps finite-difference Jacobians clean.
bool segment_fixed(const Problem& P, const State& y0, std::span<const double> u, double tau, State& y1, double& speed,
                   double& margin) {
  const int d = P.n + P.k;
  const auto sd = static_cast<std::size_t>(d);
  State y = y0, k1{}, k2{}, k3{}, k4{}, tmp{}, y_prev{}, k_prev{};
  speed = kInf;
  margin = kInf;
  const int steps = tau > 0.0 ? P.rk_steps : 0;
  const double h = steps > 0 ? tau / steps : 0.0;
  const auto fiber = [&P](const State& x) {
    return std::span<const double>(x.data() + P.n, static_cast<std::size_t>(P.k));
  };
  try {
    for (int s = 0; s <= steps; ++s) {
      controlled_rhs(*P.sys, u, {y.data(), sd}, {k1.data(), sd});
      if (!visit_node(P, {y.data(), sd}, {k1.data(), sd}, speed, margin)) return false;
      if (s > 0 && !(hermite_min_norm(fiber(y_prev), fiber(k_prev), fiber(y), fiber(k1), h) >= P.slit_eps)) {
        return false;
      }
      if (s == steps) break;
      y_prev = y;
      k_prev = k1;
      for (int i = 0; i < d; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
      controlled_rhs(*P.sys, u, {tmp.data(), sd}, {k2.data(), sd});
      for (int i = 0; i < d; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
      controlled_rhs(*P.sys, u, {tmp.data(), sd}, {k3.data(), sd});
      for (int i = 0; i < d; ++i) tmp[i] = y[i] + h * k3[i];
      controlled_rhs(*P.sys, u, {tmp.data(), sd}, {k4.data(), sd});
      for (int i = 0; i < d; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  } catch (const Error&) {
    return false;
  }
  y1 = y;
  return true;
}

bool segment_adaptive(const Problem& P, const State& y0, std::span<const double> u, double tau, State& y1,
                      double& speed, double& margin) {
  const int d = P.n + P.k;
  const auto sd = static_cast<std::size_t>(d);
  speed = kInf;
  margin = kInf;
  if (!(tau > 0.0)) {
    State dy{};
    try {
      controlled_rhs(*P.sys, u, {y0.data(), sd}, {dy.data(), sd});
    } catch (const Error&) {
      return false;
    }
    if (!visit_node(P, {y0.data(), sd}, {dy.data(), sd}, speed, margin)) return false;
    y1 = y0;
    return true;
  }
  try {
    const BundleState s0{Point(Eigen::Map<const Vec>(y0.data(), P.n)), Eigen::Map<const Vec>(y0.data() + P.n, P.k)};
    const SecondOrderControl c{Eigen::Map<const Vec>(u.data(), P.k)};
    const auto sol = integrate_arc(*P.sys, s0, c, tau, P.ode, P.slit_eps);
    for (std::size_t i = 0; i < sol.size(); ++i) {
      if (!visit_node(P, sol.state(i), sol.derivative(i), speed, margin)) return false;
    }
    const auto end = sol.back();
    std::copy(end.begin(), end.end(), y1.begin());
  } catch (const Error&) {
    return false;
  }
  return true;
}

std::span<const double> control_of(const Problem& P, const std::vector<double>& z, int j) {
  return {z.data() + static_cast<std::size_t>(j * (P.k + 1)), static_cast<std::size_t>(P.k)};
}
double tau_of(const Problem& P, const std::vector<double>& z, int j) {
  return z[static_cast<std::size_t>(j * (P.k + 1) + P.k)];
}

State initial_state(const Problem& P) {
  State y{};
  for (int i = 0; i < P.n; ++i) y[static_cast<std::size_t>(i)] = P.p[i];
  for (int i = 0; i < P.k; ++i) y[static_cast<std::size_t>(P.n + i)] = P.a_p[i];
  return y;
}

// Simulates segments j0..N-1 starting from cache.starts[j0].
void simulate(const Problem& P, const std::vector<double>& z, int j0, bool adaptive, Cache& c) {
  if (c.starts.size() != static_cast<std::size_t>(P.N + 1)) {
    c.starts.assign(static_cast<std::size_t>(P.N + 1), State{});
    c.min_speed.assign(static_cast<std::size_t>(P.N), kInf);
    c.min_margin.assign(static_cast<std::size_t>(P.N), kInf);
    c.starts[0] = initial_state(P);
    j0 = 0;
  }
  c.ok = true;
  for (int j = j0; j < P.N; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const bool ok = adaptive ? segment_adaptive(P, c.starts[uj], control_of(P, z, j), tau_of(P, z, j), c.starts[uj + 1],
                                                c.min_speed[uj], c.min_margin[uj])
                             : segment_fixed(P, c.starts[uj], control_of(P, z, j), tau_of(P, z, j), c.starts[uj + 1],
                                             c.min_speed[uj], c.min_margin[uj]);
    if (!ok) {
      c.ok = false;
      return;
    }
  }
}

void assemble(const Problem& P, const Cache& c, Vec& r) {
  r.resize(P.residual_size());
  const State& end = c.starts.back();
  for (int i = 0; i < P.n; ++i) r[i] = end[static_cast<std::size_t>(i)] - P.q[i];
  for (int i = 0; i < P.k; ++i) r[P.n + i] = end[static_cast<std::size_t>(P.n + i)] - P.a_target[i];
  for (int j = 0; j < P.N; ++j) {
    r[P.n + P.k + j] = std::max(0.0, P.penalty_floor - c.min_speed[static_cast<std::size_t>(j)]);
    if (P.region) r[P.n + P.k + P.N + j] = std::max(0.0, P.region_floor - c.min_margin[static_cast<std::size_t>(j)]);
  }
}

bool evaluate(const Problem& P, const std::vector<double>& z, bool adaptive, Cache& c, Vec& r) {
  c.starts.clear();
  simulate(P, z, 0, adaptive, c);
  if (!c.ok) return false;
  assemble(P, c, r);
  return r.allFinite();
}

double endpoint_norm(const Problem& P, const Vec& r) { return r.head(P.n + P.k).norm(); }

bool on_target(const Problem& P, const Vec& r, double scale) {
  if (r.head(P.n).norm() > scale * P.tol_pos) return false;
  if (r.segment(P.n, P.k).norm() > scale * P.tol_vel) return false;
  return r.tail(r.size() - P.n - P.k).maxCoeff() <= 0.0;
}

// Forward-difference Jacobian of the fixed-step model; perturbing segment j
// only re-simulates segments j..N-1.
bool jacobian(const Problem& P, const std::vector<double>& z, const Cache& base, const Vec& r0, Mat& J) {
  const int m = P.residual_size(), nv = P.vars();
  J.setZero(m, nv);
  Cache c;
  Vec r;
  std::vector<double> zp = z;
  for (int v = 0; v < nv; ++v) {
    const int j = v / (P.k + 1);
    const bool is_tau = v % (P.k + 1) == P.k;
    const double x = z[static_cast<std::size_t>(v)];
    double h = 1e-6 * std::max(1.0, std::abs(x));
    if (is_tau && x + h > P.tau_max) h = -h;
    bool done = false;
    for (int attempt = 0; attempt < 2 && !done; ++attempt, h = -h) {
      if (is_tau && (x + h < 0.0 || x + h > P.tau_max)) continue;
      zp[static_cast<std::size_t>(v)] = x + h;
      c = base;
      simulate(P, zp, j, false, c);
      if (c.ok) {
        assemble(P, c, r);
        J.col(v) = (r - r0) / h;
        done = true;
      }
    }
    zp[static_cast<std::size_t>(v)] = x;
  }
  return true;
}

using Abandon = std::function<bool()>;

struct LmResult {
  std::vector<double> z;
  Vec r;
  bool valid = false;
  int iterations = 0;
  std::vector<double> trace;
};

void clamp_durations(const Problem& P, std::vector<double>& z) {
  for (int j = 0; j < P.N; ++j) {
    double& t = z[static_cast<std::size_t>(j * (P.k + 1) + P.k)];
    t = std::clamp(t, 0.0, P.tau_max);
  }
}

// Projected Levenberg-Marquardt. The residual comes from the fixed-step model
// (phase 1) or the adaptive integrator (phase 2); the Jacobian always comes
// from the fixed-step model.
LmResult levenberg_marquardt(const Problem& P, std::vector<double> z, bool adaptive, int max_iterations,
                             const Abandon& abandon, double target_scale) {
  LmResult out;
  clamp_durations(P, z);
  Cache cache, fixed;
  Vec r;
  if (!evaluate(P, z, adaptive, cache, r)) {
    out.z = z;
    return out;
  }
  double norm2 = r.squaredNorm();
  double lambda = adaptive ? 1e-8 : 1e-3;
  out.trace.push_back(std::sqrt(norm2));
  std::vector<double> history{norm2};
  Mat J;
  Vec r_fixed;
  int it = 0;
  for (; it < max_iterations; ++it) {
    if (on_target(P, r, target_scale) || (abandon && abandon())) break;
    if (adaptive) {
      if (!evaluate(P, z, false, fixed, r_fixed)) break;
      jacobian(P, z, fixed, r_fixed, J);
    } else {
      jacobian(P, z, cache, r, J);
    }
    const Mat JtJ = J.transpose() * J;
    const Vec g = J.transpose() * r;
    bool improved = false;
    while (lambda < 1e12) {
      Mat A = JtJ;
      for (int i = 0; i < A.rows(); ++i) A(i, i) += lambda * std::max(JtJ(i, i), 1e-9);
      const Vec step = -A.ldlt().solve(g);
      std::vector<double> zt = z;
      for (int i = 0; i < step.size(); ++i) zt[static_cast<std::size_t>(i)] += step[i];
      clamp_durations(P, zt);
      Cache ct;
      Vec rt;
      if (step.allFinite() && evaluate(P, zt, adaptive, ct, rt) && rt.squaredNorm() < norm2) {
        z = std::move(zt);
        cache = std::move(ct);
        r = std::move(rt);
        norm2 = r.squaredNorm();
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) break;
    out.trace.push_back(std::sqrt(norm2));
    history.push_back(norm2);
    // Stagnation: less than 0.1% progress over the last 20 iterations.
    if (history.size() > 20 && norm2 > 0.999 * history[history.size() - 21]) {
      ++it;
      break;
    }
  }
  out.z = std::move(z);
  out.r = std::move(r);
  out.valid = true;
  out.iterations = it;
  return out;
}

std::vector<double> pack(const Problem& P, const ShootingGuess& g) {
  std::vector<double> z(static_cast<std::size_t>(P.vars()), 0.0);
  for (int j = 0; j < P.N && j < static_cast<int>(g.durations.size()); ++j) {
    for (int m = 0; m < P.k; ++m) z[static_cast<std::size_t>(j * (P.k + 1) + m)] = g.controls[static_cast<std::size_t>(j)][m];
    z[static_cast<std::size_t>(j * (P.k + 1) + P.k)] = g.durations[static_cast<std::size_t>(j)];
  }
  return z;
}

struct RestartResult {
  bool ran = false;
  bool accepted = false;
  double residual = kInf;
  int iterations = 0;
  std::vector<double> z;
  std::vector<double> trace;
};

Problem make_problem(const System& sys, const PlanRequest& req) {
  const auto& o = req.options;
  if (o.segments < 1) throw ConfigError("segment count must be positive");
  if (o.restarts < 1) throw ConfigError("restart count must be positive");
  if (!(o.tau_max > 0.0)) throw ConfigError("maximum segment duration must be positive");
  Problem P;
  P.sys = &sys;
  P.n = sys.dim;
  P.k = sys.rank();
  P.N = o.segments;
  P.p = req.p.coords;
  P.q = req.q.coords;
  P.a_p = frame_coordinates(sys, req.p, req.v_p, o.slit_eps);
  P.a_target = frame_coordinates(sys, req.q, req.v_q, o.slit_eps);
  P.v_target = req.v_q;
  P.region = req.region ? &*req.region : nullptr;
  const double vmin = std::min(sys.norm(req.p, req.v_p), sys.norm(req.q, req.v_q));
  P.hard_floor = o.min_speed_fraction * vmin;
  P.penalty_floor = 2.0 * P.hard_floor;
  P.slit_eps = o.slit_eps;
  P.tau_max = o.tau_max;
  P.tol_pos = o.tol_pos;
  P.tol_vel = o.tol_vel;
  P.ode = o.ode;
  return P;
}

std::vector<ControlArc> schedule_of(const Problem& P, const std::vector<double>& z) {
  std::vector<ControlArc> arcs;
  for (int j = 0; j < P.N; ++j) {
    const double tau = tau_of(P, z, j);
    if (!(tau > 0.0)) continue;
    const auto u = control_of(P, z, j);
    arcs.push_back({SecondOrderControl{Eigen::Map<const Vec>(u.data(), P.k)}, tau});
  }
  return arcs;
}

PiecewisePath build_path(const Problem& P, const std::vector<double>& z) {
  PiecewisePath path;
  path.start = BundleState{Point(P.p), P.a_p};
  const auto schedule = schedule_of(P, z);
  const auto traj = integrate(*P.sys, path.start, schedule, P.ode, P.slit_eps);
  for (const auto& a : schedule) path.arcs.push_back({a.control, a.duration, {}});
  for (const auto& s : traj.samples) path.arcs[static_cast<std::size_t>(s.arc)].samples.push_back(s);
  return path;
}

// Hard acceptance checks on the integrated path.
bool accept(const Problem& P, const PiecewisePath& path) {
  const ValidationReport rep =
      validate(*P.sys, path, Point(P.q), P.v_target, P.region ? std::optional<Domain>(*P.region) : std::nullopt);
  return *rep.position_error <= P.tol_pos && *rep.velocity_error <= P.tol_vel && rep.min_speed >= P.hard_floor &&
         rep.min_fiber_norm >= P.slit_eps && rep.region_violations == 0 && rep.junction_velocity_jump == 0.0 &&
         rep.junction_position_jump == 0.0;
}

RestartResult run_restart(const Problem& P, const ShootingGuess& guess, int max_iterations, const Abandon& abandon) {
  RestartResult res;
  res.ran = true;
  const auto phase1 = levenberg_marquardt(P, pack(P, guess), false, max_iterations, abandon, 1e-4);
  res.iterations = phase1.iterations;
  res.trace = phase1.trace;
  res.z = phase1.z;
  if (!phase1.valid || (abandon && abandon())) return res;
  res.residual = endpoint_norm(P, phase1.r);
  if (!on_target(P, phase1.r, 1e3)) return res;
  const auto phase2 = levenberg_marquardt(P, phase1.z, true, 30, abandon, 0.05);
  if (!phase2.valid) return res;
  res.iterations += phase2.iterations;
  res.trace.insert(res.trace.end(), phase2.trace.begin(), phase2.trace.end());
  res.z = phase2.z;
  res.residual = endpoint_norm(P, phase2.r);
  try {
    res.accepted = accept(P, build_path(P, res.z));
  } catch (const Error&) {
    res.accepted = false;
  }
  return res;
}

bool reachable_at(const System& sys, const Point& x, const PlanOptions& o) {
  try {
    if (growth_vector(sys, x, o.check_depth).last() == sys.dim) return true;
    return orbit_dimension(sys, x, o.orbit_trials, o.seed).dimension == sys.dim;
  } catch (const Error&) {
    return false;
  }
}

// Min-norm fit of d by frame vectors and first brackets at b, as flow moves.
struct Move {
  int field;
  double duration;
};

std::vector<Move> compose_moves(const System& sys, const Point& b, const Vec& d, double* fit_error) {
  const int n = sys.dim, k = sys.rank();
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
  }
  Mat cols(n, k + static_cast<int>(pairs.size()));
  cols.leftCols(k) = sys.frame_matrix(b);
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    cols.col(k + static_cast<int>(c)) =
        lie_bracket(sys.frame[static_cast<std::size_t>(pairs[c].first)], sys.frame[static_cast<std::size_t>(pairs[c].second)], b).comps;
  }
  Eigen::JacobiSVD<Mat> svd(cols, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-7);
  const Vec c = svd.solve(d);
  if (fit_error) *fit_error = (cols * c - d).norm();
  const double tiny = 1e-12 * (1.0 + d.norm());
  std::vector<Move> moves;
  for (int i = 0; i < k; ++i) {
    if (std::abs(c[i]) > tiny) moves.push_back({i, c[i]});
  }
  Point at = b;
  if (!moves.empty()) {
    std::vector<FlowStep> steps;
    for (const auto& m : moves) steps.push_back({sys.frame[static_cast<std::size_t>(m.field)], m.duration});
    at = flow_composition(steps, b);
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double cij = c[k + static_cast<int>(p)];
    if (std::abs(cij) <= tiny) continue;
    const double s = std::sqrt(std::abs(cij));
    const auto [i, j] = pairs[p];
    const Vec want = cij * cols.col(k + static_cast<int>(p));
    double best = kInf;
    double sigma = 1.0;
    for (const double sg : {1.0, -1.0}) {
      const std::vector<FlowStep> block{{sys.frame[static_cast<std::size_t>(i)], s},
                                        {sys.frame[static_cast<std::size_t>(j)], sg * s},
                                        {sys.frame[static_cast<std::size_t>(i)], -s},
                                        {sys.frame[static_cast<std::size_t>(j)], -sg * s}};
      const double err = (flow_composition(block, at).coords - at.coords - want).norm();
      if (err < best) {
        best = err;
        sigma = sg;
      }
    }
    moves.push_back({i, s});
    moves.push_back({j, sigma * s});
    moves.push_back({i, -s});
    moves.push_back({j, -sigma * s});
  }
  return moves;
}

std::vector<Move> merge_moves(const std::vector<Move>& in) {
  std::vector<Move> out;
  for (const auto& m : in) {
    if (!out.empty() && out.back().field == m.field) {
      out.back().duration += m.duration;
    } else {
      out.push_back(m);
    }
  }
  std::erase_if(out, [](const Move& m) { return std::abs(m.duration) < 1e-12; });
  return out;
}

double base_error(const System& sys, const Point& p, const Point& q, const std::vector<Move>& moves) {
  std::vector<FlowStep> steps;
  for (const auto& m : moves) steps.push_back({sys.frame[static_cast<std::size_t>(m.field)], m.duration});
  try {
    return (flow_composition(steps, p).coords - q.coords).norm();
  } catch (const Error&) {
    return kInf;
  }
}

// Moves become segments whose fiber value ramps linearly between waypoints, so
// the average velocity over segment m is the move direction at cruise speed.
ShootingGuess guess_from_moves(const Problem& P, std::vector<Move> moves) {
  const double rho = 0.5 * (P.a_p.norm() + P.a_target.norm());
  std::vector<Move> split;
  for (const auto& m : moves) {
    const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(m.duration) / rho / (0.9 * P.tau_max))));
    for (int i = 0; i < pieces; ++i) split.push_back({m.field, m.duration / pieces});
  }
  if (static_cast<int>(split.size()) > P.N - 1) split.resize(static_cast<std::size_t>(std::max(0, P.N - 1)));
  ShootingGuess g;
  // Linear ramp of the fiber vector from w to next. A ramp that would pass
  // near zero is replaced by three pieces through dir +- c perp, which have the
  // same mean and stay off the zero section.
  const auto ramp = [&](const Vec& w, const Vec& next, double tau) {
    const Vec chord = next - w;
    const double gap = chord_min_norm({w.data(), static_cast<std::size_t>(P.k)}, {next.data(), static_cast<std::size_t>(P.k)});
    if (gap >= 0.3 * rho || P.k < 2 || chord.norm() == 0.0) {
      g.controls.push_back(chord / tau);
      g.durations.push_back(tau);
      return;
    }
    const Vec t = chord.normalized();
    Vec perp = Vec::Zero(P.k);
    for (int i = 0; i < P.k && perp.norm() < 0.5; ++i) {
      perp = Vec::Unit(P.k, i) - t[i] * t;
    }
    perp.normalize();
    const Vec mid = 0.5 * (w + next);
    const Vec m1 = mid + rho * perp, m2 = mid - rho * perp;
    for (const auto& [from, to] : {std::pair{w, m1}, {m1, m2}, {m2, next}}) {
      g.controls.push_back((to - from) / (tau / 3.0));
      g.durations.push_back(tau / 3.0);
    }
  };
  Vec w = P.a_p;
  for (const auto& m : split) {
    if (static_cast<int>(g.durations.size()) >= P.N - 1) break;
    const double tau = std::abs(m.duration) / rho;
    Vec dir = Vec::Zero(P.k);
    dir[m.field] = m.duration / tau;
    const Vec next = 2.0 * dir - w;
    ramp(w, next, tau);
    w = next;
  }
  if (static_cast<int>(g.durations.size()) > P.N - 1) {
    g.controls.resize(static_cast<std::size_t>(P.N - 1));
    g.durations.resize(static_cast<std::size_t>(P.N - 1));
  }
  if ((w - P.a_target).norm() > 1e-12 && static_cast<int>(g.durations.size()) < P.N) {
    g.controls.push_back((P.a_target - w) / std::min(0.3, P.tau_max));
    g.durations.push_back(std::min(0.3, P.tau_max));
  }
  while (static_cast<int>(g.durations.size()) < P.N) {
    g.controls.push_back(Vec::Zero(P.k));
    g.durations.push_back(0.0);
  }
  g.from_flows = true;
  return g;
}

double residual_of(const Problem& P, const ShootingGuess& g) {
  Cache c;
  Vec r;
  if (!evaluate(P, pack(P, g), true, c, r)) return kInf;
  return endpoint_norm(P, r);
}

ShootingGuess random_guess_for(const Problem& P, std::uint64_t seed, std::uint64_t stream) {
  std::mt19937_64 rng(seed + stream);
  auto uniform = [&rng] { return unit_uniform(rng()); };
  const double rho = std::max(P.a_p.norm(), P.a_target.norm());
  ShootingGuess g;
  for (int j = 0; j < P.N; ++j) {
    Vec u(P.k);
    for (int m = 0; m < P.k; ++m) u[m] = rho * (2.0 * uniform() - 1.0);
    g.controls.push_back(std::move(u));
    g.durations.push_back(std::min(P.tau_max, 0.1 + 0.7 * uniform()));
  }
  return g;
}

ShootingGuess flow_guess(const System& sys, const Problem& P, const PlanRequest& req) {
  const Vec d = req.q.coords - req.p.coords;
  std::vector<std::vector<Move>> candidates;
  try {
    candidates.push_back(merge_moves(compose_moves(sys, req.p, d, nullptr)));
  } catch (const Error&) {
  }
  // Detours: flow along a frame field first, fit there, and come back.
  for (int i = 0; i < sys.rank(); ++i) {
    for (const double t : {0.5, 1.0, -0.5, -1.0}) {
      try {
        const Point b = flow(sys.frame[static_cast<std::size_t>(i)], req.p, t).end;
        std::vector<Move> moves{{i, t}};
        const auto inner = compose_moves(sys, b, d, nullptr);
        moves.insert(moves.end(), inner.begin(), inner.end());
        moves.push_back({i, -t});
        candidates.push_back(merge_moves(moves));
      } catch (const Error&) {
      }
    }
  }
  double best = kInf;
  const std::vector<Move>* chosen = nullptr;
  for (const auto& c : candidates) {
    const double e = base_error(sys, req.p, req.q, c);
    if (e < best) {
      best = e;
      chosen = &c;
    }
  }
  ShootingGuess g;
  if (chosen) {
    g = guess_from_moves(P, *chosen);
    g.residual = residual_of(P, g);
  }
  if (!chosen || !std::isfinite(g.residual)) {
    g = random_guess_for(P, req.options.seed, 0);
    g.from_flows = false;
    g.residual = residual_of(P, g);
  }
  return g;
}

}  // namespace

BundleState PiecewisePath::end() const {
  if (arcs.empty() || arcs.back().samples.empty()) return start;
  const auto& s = arcs.back().samples.back();
  return {Point(s.q), s.a};
}

std::string to_string(PlanErrorKind kind) {
  switch (kind) {
    case PlanErrorKind::NotReachable:
      return "NotReachable";
    case PlanErrorKind::SlitViolation:
      return "SlitViolation";
    case PlanErrorKind::NoConvergence:
      break;
  }
  return "NoConvergence";
}

Vec frame_coordinates(const System& sys, const Point& q, const Vec& v, double slit_eps) {
  if (v.size() != sys.dim) throw ConfigError("velocity dimension must equal the chart dimension");
  const Mat E = sys.frame_matrix(q);
  const Mat g = sys.metric(q);
  const Mat etg = E.transpose() * g;
  const Vec a = (etg * E).ldlt().solve(etg * v);
  if (!(a.norm() >= slit_eps)) throw PlanError(PlanErrorKind::SlitViolation, "endpoint velocity is zero");
  if ((E * a - v).norm() > 1e-8 * std::max(1.0, v.norm())) {
    throw PlanError(PlanErrorKind::SlitViolation, "endpoint velocity does not lie in the distribution");
  }
  return a;
}

ShootingGuess plan_flow_composition(const System& sys, const PlanRequest& req) {
  const Problem P = make_problem(sys, req);
  return flow_guess(sys, P, req);
}

ShootingGuess random_guess(const System& sys, const PlanRequest& req, std::uint64_t stream) {
  const Problem P = make_problem(sys, req);
  ShootingGuess g = random_guess_for(P, req.options.seed, stream);
  g.residual = residual_of(P, g);
  return g;
}

double guess_residual(const System& sys, const PlanRequest& req, const ShootingGuess& guess) {
  return residual_of(make_problem(sys, req), guess);
}

int effective_threads(int requested) {
  int t = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SLITBUNDLE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) t = std::min(t, cap);
  }
  return std::max(1, t);
}

PiecewisePath plan(const System& sys, const PlanRequest& req) {
  const auto& o = req.options;
  if (req.p.dim() != sys.dim || req.q.dim() != sys.dim) throw ConfigError("endpoint dimension mismatch");
  for (const Point* x : {&req.p, &req.q}) {
    if (!sys.contains(*x)) throw ConfigError("endpoint outside the system domain");
    if (req.region && !req.region->contains(x->span())) throw ConfigError("endpoint outside the region");
  }
  const Problem P = make_problem(sys, req);

  if (req.p.coords == req.q.coords && req.v_p == req.v_q) {
    PiecewisePath path;
    path.start = BundleState{req.p, P.a_p};
    path.trivial = true;
    path.meta.restart = 0;
    path.meta.min_speed = sys.norm(req.p, req.v_p);
    path.meta.min_fiber_norm = P.a_p.norm();
    return path;
  }

  const bool checks = reachable_at(sys, req.p, o) && reachable_at(sys, req.q, o);
  // Failed checks only need enough shooting to rule out an easy success.
  const int restarts = checks ? o.restarts : std::min(o.restarts, 3);
  const int max_iterations = checks ? o.max_iterations : std::min(o.max_iterations, 60);

  const ShootingGuess warm = flow_guess(sys, P, req);
  std::vector<RestartResult> results(static_cast<std::size_t>(restarts));
  std::atomic<int> next{0};
  std::atomic<int> first_accepted{restarts};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= restarts) return;
      if (r > first_accepted.load()) continue;
      try {
        const ShootingGuess g = r == 0 ? warm : random_guess_for(P, o.seed, static_cast<std::uint64_t>(r));
        // A lower restart already won; this one can stop early.
        const Abandon abandon = [&first_accepted, r] { return first_accepted.load() < r; };
        results[static_cast<std::size_t>(r)] = run_restart(P, g, max_iterations, abandon);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      if (results[static_cast<std::size_t>(r)].accepted) {
        int cur = first_accepted.load();
        while (r < cur && !first_accepted.compare_exchange_weak(cur, r)) {
        }
      }
    }
  };
  const int threads = std::min(effective_threads(o.threads), restarts);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const int winner = first_accepted.load();
  if (winner < restarts) {
    const auto& res = results[static_cast<std::size_t>(winner)];
    PiecewisePath path = build_path(P, res.z);
    const ValidationReport rep = validate(sys, path, req.q, req.v_q, req.region);
    path.meta.position_error = *rep.position_error;
    path.meta.velocity_error = *rep.velocity_error;
    path.meta.residual = res.residual;
    path.meta.min_speed = rep.min_speed;
    path.meta.min_fiber_norm = rep.min_fiber_norm;
    path.meta.restart = winner;
    path.meta.iterations = res.iterations;
    path.meta.checks_passed = checks;
    path.meta.trace = res.trace;
    return path;
  }
  double best = kInf;
  int best_index = -1;
  for (int r = 0; r < restarts; ++r) {
    if (results[static_cast<std::size_t>(r)].residual < best) {
      best = results[static_cast<std::size_t>(r)].residual;
      best_index = r;
    }
  }
  if (!checks) {
    throw PlanError(PlanErrorKind::NotReachable,
                    "target not reachable: bracket and orbit checks fail at an endpoint and shooting did not converge",
                    best, best_index);
  }
  throw PlanError(PlanErrorKind::NoConvergence, "shooting did not converge within the restart budget", best, best_index);
}

ValidationReport validate(const System& sys, const PiecewisePath& path, const std::optional<Point>& target_q,
                          const std::optional<Vec>& target_v, const std::optional<Domain>& region) {
  ValidationReport rep;
  rep.trivial = path.trivial;
  rep.arcs = static_cast<int>(path.arcs.size());
  double min_speed = kInf, min_fiber = kInf;
  const BundleSample* prev_last = nullptr;
  for (const auto& arc : path.arcs) {
    for (std::size_t i = 0; i < arc.samples.size(); ++i) {
      const auto& s = arc.samples[i];
      if (i > 0) {
        const Vec& a0 = arc.samples[i - 1].a;
        min_fiber = std::min(min_fiber, chord_min_norm({a0.data(), static_cast<std::size_t>(a0.size())},
                                                       {s.a.data(), static_cast<std::size_t>(s.a.size())}));
      }
      const Point at(s.q);
      const Mat P = projector(sys, at);
      rep.horizontality = std::max(rep.horizontality, (s.qdot - P * s.qdot).norm());
      min_speed = std::min(min_speed, sys.norm(at, s.qdot));
      min_fiber = std::min(min_fiber, s.a.norm());
      if (region && !region->contains(at.span())) ++rep.region_violations;
      ++rep.samples;
    }
    if (!arc.samples.empty()) {
      const auto& first = arc.samples.front();
      if (prev_last) {
        rep.junction_velocity_jump = std::max(rep.junction_velocity_jump, (first.qdot - prev_last->qdot).norm());
        rep.junction_position_jump = std::max(rep.junction_position_jump, (first.q - prev_last->q).norm());
      }
      prev_last = &arc.samples.back();
    }
  }
  if (rep.samples == 0) {
    // Constant path: only the start state.
    const Point& at = path.start.q;
    min_speed = path.start.a.size() ? sys.norm(at, sys.ambient(at, path.start.a)) : 0.0;
    min_fiber = path.start.a.norm();
    if (region && !region->contains(at.span())) ++rep.region_violations;
  }
  rep.min_speed = min_speed;
  rep.min_fiber_norm = min_fiber;
  const BundleState end = path.end();
  if (target_q) rep.position_error = (end.q.coords - target_q->coords).norm();
  if (target_v) {
    const Vec v_end = prev_last ? prev_last->qdot : sys.ambient(end.q, end.a);
    rep.velocity_error = (v_end - *target_v).norm();
  }
  return rep;
}

bool passes(const ValidationReport& r, const ValidationThresholds& t) {
  if (r.horizontality > t.horizontality) return false;
  if (r.junction_velocity_jump > t.junction || r.junction_position_jump > t.junction) return false;
  if (r.position_error && *r.position_error > t.position) return false;
  if (r.velocity_error && *r.velocity_error > t.velocity) return false;
  if (r.region_violations > 0) return false;
  if (!r.trivial && !(r.min_speed > t.min_speed)) return false;
  return true;
}

}  // namespace slitbundle
