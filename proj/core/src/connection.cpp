#include "slitbundle/connection.hpp"

#include <Eigen/Cholesky>
#include <array>
#include <cmath>
#include <limits>

#include "geometry_kernel.hpp"
#include "slitbundle/error.hpp"

namespace slitbundle {

namespace detail {

namespace {

void check_dims(const System& sys, const Point& q) {
  if (q.dim() != sys.dim) throw ConfigError("point dimension does not match the system");
}

}  // namespace

FrameData<double> frame_values(const System& sys, const Point& q) {
  check_dims(sys, q);
  const int n = sys.dim, k = sys.rank();
  FrameData<double> f;
  f.n = n;
  f.k = k;
  f.euclidean = sys.metric.is_euclidean();
  f.E = Dense<double>(n, k);
  f.dE.assign(static_cast<std::size_t>(n), Dense<double>(n, k));
  for (int i = 0; i < k; ++i) {
    Vec value;
    const Mat jac = sys.frame[static_cast<std::size_t>(i)].jacobian(q, &value);
    for (int l = 0; l < n; ++l) {
      f.E(l, i) = value[l];
      for (int j = 0; j < n; ++j) f.dE[static_cast<std::size_t>(j)](l, i) = jac(l, j);
    }
  }
  if (f.euclidean) return f;
  f.g = Dense<double>(n, n);
  f.dg.assign(static_cast<std::size_t>(n), Dense<double>(n, n));
  const FieldEvaluator& metric = sys.metric.evaluator();
  if (metric.differentiable() && n <= kMaxDualDirections) {
    std::vector<Dual> x(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = Dual::variable(q.coords[i], i, n);
    metric.eval(std::span<const Dual>(x), std::span<Dual>(out));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const Dual& e = out[static_cast<std::size_t>(r * n + c)];
        f.g(r, c) = e.value;
        for (int j = 0; j < n; ++j) f.dg[static_cast<std::size_t>(j)](r, c) = e.d(j);
      }
    }
    return f;
  }
  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + q.coords.norm());
  const Mat g0 = sys.metric(q);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) f.g(r, c) = g0(r, c);
  }
  for (int j = 0; j < n; ++j) {
    Point qp = q, qm = q;
    qp.coords[j] += h;
    qm.coords[j] -= h;
    const Mat d = (sys.metric(qp) - sys.metric(qm)) / (2.0 * h);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) f.dg[static_cast<std::size_t>(j)](r, c) = d(r, c);
    }
  }
  return f;
}

FrameData<Jet> frame_jets(const System& sys, const Point& q, const JetSpace& space, int order) {
  check_dims(sys, q);
  const int n = sys.dim, k = sys.rank();
  FrameData<Jet> f;
  f.n = n;
  f.k = k;
  f.euclidean = sys.metric.is_euclidean();
  f.E = Dense<Jet>(n, k);
  f.dE.assign(static_cast<std::size_t>(n), Dense<Jet>(n, k));
  for (int i = 0; i < k; ++i) {
    const auto comps = sys.frame[static_cast<std::size_t>(i)].taylor(q, space, order + 1);
    for (int l = 0; l < n; ++l) {
      const Jet& e = comps[static_cast<std::size_t>(l)];
      for (int j = 0; j < n; ++j) {
        f.dE[static_cast<std::size_t>(j)](l, i) = e.is_constant() ? Jet(0.0) : e.derivative(j);
      }
      f.E(l, i) = e.is_constant() ? e : e.truncated(order);
    }
  }
  if (f.euclidean) return f;
  f.g = Dense<Jet>(n, n);
  f.dg.assign(static_cast<std::size_t>(n), Dense<Jet>(n, n));
  std::vector<Jet> x, out(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) x.push_back(Jet::variable(space, i, q.coords[i], order + 1));
  sys.metric.evaluator().eval(std::span<const Jet>(x), std::span<Jet>(out));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Jet& e = out[static_cast<std::size_t>(r * n + c)];
      for (int j = 0; j < n; ++j) {
        f.dg[static_cast<std::size_t>(j)](r, c) = e.is_constant() ? Jet(0.0) : e.derivative(j);
      }
      f.g(r, c) = e.is_constant() ? e : e.truncated(order);
    }
  }
  return f;
}

namespace {

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDualDirections, kMaxDualDirections>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDualDirections, 1>;

void general_connection_term(const System& sys, std::span<const double> q, std::span<const double> w,
                             std::span<const double> a, std::span<double> out) {
  const Point p(Eigen::Map<const Vec>(q.data(), static_cast<Eigen::Index>(q.size())));
  const auto f = frame_values(sys, p);
  const auto gamma = christoffel(f);
  const auto L = left_inverse(f);
  const auto coeffs = projected(f, gamma, L);
  const auto r = contract<double>(coeffs, w, a);
  for (std::size_t m = 0; m < r.size(); ++m) out[m] = r[m];
}

}  // namespace

void connection_term_into(const System& sys, std::span<const double> q, std::span<const double> w,
                          std::span<const double> a, std::span<double> out) {
  const int n = sys.dim, k = sys.rank();
  if (!sys.metric.is_euclidean() || n > kMaxDualDirections) {
    general_connection_term(sys, q, w, a, out);
    return;
  }
  // Euclidean: GammaD(w, a) = L (D_w E) a with L the least-squares left inverse of E.
  SmallMat E(n, k), dwE(n, k);
  std::array<Dual, kMaxDualDirections> x, fx;
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = Dual::directional(q[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)]);
  for (int i = 0; i < k; ++i) {
    const VectorField& field = sys.frame[static_cast<std::size_t>(i)];
    if (field.differentiable()) {
      field.evaluator().eval(std::span<const Dual>(x.data(), static_cast<std::size_t>(n)),
                             std::span<Dual>(fx.data(), static_cast<std::size_t>(n)));
      for (int l = 0; l < n; ++l) {
        E(l, i) = fx[static_cast<std::size_t>(l)].value;
        dwE(l, i) = fx[static_cast<std::size_t>(l)].d(0);
      }
    } else {
      std::array<double, kMaxDualDirections> xp, xm, vp, vm, v0;
      double wn = 0.0, qn = 0.0;
      for (int l = 0; l < n; ++l) {
        wn += w[static_cast<std::size_t>(l)] * w[static_cast<std::size_t>(l)];
        qn += q[static_cast<std::size_t>(l)] * q[static_cast<std::size_t>(l)];
      }
      const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + std::sqrt(qn)) /
                       std::max(1.0, std::sqrt(wn));
      for (int l = 0; l < n; ++l) {
        xp[static_cast<std::size_t>(l)] = q[static_cast<std::size_t>(l)] + h * w[static_cast<std::size_t>(l)];
        xm[static_cast<std::size_t>(l)] = q[static_cast<std::size_t>(l)] - h * w[static_cast<std::size_t>(l)];
      }
      const auto sz = static_cast<std::size_t>(n);
      field.eval(q, {v0.data(), sz});
      field.eval({xp.data(), sz}, {vp.data(), sz});
      field.eval({xm.data(), sz}, {vm.data(), sz});
      for (int l = 0; l < n; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        E(l, i) = v0[ul];
        dwE(l, i) = (vp[ul] - vm[ul]) / (2.0 * h);
      }
    }
  }
  SmallVec av(k);
  for (int i = 0; i < k; ++i) av[i] = a[static_cast<std::size_t>(i)];
  const SmallVec y = dwE * av;
  const SmallMat gram = E.transpose() * E;
  Eigen::LLT<SmallMat> llt(gram);
  if (llt.info() != Eigen::Success) throw RankDeficiency("singular Gram matrix");
  const SmallVec c = llt.solve(SmallVec(E.transpose() * y));
  for (int m = 0; m < k; ++m) out[static_cast<std::size_t>(m)] = c[m];
}

}  // namespace detail

namespace {

Mat to_mat(const detail::Dense<double>& d) {
  Mat m(d.rows, d.cols);
  for (int r = 0; r < d.rows; ++r) {
    for (int c = 0; c < d.cols; ++c) m(r, c) = d(r, c);
  }
  return m;
}

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

Christoffel christoffel(const System& sys, const Point& p) {
  const auto f = detail::frame_values(sys, p);
  Christoffel out;
  if (f.euclidean) {
    out.gamma.assign(static_cast<std::size_t>(sys.dim), Mat::Zero(sys.dim, sys.dim));
    return out;
  }
  for (const auto& g : detail::christoffel(f)) out.gamma.push_back(to_mat(g));
  return out;
}

ProjectedCoeffs projected_coeffs(const System& sys, const Point& p) { return connection_coeffs(sys, p).projected; }

ConnectionCoeffs connection_coeffs(const System& sys, const Point& p) {
  const auto f = detail::frame_values(sys, p);
  const auto gamma = detail::christoffel(f);
  const auto L = detail::left_inverse(f);
  const auto coeffs = detail::projected(f, gamma, L);
  ConnectionCoeffs out;
  if (gamma.empty()) {
    out.levi_civita.gamma.assign(static_cast<std::size_t>(sys.dim), Mat::Zero(sys.dim, sys.dim));
  } else {
    for (const auto& g : gamma) out.levi_civita.gamma.push_back(to_mat(g));
  }
  for (const auto& c : coeffs) out.projected.coeffs.push_back(to_mat(c));
  return out;
}

Vec connection_term(const System& sys, const Point& q, const Vec& w, const Vec& a) {
  if (q.dim() != sys.dim || w.size() != sys.dim || a.size() != sys.rank()) {
    throw ConfigError("connection term: dimension mismatch");
  }
  Vec out(sys.rank());
  detail::connection_term_into(sys, q.span(), span_of(w), span_of(a), {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Vec levi_civita_term(const System& sys, const Point& q, const Vec& w, const Vec& v) {
  const int n = sys.dim;
  Vec out = Vec::Zero(n);
  if (sys.metric.is_euclidean()) return out;
  const auto gamma = detail::christoffel(detail::frame_values(sys, q));
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out[l] += gamma[static_cast<std::size_t>(l)](i, j) * w[i] * v[j];
    }
  }
  return out;
}

Vec connector(const System& sys, const BundleState& s, const RawTangent& x) {
  return x.adot + connection_term(sys, s.q, x.qdot, s.a);
}

BundleTangent split(const System& sys, const BundleState& s, const RawTangent& x) {
  return {s, x.qdot, connector(sys, s, x)};
}

RawTangent to_raw(const System& sys, const BundleTangent& x) {
  return {x.base, x.conn - connection_term(sys, x.at.q, x.base, x.at.a)};
}

BundleTangent horizontal_lift(const System& sys, const BundleState& s, const Vec& w) {
  if (w.size() != sys.dim) throw ConfigError("horizontal lift: dimension mismatch");
  return {s, w, Vec::Zero(sys.rank())};
}

RawTangent vertical_lift(const BundleState& s, const Vec& c) { return {Vec::Zero(s.dim()), c}; }

Mat curvature(const System& sys, const Point& p, const Vec& u, const Vec& w) {
  const int n = sys.dim, k = sys.rank();
  const JetSpace& space = JetSpace::get(n, 2);
  const auto f = detail::frame_jets(sys, p, space, 1);
  const auto gamma = detail::christoffel(f);
  const auto L = detail::left_inverse(f);
  const auto A = detail::projected(f, gamma, L);  // A[j](m, i), order 1
  Mat out = Mat::Zero(k, k);
  for (int j = 0; j < n; ++j) {
    for (int l = 0; l < n; ++l) {
      const double weight = u[j] * w[l];
      if (weight == 0.0 || j == l) continue;
      const auto& Aj = A[static_cast<std::size_t>(j)];
      const auto& Al = A[static_cast<std::size_t>(l)];
      for (int m = 0; m < k; ++m) {
        for (int i = 0; i < k; ++i) {
          double r = 0.0;
          if (!Al(m, i).is_constant()) r += Al(m, i).derivative(j).value();
          if (!Aj(m, i).is_constant()) r -= Aj(m, i).derivative(l).value();
          for (int s = 0; s < k; ++s) r += Aj(m, s).value() * Al(s, i).value() - Al(m, s).value() * Aj(s, i).value();
          out(m, i) += weight * r;
        }
      }
    }
  }
  return out;
}

Vec transport_along_segment(const System& sys, const Point& q, const Vec& a, const Vec& z, double t1) {
  const int n = sys.dim, k = sys.rank();
  if (t1 == 0.0) return a;
  OdeRhs rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    std::array<double, kMaxDualDirections> x{};
    std::vector<double> xs;
    std::span<double> xv;
    if (n <= kMaxDualDirections) {
      xv = {x.data(), static_cast<std::size_t>(n)};
    } else {
      xs.resize(static_cast<std::size_t>(n));
      xv = xs;
    }
    for (int i = 0; i < n; ++i) xv[static_cast<std::size_t>(i)] = q.coords[i] + t * z[i];
    detail::connection_term_into(sys, xv, span_of(z), y, dy);
    for (int m = 0; m < k; ++m) dy[static_cast<std::size_t>(m)] = -dy[static_cast<std::size_t>(m)];
  };
  OdeOptions opts;
  opts.rtol = 1e-13;
  opts.atol = 1e-15;
  const auto sol = integrate_dopri5(rhs, 0.0, span_of(a), t1, opts);
  return Eigen::Map<const Vec>(sol.back().data(), k);
}

Vec BundleMorphism::operator()(const BundleState& s) const {
  const int n = s.dim(), k = s.rank();
  std::vector<Dual> q(static_cast<std::size_t>(n)), a(static_cast<std::size_t>(k)), out(static_cast<std::size_t>(fiber_dim));
  for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = Dual(s.q.coords[i]);
  for (int i = 0; i < k; ++i) a[static_cast<std::size_t>(i)] = Dual(s.a[i]);
  fn(q, a, out);
  Vec r(fiber_dim);
  for (int i = 0; i < fiber_dim; ++i) r[i] = out[static_cast<std::size_t>(i)].value;
  return r;
}

Vec BundleMorphism::directional(const BundleState& s, const Vec& qdot, const Vec& adot) const {
  const int n = s.dim(), k = s.rank();
  std::vector<Dual> q(static_cast<std::size_t>(n)), a(static_cast<std::size_t>(k)), out(static_cast<std::size_t>(fiber_dim));
  for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = Dual::directional(s.q.coords[i], qdot[i]);
  for (int i = 0; i < k; ++i) a[static_cast<std::size_t>(i)] = Dual::directional(s.a[i], adot[i]);
  fn(q, a, out);
  Vec r(fiber_dim);
  for (int i = 0; i < fiber_dim; ++i) r[i] = out[static_cast<std::size_t>(i)].d(0);
  return r;
}

Vec target_connector(const System& sys, FiberTarget target, const Point& q, const Vec& y, const Vec& qdot,
                     const Vec& ydot) {
  switch (target) {
    case FiberTarget::Distribution:
      return ydot + connection_term(sys, q, qdot, y);
    case FiberTarget::Tangent:
      return ydot + levi_civita_term(sys, q, qdot, y);
    case FiberTarget::Trivial:
      break;
  }
  return ydot;
}

Vec tangent_map_connector(const System& sys, const BundleMorphism& b, const BundleState& s, const RawTangent& x) {
  return target_connector(sys, b.target, s.q, b(s), x.qdot, b.directional(s, x.qdot, x.adot));
}

Vec fiber_derivative(const BundleMorphism& b, const BundleState& s, const Vec& w) {
  return b.directional(s, Vec::Zero(s.dim()), w);
}

Vec parallel_derivative(const System& sys, const BundleMorphism& b, const BundleState& s, const Vec& z) {
  const double scale = std::max(1.0, z.norm());
  const double h = 1e-3 / scale;
  auto central = [&](double step) {
    const BundleState plus{Point(s.q.coords + step * z), transport_along_segment(sys, s.q, s.a, z, step)};
    const BundleState minus{Point(s.q.coords - step * z), transport_along_segment(sys, s.q, s.a, z, -step)};
    return Vec((b(plus) - b(minus)) / (2.0 * step));
  };
  const Vec ydot = (4.0 * central(0.5 * h) - central(h)) / 3.0;
  return target_connector(sys, b.target, s.q, b(s), z, ydot);
}

BundleTangent BundleField::operator()(const BundleState& s) const {
  std::vector<Dual> q(static_cast<std::size_t>(dim)), a(static_cast<std::size_t>(rank));
  std::vector<Dual> base(static_cast<std::size_t>(dim)), conn(static_cast<std::size_t>(rank));
  for (int i = 0; i < dim; ++i) q[static_cast<std::size_t>(i)] = Dual(s.q.coords[i]);
  for (int i = 0; i < rank; ++i) a[static_cast<std::size_t>(i)] = Dual(s.a[i]);
  fn(q, a, base, conn);
  BundleTangent t{s, Vec(dim), Vec(rank)};
  for (int i = 0; i < dim; ++i) t.base[i] = base[static_cast<std::size_t>(i)].value;
  for (int i = 0; i < rank; ++i) t.conn[i] = conn[static_cast<std::size_t>(i)].value;
  return t;
}

BundleMorphism BundleField::connector_part() const {
  BundleMorphism m;
  m.target = FiberTarget::Distribution;
  m.fiber_dim = rank;
  m.fn = [f = fn, n = dim](std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> out) {
    std::vector<Dual> base(static_cast<std::size_t>(n));
    f(q, a, base, out);
  };
  return m;
}

BundleMorphism BundleField::base_part() const {
  BundleMorphism m;
  m.target = FiberTarget::Tangent;
  m.fiber_dim = dim;
  m.fn = [f = fn, k = rank](std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> out) {
    std::vector<Dual> conn(static_cast<std::size_t>(k));
    f(q, a, out, conn);
  };
  return m;
}

RawTangent raw_field(const System& sys, const BundleField& x, const BundleState& s) { return to_raw(sys, x(s)); }

BundleTangent bundle_bracket(const System& sys, const BundleField& x, const BundleField& y, const BundleState& s) {
  const BundleTangent xs = x(s), ys = y(s);
  const BundleMorphism kx = x.connector_part(), ky = y.connector_part();
  const BundleMorphism bx = x.base_part(), by = y.base_part();
  BundleTangent out{s, Vec(), Vec()};
  out.conn = fiber_derivative(ky, s, xs.conn) + parallel_derivative(sys, ky, s, xs.base) -
             fiber_derivative(kx, s, ys.conn) - parallel_derivative(sys, kx, s, ys.base) +
             curvature(sys, s.q, ys.base, xs.base) * s.a;
  out.base = fiber_derivative(by, s, xs.conn) + parallel_derivative(sys, by, s, xs.base) -
             fiber_derivative(bx, s, ys.conn) - parallel_derivative(sys, bx, s, ys.base);
  return out;
}

}  // namespace slitbundle
