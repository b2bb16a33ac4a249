#pragma once

#include <functional>
#include <span>
#include <vector>

#include "slitbundle/chart.hpp"
#include "slitbundle/system.hpp"

namespace slitbundle {

// The distribution D is charted globally by (q, a) in R^n x R^k with fiber
// vector v = sum_i a_i E_i(q). A tangent vector to D has raw chart components
// (qdot, adot); the connection splits it into
//   base = T pi_D . X = qdot
//   conn = kappa_D . X = adot + GammaD(qdot, a)        (frame coordinates)
// where GammaD(w, a)_m = sum_{j,i} GammaD^m_{ji} w_j a_i.

/// A point of D (of the slit bundle D* when a != 0).
struct BundleState {
  Point q;
  Vec a;
  int dim() const { return q.dim(); }
  int rank() const { return static_cast<int>(a.size()); }
};

/// Raw chart components of a tangent vector to D.
struct RawTangent {
  Vec qdot;
  Vec adot;
};

/// A tangent vector to D stored by its (base, connector) pair.
struct BundleTangent {
  BundleState at;
  Vec base;  // T pi_D . X, n ambient components
  Vec conn;  // kappa_D . X, k frame components
};

/// Levi-Civita symbols: gamma[l](i, j) = Gamma^l_{ij}.
struct Christoffel {
  std::vector<Mat> gamma;
};

/// Projected coefficients: coeffs[j](m, i) = GammaD^m_{ji}, i.e.
/// grad^D_{d_j} E_i = sum_m GammaD^m_{ji} E_m.
struct ProjectedCoeffs {
  std::vector<Mat> coeffs;
};

struct ConnectionCoeffs {
  Christoffel levi_civita;
  ProjectedCoeffs projected;
};

Christoffel christoffel(const System& sys, const Point& p);
ProjectedCoeffs projected_coeffs(const System& sys, const Point& p);
ConnectionCoeffs connection_coeffs(const System& sys, const Point& p);

/// GammaD(w, a): the frame-coordinate correction term of the connector.
Vec connection_term(const System& sys, const Point& q, const Vec& w, const Vec& a);
/// Gamma(w, v)^l = Gamma^l_{ij} w_i v_j of the Levi-Civita connection.
Vec levi_civita_term(const System& sys, const Point& q, const Vec& w, const Vec& v);

/// kappa_D . X in frame coordinates.
Vec connector(const System& sys, const BundleState& s, const RawTangent& x);
BundleTangent split(const System& sys, const BundleState& s, const RawTangent& x);
RawTangent to_raw(const System& sys, const BundleTangent& x);

/// H_s(w): base = w, conn = 0.
BundleTangent horizontal_lift(const System& sys, const BundleState& s, const Vec& w);
/// lambda_s(c) in raw components: (0, c).
RawTangent vertical_lift(const BundleState& s, const Vec& c);

/// Curvature R^D(u, w) of grad^D acting on frame coordinates (k x k).
Mat curvature(const System& sys, const Point& p, const Vec& u, const Vec& w);

/// Parallel transport of frame coordinates a along the chart segment
/// t -> q + t z, t in [0, t1].
Vec transport_along_segment(const System& sys, const Point& q, const Vec& a, const Vec& z, double t1);

/// Vector bundle targeted by a bundle morphism over the identity of M,
/// together with the connection used for its connector.
enum class FiberTarget {
  Distribution,  // D itself, frame coordinates, connection grad^D
  Tangent,       // TM, ambient coordinates, Levi-Civita
  Trivial,       // M x R^m, flat
};

/// Smooth fiber-preserving map b : D -> F over the identity, b(q, a) given in
/// F's fiber coordinates. Evaluated with dual numbers so that tangent maps are exact.
struct BundleMorphism {
  using Fn = std::function<void(std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> out)>;
  FiberTarget target = FiberTarget::Trivial;
  int fiber_dim = 0;
  Fn fn;

  Vec operator()(const BundleState& s) const;
  /// d/dt b(q + t qdot, a + t adot) at t = 0.
  Vec directional(const BundleState& s, const Vec& qdot, const Vec& adot) const;
};

/// kappa_F applied to a raw tangent vector (qdot, ydot) of F at fiber value y.
Vec target_connector(const System& sys, FiberTarget target, const Point& q, const Vec& y, const Vec& qdot,
                     const Vec& ydot);

/// kappa_F . Tb . X computed directly in raw chart coordinates.
Vec tangent_map_connector(const System& sys, const BundleMorphism& b, const BundleState& s, const RawTangent& x);

/// Fb(s) . w: derivative of b along the fiber.
Vec fiber_derivative(const BundleMorphism& b, const BundleState& s, const Vec& w);

/// Pb(s) . z = kappa_F . Tb . H_s(z), by parallel transport of s along z and
/// Richardson-extrapolated central differences of b.
Vec parallel_derivative(const System& sys, const BundleMorphism& b, const BundleState& s, const Vec& z);

/// Vector field on D given by its (base, conn) components as functions of (q, a).
struct BundleField {
  using Fn = std::function<void(std::span<const Dual> q, std::span<const Dual> a, std::span<Dual> base,
                                std::span<Dual> conn)>;
  int dim = 0;   // n
  int rank = 0;  // k
  Fn fn;

  BundleTangent operator()(const BundleState& s) const;
  /// kappa_D o X as a morphism D -> D.
  BundleMorphism connector_part() const;
  /// T pi_D o X as a morphism D -> TM.
  BundleMorphism base_part() const;
};

/// Raw chart components of a bundle field at s.
RawTangent raw_field(const System& sys, const BundleField& x, const BundleState& s);

/// [X, Y](s) assembled from fiber and parallel derivatives of the components
/// plus the curvature term R^D(T pi Y, T pi X) v.
BundleTangent bundle_bracket(const System& sys, const BundleField& x, const BundleField& y, const BundleState& s);

}  // namespace slitbundle
