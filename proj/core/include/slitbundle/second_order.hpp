#pragma once

#include <span>
#include <vector>

#include "slitbundle/connection.hpp"
#include "slitbundle/ode.hpp"

namespace slitbundle {

/// Smallest admissible fiber norm ||a|| on the slit bundle.
inline constexpr double kDefaultSlitEps = 1e-6;

/// Constant vertical input u (frame coordinates) of the field X_u = X_D + lambda(u).
struct SecondOrderControl {
  Vec u;
};

/// X_D(s): base v = E(q) a, connector 0.
BundleTangent nonholonomic_field(const System& sys, const BundleState& s, double slit_eps = kDefaultSlitEps);
/// X_u(s): base v = E(q) a, connector u.
BundleTangent controlled_field(const System& sys, const BundleState& s, const SecondOrderControl& u,
                               double slit_eps = kDefaultSlitEps);

/// Raw right-hand side of X_u at y = (q, a): qdot = E(q) a, adot = u - GammaD(qdot, a).
void controlled_rhs(const System& sys, std::span<const double> u, std::span<const double> y, std::span<double> dy);

/// X_D and X_u as fields on D, for brackets.
BundleField nonholonomic_bundle_field(const System& sys);
BundleField controlled_bundle_field(const System& sys, const Vec& u);

/// X^Hor: base X(q), connector 0. Evaluation throws DomainError where X is not
/// D-valued (||(I - P) X|| > tol * max(1, ||X||)).
BundleField horizontal_lift_field(const System& sys, const VectorField& x, double tol = 1e-8);

/// X_D(s) via the projection of the Levi-Civita geodesic spray: raw components
/// of TP . S(v) with P(q, v) = L(q) v the frame coordinates of the projection.
RawTangent spray_projection(const System& sys, const BundleState& s);

struct ControlArc {
  SecondOrderControl control;
  double duration = 0.0;
};

struct BundleSample {
  double t = 0.0;
  Vec q;
  Vec a;
  Vec qdot;  // equals E(q) a
  int arc = 0;
};

struct BundleTrajectory {
  std::vector<BundleSample> samples;
  BundleState end;
};

/// Smallest norm on the straight segment from x0 to x1.
double chord_min_norm(std::span<const double> x0, std::span<const double> x1);

/// Smallest norm along the cubic Hermite interpolant through (x0, d0) and
/// (x1, d1) over a step of length h, checked on `pieces` chords.
double hermite_min_norm(std::span<const double> x0, std::span<const double> d0, std::span<const double> x1,
                        std::span<const double> d1, double h, int pieces = 16);

/// Raw (q, a) integration of one arc; throws SlitViolation if ||a|| < slit_eps
/// at an accepted step or on the interpolant between two of them, and
/// DomainExit on leaving the system domain.
OdeSolution integrate_arc(const System& sys, const BundleState& s0, const SecondOrderControl& u, double duration,
                          const OdeOptions& options = {}, double slit_eps = kDefaultSlitEps);

/// Integrates a schedule of arcs. Each arc starts from the stored end state of
/// the previous one; junction states appear once per adjacent arc.
BundleTrajectory integrate(const System& sys, const BundleState& s0, std::span<const ControlArc> schedule,
                           const OdeOptions& options = {}, double slit_eps = kDefaultSlitEps);

struct ReachabilityRank {
  int rank = 0;
  /// Bracket depth at which rank n + k was first attained; -1 if it was not.
  int depth_attained = -1;
};

/// Rank of the left-nested brackets (depth <= `depth`) of {X_D, X_{+-e_i}} at s,
/// in raw (q, a) coordinates.
ReachabilityRank reachability(const System& sys, const BundleState& s, int depth = 4, double tol = 1e-7);
int reachability_rank(const System& sys, const BundleState& s, int depth = 4, double tol = 1e-7);

}  // namespace slitbundle
