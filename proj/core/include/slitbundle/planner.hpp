#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slitbundle/distribution.hpp"
#include "slitbundle/error.hpp"
#include "slitbundle/second_order.hpp"

namespace slitbundle {

struct PlanOptions {
  int segments = 8;
  int restarts = 20;
  std::uint64_t seed = 1;
  double tol_pos = 1e-6;
  double tol_vel = 1e-6;
  double tau_max = 2.0;
  int max_iterations = 200;
  double slit_eps = kDefaultSlitEps;
  /// Hard floor on the g-speed, as a fraction of the smaller endpoint speed.
  double min_speed_fraction = 0.1;
  /// Worker threads for restarts; 0 uses the hardware count. SLITBUNDLE_THREADS caps it.
  int threads = 0;
  /// Reachability pre-checks at p and q.
  int check_depth = kDefaultDepth;
  int orbit_trials = 50;
  /// Integrator settings of the accepted path.
  OdeOptions ode;
};

/// Steering request. Velocities are ambient vectors that must lie in D.
struct PlanRequest {
  Point p;
  Vec v_p;
  Point q;
  Vec v_q;
  std::optional<Domain> region;
  PlanOptions options;
};

/// One arc: constant control for `duration`, with the accepted integrator samples.
struct PathArc {
  SecondOrderControl control;
  double duration = 0.0;
  std::vector<BundleSample> samples;
};

struct PathMetadata {
  double position_error = 0.0;
  double velocity_error = 0.0;
  double residual = 0.0;  // norm of the full least-squares residual
  double min_speed = 0.0;
  double min_fiber_norm = 0.0;
  int restart = -1;
  int iterations = 0;
  bool checks_passed = true;
  std::vector<double> trace;  // residual norm per accepted solver iteration
};

/// Concatenated arcs in D*. Consecutive arcs share their junction state.
struct PiecewisePath {
  BundleState start;
  std::vector<PathArc> arcs;
  bool trivial = false;
  PathMetadata meta;

  BundleState end() const;
};

enum class PlanErrorKind { NotReachable, SlitViolation, NoConvergence };
std::string to_string(PlanErrorKind kind);

class PlanError : public Error {
 public:
  PlanError(PlanErrorKind kind, const std::string& what, double best_residual = 0.0, int best_restart = -1)
      : Error(what), kind_(kind), best_residual_(best_residual), best_restart_(best_restart) {}
  PlanErrorKind kind() const noexcept { return kind_; }
  double best_residual() const noexcept { return best_residual_; }
  int best_restart() const noexcept { return best_restart_; }

 private:
  PlanErrorKind kind_;
  double best_residual_;
  int best_restart_;
};

/// Frame coordinates of an ambient vector that lies in D_q; throws
/// PlanError(SlitViolation) if it is (numerically) zero or not in D.
Vec frame_coordinates(const System& sys, const Point& q, const Vec& v, double slit_eps = kDefaultSlitEps);

/// Shooting decision vector: piecewise-constant controls and durations.
struct ShootingGuess {
  std::vector<Vec> controls;
  std::vector<double> durations;
  /// Endpoint residual norm of the guess (infinite if it could not be integrated).
  double residual = 0.0;
  bool from_flows = false;  // false when the flow heuristic failed and a random guess was used
};

/// Warm start from frame flows and commutator blocks that approximate q - p.
ShootingGuess plan_flow_composition(const System& sys, const PlanRequest& req);

/// Seeded random guess, as used by restarts 1, 2, ...
ShootingGuess random_guess(const System& sys, const PlanRequest& req, std::uint64_t stream);

/// Endpoint residual norm of a guess (positions and frame coordinates).
double guess_residual(const System& sys, const PlanRequest& req, const ShootingGuess& guess);

/// Throws PlanError on failure.
PiecewisePath plan(const System& sys, const PlanRequest& req);

struct ValidationReport {
  double horizontality = 0.0;      // max ||(I - P(q)) qdot||
  double min_speed = 0.0;          // min g-norm of qdot
  double min_fiber_norm = 0.0;     // min ||a|| over samples and the chords between them
  double junction_velocity_jump = 0.0;
  double junction_position_jump = 0.0;
  std::optional<double> position_error;
  std::optional<double> velocity_error;
  int region_violations = 0;
  int samples = 0;
  int arcs = 0;
  bool trivial = false;
};

/// Checks a path; `target_q`/`target_v` enable the endpoint errors.
ValidationReport validate(const System& sys, const PiecewisePath& path, const std::optional<Point>& target_q = {},
                          const std::optional<Vec>& target_v = {}, const std::optional<Domain>& region = {});

/// Thresholds used to call a validation report passing.
struct ValidationThresholds {
  double horizontality = 1e-8;
  double junction = 1e-10;
  double position = 1e-6;
  double velocity = 1e-6;
  double min_speed = 0.0;  // strict: min_speed must exceed this
};
bool passes(const ValidationReport& r, const ValidationThresholds& t = {});

/// Worker count after applying SLITBUNDLE_THREADS.
int effective_threads(int requested);

}  // namespace slitbundle
