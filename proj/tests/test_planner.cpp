#include <gtest/gtest.h>

#include <cmath>

#include "slitbundle/error.hpp"
#include "slitbundle/io.hpp"
#include "slitbundle/planner.hpp"
#include "slitbundle/systems.hpp"

namespace slitbundle {
namespace {

Vec v2(double a, double b) { return Vec(Eigen::Vector2d(a, b)); }

PlanRequest request(const System& sys, Point p, Vec ap, Point q, Vec aq) {
  PlanRequest r;
  r.v_p = sys.ambient(p, ap);
  r.v_q = sys.ambient(q, aq);
  r.p = std::move(p);
  r.q = std::move(q);
  return r;
}

PlanRequest heisenberg_request() {
  return request(builtin("heisenberg"), Point{0, 0, 0}, v2(1, 0), Point{0, 0, 1}, v2(0, 1));
}

TEST(Plan, TrivialRequest) {
  const System sys = builtin("heisenberg");
  const PlanRequest req = request(sys, Point{1, 2, 3}, v2(1, 1), Point{1, 2, 3}, v2(1, 1));
  const PiecewisePath path = plan(sys, req);
  EXPECT_TRUE(path.trivial);
  EXPECT_TRUE(path.arcs.empty());
  EXPECT_EQ(path.meta.residual, 0.0);
  const ValidationReport r = validate(sys, path, req.q, req.v_q);
  EXPECT_TRUE(r.trivial);
  EXPECT_EQ(*r.position_error, 0.0);
  EXPECT_EQ(*r.velocity_error, 0.0);
  EXPECT_EQ(r.horizontality, 0.0);
  EXPECT_EQ(r.junction_velocity_jump, 0.0);
}

TEST(Plan, LoopWithDifferentVelocitiesIsOrdinary) {
  const System sys = builtin("heisenberg");
  const PiecewisePath path = plan(sys, request(sys, Point{0, 0, 0}, v2(1, 0), Point{0, 0, 0}, v2(0, 1)));
  EXPECT_FALSE(path.trivial);
  EXPECT_FALSE(path.arcs.empty());
}

TEST(Plan, HeisenbergMeetsTolerances) {
  const System sys = builtin("heisenberg");
  const PlanRequest req = heisenberg_request();
  const PiecewisePath path = plan(sys, req);
  const ValidationReport r = validate(sys, path, req.q, req.v_q);
  EXPECT_LE(*r.position_error, 1e-6);
  EXPECT_LE(*r.velocity_error, 1e-6);
  EXPECT_LE(r.horizontality, 1e-8);
  EXPECT_LE(r.junction_velocity_jump, 1e-10);
  EXPECT_GE(r.min_speed, 0.1);
  EXPECT_GE(r.min_fiber_norm, kDefaultSlitEps);
  EXPECT_TRUE(passes(r));
  EXPECT_FALSE(path.meta.trace.empty());
}

TEST(Plan, ZeroVelocityIsSlitViolation) {
  const System sys = builtin("heisenberg");
  try {
    plan(sys, request(sys, Point{0, 0, 0}, v2(0, 0), Point{0, 0, 1}, v2(0, 1)));
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::SlitViolation);
  }
}

TEST(Plan, VelocityOutsideDIsSlitViolation) {
  const System sys = builtin("heisenberg");
  PlanRequest req = heisenberg_request();
  req.v_q = Vec::Unit(3, 2);
  try {
    plan(sys, req);
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::SlitViolation);
  }
}

TEST(Plan, InvolutiveIsNotReachable) {
  const System sys = builtin("involutive3");
  try {
    plan(sys, request(sys, Point{0, 0, 0}, v2(1, 0), Point{0, 0, 1}, v2(0, 1)));
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::NotReachable);
    EXPECT_GE(e.best_residual(), 1.0 - 1e-9);
  }
}

TEST(Plan, StarvedBudgetIsNoConvergence) {
  const System sys = builtin("heisenberg");
  PlanRequest req = heisenberg_request();
  req.q = Point{0, 0, 3};
  req.v_q = sys.ambient(req.q, v2(0, 1));
  req.options.restarts = 1;
  req.options.max_iterations = 1;
  try {
    plan(sys, req);
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::NoConvergence);
    EXPECT_EQ(e.best_restart(), 0);
  }
}

TEST(Plan, EndpointOutsideRegionRejected) {
  const System sys = builtin("heisenberg");
  PlanRequest req = heisenberg_request();
  req.region = parse_region(R"(["1 - x3^2"])", 3);
  EXPECT_THROW(plan(sys, req), ConfigError);
}

TEST(Plan, DeterministicAcrossThreadCounts) {
  const System sys = builtin("unicycle");
  PlanRequest req = request(sys, Point{0, 0, 0}, v2(1, 0), Point{0, 1, 0}, v2(1, 0));
  req.options.threads = 1;
  const std::string one = csv_string(sys, plan(sys, req));
  req.options.threads = 4;
  EXPECT_EQ(csv_string(sys, plan(sys, req)), one);
}

TEST(FlowComposition, SingleFrameFlowGivesOneSegment) {
  const System sys = builtin("heisenberg");
  const PlanRequest req = request(sys, Point{0, 0, 0}, v2(1, 0), Point{1, 0, 0}, v2(1, 0));
  const ShootingGuess g = plan_flow_composition(sys, req);
  EXPECT_TRUE(g.from_flows);
  int active = 0;
  for (double tau : g.durations) active += tau > 0.0;
  EXPECT_EQ(active, 1);
  EXPECT_LE(g.residual, 1e-8);
}

TEST(FlowComposition, WarmStartStaysOffZeroSection) {
  const System sys = builtin("heisenberg");
  for (const double z : {0.5, 1.0, 1.5, 2.0, 3.0, -1.0}) {
    const PlanRequest req = request(sys, Point{0, 0, 0}, v2(1, 0), Point{0, 0, z}, v2(0, 1));
    const ShootingGuess g = plan_flow_composition(sys, req);
    EXPECT_TRUE(g.from_flows) << z;
    EXPECT_TRUE(std::isfinite(g.residual)) << z;
  }
}

TEST(FlowComposition, BeatsRandomInitOnVerticalDisplacement) {
  const System sys = builtin("heisenberg");
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    PlanRequest req = heisenberg_request();
    req.options.seed = seed;
    const double warm = plan_flow_composition(sys, req).residual;
    if (warm < random_guess(sys, req, 1).residual) ++wins;
  }
  EXPECT_GE(wins, 40);
}

TEST(FlowComposition, InvolutiveResidualBoundedBelowByLeafGap) {
  const System sys = builtin("involutive3");
  const PlanRequest req = request(sys, Point{0, 0, 0}, v2(1, 0), Point{0, 0, 0.7}, v2(1, 0));
  EXPECT_GE(plan_flow_composition(sys, req).residual, 0.7 - 1e-12);
}

TEST(Validate, FlagsInjectedJunctionDiscontinuity) {
  const System sys = builtin("heisenberg");
  const PlanRequest req = heisenberg_request();
  PiecewisePath path = plan(sys, req);
  ASSERT_GE(path.arcs.size(), 2u);
  auto& first = path.arcs[1].samples.front();
  first.a[0] += 1e-3;
  first.qdot = sys.ambient(Point(first.q), first.a);
  const ValidationReport r = validate(sys, path, req.q, req.v_q);
  EXPECT_GT(r.junction_velocity_jump, 1e-4);
  EXPECT_FALSE(passes(r));
}

TEST(Validate, FlagsRegionViolations) {
  const System sys = builtin("heisenberg");
  const PlanRequest req = heisenberg_request();
  const PiecewisePath path = plan(sys, req);
  const Domain tight = parse_region(R"(["0.01 - x1^2 - x2^2"])", 3);
  EXPECT_GT(validate(sys, path, req.q, req.v_q, tight).region_violations, 0);
}

TEST(FrameCoordinates, RecoverCoefficients) {
  const System sys = builtin("unicycle");
  const Point q{0.1, 0.2, 0.9};
  const Vec a = v2(-0.4, 2.5);
  EXPECT_LE((frame_coordinates(sys, q, sys.ambient(q, a)) - a).norm(), 1e-14);
}

TEST(EffectiveThreads, EnvironmentCap) {
  setenv("SLITBUNDLE_THREADS", "2", 1);
  EXPECT_EQ(effective_threads(8), 2);
  EXPECT_EQ(effective_threads(1), 1);
  unsetenv("SLITBUNDLE_THREADS");
  EXPECT_EQ(effective_threads(3), 3);
}

}  // namespace
}  // namespace slitbundle
