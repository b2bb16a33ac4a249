#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slitbundle/chart.hpp"
#include "slitbundle/error.hpp"
#include "slitbundle/systems.hpp"
#include "support.hpp"

namespace slitbundle {
namespace {

VectorField rotation() { return VectorField::from_expressions({"-x2", "x1"}, 2); }

VectorField random_quadratic_field(std::mt19937_64& rng) {
  std::vector<std::string> comps;
  for (int c = 0; c < 3; ++c) {
    std::string s = std::to_string(testing::uniform(rng, -1, 1));
    for (int i = 1; i <= 3; ++i) {
      s += " + " + std::to_string(testing::uniform(rng, -1, 1)) + "*x" + std::to_string(i);
      for (int j = i; j <= 3; ++j) {
        s += " + " + std::to_string(testing::uniform(rng, -0.5, 0.5)) + "*x" + std::to_string(i) + "*x" +
             std::to_string(j);
      }
    }
    comps.push_back(s);
  }
  return VectorField::from_expressions(comps, 3);
}

TEST(LieBracket, CoordinateFieldsCommute) {
  const auto b = lie_bracket(VectorField::coordinate(3, 0), VectorField::coordinate(3, 1), Point{0.3, 1, 2});
  EXPECT_EQ(b.comps.norm(), 0.0);
}

TEST(LieBracket, SelfBracketVanishes) {
  std::mt19937_64 rng(2);
  const auto x = random_quadratic_field(rng);
  EXPECT_EQ(lie_bracket(x, x, Point{0.1, -0.4, 0.9}).comps.norm(), 0.0);
}

TEST(LieBracket, HeisenbergAgainstFlowCommutator) {
  const System h = builtin("heisenberg");
  const Point p{0, 0, 0};
  const Vec bracket = lie_bracket(h.frame[0], h.frame[1], p).comps;
  // (X_{-s} o Y_{-s} o X_s o Y_s)(p) = p + s^2 [Y, X](p) + O(s^3)
  auto commutator = [&](double s) {
    const std::vector<FlowStep> steps{{h.frame[1], s}, {h.frame[0], s}, {h.frame[1], -s}, {h.frame[0], -s}};
    return Vec((flow_composition(steps, p).coords - p.coords) / (s * s));
  };
  const Vec oracle = -(2.0 * commutator(0.05) - commutator(0.1));
  EXPECT_LE((bracket - oracle).norm(), 1e-6);
  EXPECT_NEAR(bracket[2], 1.0, 1e-15);
}

TEST(LieBracket, BilinearAndAntisymmetric) {
  std::mt19937_64 rng(3);
  const auto x = random_quadratic_field(rng), y = random_quadratic_field(rng);
  const Point p(testing::random_vec(rng, 3));
  const Vec xy = lie_bracket(x, y, p).comps, yx = lie_bracket(y, x, p).comps;
  EXPECT_LE((xy + yx).norm(), 1e-13 * (1 + xy.norm()));
}

TEST(LieBracketProperty, JacobiIdentity) {
  std::mt19937_64 rng(4);
  const JetSpace& space = JetSpace::get(3, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_quadratic_field(rng), y = random_quadratic_field(rng), z = random_quadratic_field(rng);
    const Point p(testing::random_vec(rng, 3));
    const auto jx = x.taylor(p, space, 2), jy = y.taylor(p, space, 2), jz = z.taylor(p, space, 2);
    auto nested = [&](const std::vector<Jet>& a, const std::vector<Jet>& b, const std::vector<Jet>& c) {
      const auto inner = jet_bracket(b, c);
      const auto outer = jet_bracket(std::vector<Jet>(a.begin(), a.end()), inner);
      Vec v(3);
      for (int i = 0; i < 3; ++i) v[i] = outer[static_cast<std::size_t>(i)].value();
      return v;
    };
    const Vec sum = nested(jx, jy, jz) + nested(jy, jz, jx) + nested(jz, jx, jy);
    EXPECT_LE(sum.norm(), 1e-6);
  }
}

TEST(LieBracketProperty, FlowCommutatorConsistency) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_quadratic_field(rng), y = random_quadratic_field(rng);
    const Point p(testing::random_vec(rng, 3, 0.5));
    auto quotient = [&](double t) {
      const double s = std::sqrt(t);
      const std::vector<FlowStep> steps{{y, s}, {x, s}, {y, -s}, {x, -s}};
      OdeOptions tight;
      tight.rtol = 1e-13;
      tight.atol = 1e-15;
      return Vec((flow_composition(steps, p, tight).coords - p.coords) / t);
    };
    // The error is a series in sqrt(t); two Richardson levels remove the s and s^2 terms.
    const double t = 1e-4;
    const Vec q1 = quotient(t), q2 = quotient(t / 4), q3 = quotient(t / 16);
    const Vec r1 = 2.0 * q2 - q1, r2 = 2.0 * q3 - q2;
    const Vec extrapolated = (4.0 * r2 - r1) / 3.0;
    const Vec bracket = lie_bracket(y, x, p).comps;
    EXPECT_LE((extrapolated - bracket).norm(), 1e-3 * std::max(1.0, bracket.norm()));
  }
}

TEST(Flow, ZeroFieldFixesPoint) {
  const auto r = flow(VectorField::zero(3), Point{1, 2, 3}, 1.0);
  EXPECT_EQ((r.end.coords - Vec::LinSpaced(3, 1, 3)).norm(), 0.0);
}

TEST(Flow, ConstantField) {
  const auto r = flow(VectorField::coordinate(3, 0), Point{0, 0, 0}, 2.0);
  EXPECT_NEAR((r.end.coords - Vec::Unit(3, 0) * 2.0).norm(), 0.0, 1e-12);
}

TEST(Flow, RotationQuarterTurn) {
  const auto r = flow(rotation(), Point{1, 0}, std::numbers::pi / 2);
  EXPECT_NEAR(r.end.coords[0], 0.0, 1e-8);
  EXPECT_NEAR(r.end.coords[1], 1.0, 1e-8);
}

TEST(Flow, GroupProperty) {
  std::mt19937_64 rng(8);
  const auto x = random_quadratic_field(rng);
  const Point p{0.1, 0.2, -0.1};
  OdeOptions o;
  const Point a = flow(x, flow(x, p, 0.2, o).end, 0.15, o).end;
  const Point b = flow(x, p, 0.35, o).end;
  EXPECT_LE((a.coords - b.coords).norm(), 10 * o.rtol * std::max(1.0, b.coords.norm()));
}

TEST(Flow, DomainExitReportsTime) {
  const Domain half({Expression::parse("1 - x1", 2)});
  const auto field = VectorField::from_expressions({"1", "0"}, 2, half);
  try {
    flow(field, Point{0, 0}, 2.0);
    FAIL();
  } catch (const DomainExit& e) {
    EXPECT_NEAR(e.exit_time(), 1.0, 1e-3);
  }
}

TEST(Pushforward, EmptyCompositionIsIdentity) {
  const Tangent v{Point{1, 2, 3}, Vec::LinSpaced(3, -1, 1)};
  const auto w = pushforward({}, v);
  EXPECT_EQ((w.comps - v.comps).norm(), 0.0);
  EXPECT_EQ((w.base.coords - v.base.coords).norm(), 0.0);
}

TEST(Pushforward, TranslationKeepsComponents) {
  const std::vector<FlowStep> steps{{VectorField::coordinate(3, 0), 1.0}};
  const Tangent v{Point{0, 0, 0}, Vec::LinSpaced(3, 1, 3)};
  const auto w = pushforward(steps, v);
  EXPECT_LE((w.comps - v.comps).norm(), 1e-12);
  EXPECT_NEAR(w.base.coords[0], 1.0, 1e-12);
}

TEST(Pushforward, RotationJacobian) {
  const std::vector<FlowStep> steps{{rotation(), std::numbers::pi / 2}};
  const auto w = pushforward(steps, Tangent{Point{1, 0}, Vec::Unit(2, 0)});
  EXPECT_NEAR(w.base.coords[1], 1.0, 1e-8);
  EXPECT_NEAR(w.comps[0], 0.0, 1e-8);
  EXPECT_NEAR(w.comps[1], 1.0, 1e-8);
}

TEST(PushforwardProperty, Linear) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<FlowStep> steps{{random_quadratic_field(rng), 0.2}, {random_quadratic_field(rng), -0.15}};
    const Point p(testing::random_vec(rng, 3, 0.3));
    const Vec u = testing::random_vec(rng, 3), w = testing::random_vec(rng, 3);
    const double alpha = 0.7, beta = -1.3;
    const Vec lhs = pushforward(steps, Tangent{p, alpha * u + beta * w}).comps;
    const Vec rhs = alpha * pushforward(steps, Tangent{p, u}).comps + beta * pushforward(steps, Tangent{p, w}).comps;
    EXPECT_LE((lhs - rhs).norm(), 1e-9);
  }
}

TEST(VectorField, OpaqueJacobianFallsBackToDifferences) {
  const auto f = VectorField::opaque(
      [](std::span<const double> x, std::span<double> out) {
        out[0] = x[0] * x[1];
        out[1] = std::sin(x[0]);
      },
      2);
  Vec value;
  const Mat J = f.jacobian(Point{0.5, 2.0}, &value);
  EXPECT_NEAR(J(0, 0), 2.0, 1e-8);
  EXPECT_NEAR(J(0, 1), 0.5, 1e-8);
  EXPECT_NEAR(J(1, 0), std::cos(0.5), 1e-8);
  EXPECT_FALSE(f.differentiable());
}

}  // namespace
}  // namespace slitbundle
