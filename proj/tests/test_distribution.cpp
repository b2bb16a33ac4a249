#include <gtest/gtest.h>

#include <Eigen/LU>

#include "slitbundle/distribution.hpp"
#include "slitbundle/error.hpp"
#include "slitbundle/systems.hpp"
#include "support.hpp"

namespace slitbundle {
namespace {

std::vector<int> dims(const System& sys, const Point& p, int depth) { return growth_vector(sys, p, depth).dims; }

TEST(Projector, FullRankIsIdentity) {
  const System sys = builtin("flat(3)");
  EXPECT_LE((projector(sys, Point{0.3, -1, 2}) - Mat::Identity(3, 3)).norm(), 1e-15);
}

TEST(Projector, HeisenbergOriginAgainstNormalEquations) {
  const System sys = builtin("heisenberg");
  const Point p{0, 0, 0};
  const Mat E = sys.frame_matrix(p);
  const Mat g = Mat::Identity(3, 3);
  const Mat oracle = E * (E.transpose() * g * E).inverse() * E.transpose() * g;
  const Mat P = projector(sys, p);
  EXPECT_LE((P - oracle).norm(), 1e-15);
  EXPECT_LE((P - Vec(Eigen::Vector3d(1, 1, 0)).asDiagonal().toDenseMatrix()).norm(), 1e-15);
}

TEST(Projector, FixesVectorsInTheDistribution) {
  const System sys = builtin("heisenberg");
  const Point p{0.4, -0.7, 1.1};
  const Vec v = sys.ambient(p, Vec(Eigen::Vector2d(0.3, -2.0)));
  EXPECT_LE((projector(sys, p) * v - v).norm(), 1e-14);
}

TEST(ProjectorProperty, IdempotentAndSelfAdjointOnBuiltins) {
  for (const std::string name : {"heisenberg", "unicycle", "martinet", "involutive3", "flatbracket", "flat(4)"}) {
    const System sys = builtin(name);
    for (const auto& p : sample_points(sys, 1000, 17)) {
      const Mat P = projector(sys, p);
      const Mat g = sys.metric_matrix(p);
      ASSERT_LE((P * P - P).norm(), 1e-10) << name;
      ASSERT_LE((g * P - P.transpose() * g).norm(), 1e-10) << name;
    }
  }
}

TEST(GrowthVector, Heisenberg) {
  const System sys = builtin("heisenberg");
  for (const auto& p : sample_points(sys, 20, 1)) EXPECT_EQ(dims(sys, p, 2), (std::vector<int>{2, 3}));
}

TEST(GrowthVector, InvolutiveSaturatesAtTwo) {
  const auto g = growth_vector(builtin("involutive3"), Point{0.5, 0.1, -2}, 6);
  EXPECT_EQ(g.dims, (std::vector<int>{2, 2}));
  EXPECT_TRUE(g.saturated);
}

TEST(GrowthVector, MartinetOnAndOffTheSingularPlane) {
  const System sys = builtin("martinet");
  EXPECT_EQ(dims(sys, Point{0.3, 0.0, -1.0}, 3), (std::vector<int>{2, 2, 3}));
  EXPECT_EQ(dims(sys, Point{0.3, 0.5, -1.0}, 3), (std::vector<int>{2, 3}));
}

TEST(GrowthVector, DepthCapLeavesMartinetUnresolved) {
  const auto g = growth_vector(builtin("martinet"), Point{0, 0, 0}, 2);
  EXPECT_EQ(g.dims, (std::vector<int>{2, 2}));
  EXPECT_FALSE(g.saturated);
  const BracketReport r = is_bracket_generating(builtin("martinet"), std::vector<Point>{Point{0, 0, 0}}, 2);
  EXPECT_EQ(r.verdict, Verdict::Inconclusive);
}

TEST(GrowthVectorProperty, InvariantUnderConstantRecombination) {
  std::mt19937_64 rng(21);
  const System h = builtin("heisenberg");
  for (int trial = 0; trial < 10; ++trial) {
    Mat c = testing::random_vec(rng, 4).reshaped(2, 2);
    while (std::abs(c.determinant()) < 0.1) c = testing::random_vec(rng, 4).reshaped(2, 2);
    std::vector<VectorField> frame;
    for (int i = 0; i < 2; ++i) {
      const std::string a = std::to_string(c(0, i)), b = std::to_string(c(1, i));
      frame.push_back(VectorField::from_expressions(
          {a, b, "(" + a + ")*(-x2/2) + (" + b + ")*(x1/2)"}, 3));
    }
    const System mixed = make_system("mixed", 3, frame, MetricField::euclidean(3));
    const Point p(testing::random_vec(rng, 3));
    EXPECT_EQ(dims(mixed, p, 4), dims(h, p, 4));
  }
}

TEST(BracketGenerating, HeisenbergAtHundredPoints) {
  const System sys = builtin("heisenberg");
  const auto r = is_bracket_generating(sys, sample_points(sys, 100, 3), 2);
  EXPECT_EQ(r.verdict, Verdict::Generating);
  EXPECT_TRUE(r.witnesses.empty());
  EXPECT_STREQ(BracketReport::kLabel, "sampled, depth-capped");
}

TEST(BracketGenerating, InvolutiveHasWitnesses) {
  const System sys = builtin("involutive3");
  const auto r = is_bracket_generating(sys, sample_points(sys, 10, 3), 6);
  EXPECT_EQ(r.verdict, Verdict::NotGenerating);
  EXPECT_EQ(r.witnesses.size(), 10u);
}

TEST(BracketGenerating, FlatBracketDependsOnSide) {
  const System sys = builtin("flatbracket");
  const std::vector<Point> left{Point{0, 0, 0}, Point{0, 1, -1}, Point{-0.5, 0.3, 2}};
  const std::vector<Point> right{Point{0.5, 0, 0}, Point{1.0, 1, -1}, Point{1.5, -0.3, 2}};
  EXPECT_EQ(is_bracket_generating(sys, left).verdict, Verdict::NotGenerating);
  EXPECT_EQ(is_bracket_generating(sys, right).verdict, Verdict::Generating);
}

TEST(BracketGenerating, EmptySampleRejected) {
  EXPECT_THROW(is_bracket_generating(builtin("heisenberg"), std::vector<Point>{}), ConfigError);
}

TEST(OrbitDimension, Heisenberg) {
  EXPECT_EQ(orbit_dimension_estimate(builtin("heisenberg"), Point{0.2, 0.1, 0}, 20, 1), 3);
}

TEST(OrbitDimension, InvolutiveStaysOnLeaf) {
  EXPECT_EQ(orbit_dimension_estimate(builtin("involutive3"), Point{0, 0, 0}, 50, 1), 2);
}

TEST(OrbitDimension, FlatBracketReachesFullDimensionOffTheFlatSide) {
  EXPECT_EQ(orbit_dimension_estimate(builtin("flatbracket"), Point{0, 0, 0}, 50, 1), 3);
}

TEST(OrbitDimension, ReproducibleAndMonotoneInTrials) {
  const System sys = builtin("flatbracket");
  const Point p{-0.3, 0, 0};
  int last = 0;
  for (int trials : {1, 2, 5, 20, 50}) {
    const int d = orbit_dimension_estimate(sys, p, trials, 4);
    EXPECT_GE(d, last);
    EXPECT_EQ(d, orbit_dimension_estimate(sys, p, trials, 4));
    last = d;
  }
}

TEST(OrbitDimensionProperty, BoundsGrowthVectorFromAbove) {
  for (const std::string name : {"heisenberg", "unicycle", "martinet", "involutive3", "flatbracket"}) {
    const System sys = builtin(name);
    for (const auto& p : sample_points(sys, 5, 8)) {
      EXPECT_GE(orbit_dimension_estimate(sys, p, 30, 2), growth_vector(sys, p).last()) << name;
    }
  }
}

TEST(SamplePoints, DeterministicAndInsideTheBox) {
  const System sys = builtin("unicycle");
  const auto a = sample_points(sys, 50, 9), b = sample_points(sys, 50, 9);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].coords, b[i].coords);
    EXPECT_TRUE(((a[i].coords - sys.box.lo).array() >= 0).all());
    EXPECT_TRUE(((sys.box.hi - a[i].coords).array() >= 0).all());
  }
}

TEST(NumericalRank, RelativeThreshold) {
  Mat m(3, 2);
  m << 1, 1, 0, 1e-9, 0, 0;
  EXPECT_EQ(numerical_rank(m), 1);
  m(1, 1) = 1e-3;
  EXPECT_EQ(numerical_rank(m), 2);
}

}  // namespace
}  // namespace slitbundle
