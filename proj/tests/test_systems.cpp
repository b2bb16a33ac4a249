#include <gtest/gtest.h>

#include "slitbundle/distribution.hpp"
#include "slitbundle/error.hpp"
#include "slitbundle/second_order.hpp"
#include "slitbundle/systems.hpp"

namespace slitbundle {
namespace {

TEST(Builtins, NamesResolve) {
  for (const std::string name : {"heisenberg", "unicycle", "martinet", "involutive3", "flatbracket", "flat(3)", "flat5"}) {
    EXPECT_TRUE(is_builtin(name)) << name;
    EXPECT_NO_THROW(builtin(name)) << name;
  }
  EXPECT_EQ(builtin("flat4").dim, 4);
  EXPECT_EQ(builtin("flat(4)").rank(), 4);
}

TEST(Builtins, UnknownName) {
  EXPECT_FALSE(is_builtin("engel"));
  EXPECT_THROW(builtin("engel"), ConfigError);
  EXPECT_THROW(builtin("flat(1)"), ConfigError);
}

TEST(Builtins, FramesMatchTheirDefinitions) {
  const Point p{0.3, -0.7, 1.1};
  auto frame = [&](const std::string& name, int i) { return builtin(name).frame[static_cast<std::size_t>(i)](p); };
  EXPECT_LE((frame("heisenberg", 0) - Vec(Eigen::Vector3d(1, 0, 0.35))).norm(), 1e-15);
  EXPECT_LE((frame("heisenberg", 1) - Vec(Eigen::Vector3d(0, 1, 0.15))).norm(), 1e-15);
  EXPECT_LE((frame("unicycle", 0) - Vec(Eigen::Vector3d(std::cos(1.1), std::sin(1.1), 0))).norm(), 1e-15);
  EXPECT_LE((frame("unicycle", 1) - Vec(Eigen::Vector3d(0, 0, 1))).norm(), 1e-15);
  EXPECT_LE((frame("martinet", 0) - Vec(Eigen::Vector3d(0, 1, 0))).norm(), 1e-15);
  EXPECT_LE((frame("martinet", 1) - Vec(Eigen::Vector3d(1, 0, 0.245))).norm(), 1e-15);
  EXPECT_LE((frame("involutive3", 1) - Vec(Eigen::Vector3d(0, 1, 0))).norm(), 1e-15);
  EXPECT_LE((frame("flatbracket", 1) - Vec(Eigen::Vector3d(0, 1, std::exp(-1 / 0.09)))).norm(), 1e-15);
}

TEST(Builtins, FlatBracketIsExactlyFlatOnTheLeft) {
  const System sys = builtin("flatbracket");
  for (double x : {0.0, -1e-300, -0.5, -3.0}) {
    Vec value;
    const Mat J = sys.frame[1].jacobian(Point{x, 0.4, 1}, &value);
    EXPECT_EQ(value[2], 0.0);
    EXPECT_EQ(J.norm(), 0.0);
  }
}

TEST(Builtins, InvariantsOnThousandPointSample) {
  for (const std::string name : {"heisenberg", "unicycle", "martinet", "involutive3", "flatbracket", "flat(3)"}) {
    const System sys = builtin(name);
    const auto pts = sample_points(sys, 1000, 12);
    ASSERT_EQ(pts.size(), 1000u);
    for (const auto& p : pts) ASSERT_NO_THROW(sys.check_at(p)) << name;
  }
}

TEST(Builtins, DocumentedGrowthVectors) {
  const Point p{0.4, 0.3, -0.2};
  EXPECT_EQ(growth_vector(builtin("heisenberg"), p).dims, (std::vector<int>{2, 3}));
  EXPECT_EQ(growth_vector(builtin("unicycle"), p).dims, (std::vector<int>{2, 3}));
  EXPECT_EQ(growth_vector(builtin("involutive3"), p).dims, (std::vector<int>{2, 2}));
  EXPECT_EQ(growth_vector(builtin("flat(3)"), p).dims, (std::vector<int>{3}));
}

TEST(Builtins, ReachabilityRanks) {
  const BundleState s{Point{0.4, 0.3, -0.2}, Vec(Eigen::Vector2d(1, 0.5))};
  EXPECT_EQ(reachability_rank(builtin("heisenberg"), s), 5);
  EXPECT_EQ(reachability_rank(builtin("unicycle"), s), 5);
  EXPECT_EQ(reachability_rank(builtin("martinet"), s), 5);
  EXPECT_EQ(reachability_rank(builtin("involutive3"), s), 4);
}

}  // namespace
}  // namespace slitbundle
