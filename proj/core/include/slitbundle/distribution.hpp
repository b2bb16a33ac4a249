#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slitbundle/system.hpp"

namespace slitbundle {

inline constexpr int kDefaultDepth = 6;
inline constexpr double kRankTol = 1e-7;

/// g-orthogonal projection onto D_p: P = E (E^T g E)^{-1} E^T g.
Mat projector(const System& sys, const Point& p);

/// Numerical rank: singular values >= tol * sigma_max.
int numerical_rank(const Mat& columns, double tol = kRankTol);

/// Dimensions of the bracket flag at a point. dims[i] is the rank of all
/// left-nested brackets of depth <= i + 1. The list stops early once it
/// reaches n, otherwise it has one entry per depth up to the cap.
struct GrowthVector {
  std::vector<int> dims;
  Point point;
  int depth_cap = kDefaultDepth;
  /// Every bracket of some depth has an identically zero Taylor jet, or the
  /// frame is involutive as a jet: no further growth is possible at this point.
  bool saturated = false;

  int last() const { return dims.empty() ? 0 : dims.back(); }
};

GrowthVector growth_vector(const System& sys, const Point& p, int depth = kDefaultDepth, double tol = kRankTol);

enum class Verdict { Generating, NotGenerating, Inconclusive };
std::string to_string(Verdict v);

struct PointVerdict {
  GrowthVector growth;
  Verdict verdict = Verdict::Inconclusive;
};

/// Sampled, depth-capped test. Generating when every growth vector reaches n;
/// NotGenerating when some point is saturated below n (those points are the
/// witnesses); Inconclusive when the cap binds before either happens.
struct BracketReport {
  Verdict verdict = Verdict::Inconclusive;
  std::vector<PointVerdict> points;
  std::vector<Point> witnesses;
  int depth_cap = kDefaultDepth;
  static constexpr const char* kLabel = "sampled, depth-capped";
};

BracketReport is_bracket_generating(const System& sys, std::span<const Point> points, int depth = kDefaultDepth,
                                    double tol = kRankTol);

struct OrbitEstimate {
  int dimension = 0;
  int trials = 0;
  int skipped = 0;  // compositions abandoned after leaving the domain
};

/// Lower bound for dim P_D(p): rank of pushforwards of frame vectors under
/// random flow compositions of frame fields that end at p.
OrbitEstimate orbit_dimension(const System& sys, const Point& p, int trials, std::uint64_t seed,
                              double tol = kRankTol);
int orbit_dimension_estimate(const System& sys, const Point& p, int trials, std::uint64_t seed);

/// Uniform in [0, 1) from a 64-bit generator, identical on every platform.
double unit_uniform(std::uint64_t bits);

/// Random points of the sample box that lie in the domain and where the frame
/// and metric pass their invariants.
std::vector<Point> sample_points(const System& sys, int count, std::uint64_t seed);

}  // namespace slitbundle
