#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "slitbundle/second_order.hpp"

namespace slitbundle {

/// Result of one randomized identity check. `max_error` is the largest
/// normalized discrepancy ||lhs - rhs|| / max(1, ||lhs||) over the samples.
struct IdentityCheck {
  std::string name;
  int samples = 0;
  int skipped = 0;  // samples that left the domain or failed to evaluate
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return samples > 0 && max_error <= tolerance; }
};

struct IdentityReport {
  std::string system;
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<IdentityCheck> checks;
  bool passed() const;
  std::string to_json() const;
};

namespace tolerance {
inline constexpr double kDecomposition = 1e-10;
inline constexpr double kVerticalInverse = 1e-12;
inline constexpr double kProjector = 1e-10;
inline constexpr double kComposite = 1e-6;
inline constexpr double kVerticalBracket = 1e-6;
inline constexpr double kBundleBracket = 1e-5;
inline constexpr double kNonholonomic = 1e-6;
inline constexpr double kSpeed = 1e-8;
inline constexpr double kMetricCompat = 1e-6;
}  // namespace tolerance

/// Random fiber coordinates with norm in [0.2, sqrt(k)].
Vec random_fiber(int k, std::mt19937_64& rng);

/// Random quadratic polynomial field on the (q, a) chart. With `vertical` the
/// base part is zero.
BundleField random_polynomial_field(const System& sys, std::mt19937_64& rng, bool vertical);
/// Random quadratic polynomial morphism D -> target.
BundleMorphism random_morphism(const System& sys, FiberTarget target, std::mt19937_64& rng);

/// Lie bracket of two fields viewed as plain vector fields on the (q, a) chart,
/// by Richardson-extrapolated central differences. Independent of the connection.
RawTangent raw_bracket(const System& sys, const BundleField& x, const BundleField& y, const BundleState& s);

IdentityCheck check_decomposition(const System& sys, int trials, std::uint64_t seed);
IdentityCheck check_vertical_inverse(const System& sys, int trials, std::uint64_t seed);
IdentityCheck check_projector(const System& sys, int trials, std::uint64_t seed);
IdentityCheck check_composite_formula(const System& sys, int trials, std::uint64_t seed);
/// [X_D, Y] for vertical Y: conn part P(kappa o Y)(v) . v, base part -kappa . Y.
IdentityCheck check_vertical_bracket(const System& sys, int trials, std::uint64_t seed);
IdentityCheck check_bundle_bracket(const System& sys, int trials, std::uint64_t seed);
IdentityCheck check_nonholonomic_agreement(const System& sys, int trials, std::uint64_t seed);
/// g-speed drift along u = 0 arcs of unit duration, relative to the initial speed.
IdentityCheck check_speed_conservation(const System& sys, int trials, std::uint64_t seed);
IdentityCheck check_metric_compatibility(const System& sys, int trials, std::uint64_t seed);

/// Runs every check above with `trials` samples each.
IdentityReport verify_identities(const System& sys, int trials, std::uint64_t seed);

}  // namespace slitbundle
