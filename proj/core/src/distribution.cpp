#include "slitbundle/distribution.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

#include "geometry_kernel.hpp"
#include "slitbundle/error.hpp"

namespace slitbundle {

Mat projector(const System& sys, const Point& p) {
  const Mat E = sys.frame_matrix(p);
  const Mat g = sys.metric(p);
  const Mat etg = E.transpose() * g;
  const Mat gram = etg * E;
  Eigen::JacobiSVD<Mat> svd(E);
  const auto& s = svd.singularValues();
  if (!(s[s.size() - 1] >= sys.rank_tol * s[0]) || !(s[0] > 0.0)) {
    throw RankDeficiency("frame is rank deficient at the projection point");
  }
  return E * gram.ldlt().solve(etg);
}

int numerical_rank(const Mat& columns, double tol) {
  if (columns.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(columns);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] >= tol * s[0]) ++r;
  }
  return r;
}

namespace {

using Word = std::vector<Jet>;

double word_scale(const Word& w) {
  double m = 0.0;
  for (const auto& c : w) m = std::max(m, c.max_abs());
  return m;
}

// True when every level-2 bracket lies in the span of the frame as a jet.
bool involutive_as_jets(const std::vector<Word>& frame, const std::vector<Word>& brackets, double zero_tol) {
  const int n = static_cast<int>(frame[0].size());
  const int k = static_cast<int>(frame.size());
  detail::FrameData<Jet> f;
  f.n = n;
  f.k = k;
  f.euclidean = true;
  f.E = detail::Dense<Jet>(n, k);
  for (int i = 0; i < k; ++i) {
    for (int l = 0; l < n; ++l) f.E(l, i) = frame[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
  }
  const auto L = detail::left_inverse(f);
  for (const auto& w : brackets) {
    std::vector<Jet> c(static_cast<std::size_t>(k), Jet(0.0));
    for (int m = 0; m < k; ++m) {
      for (int l = 0; l < n; ++l) c[static_cast<std::size_t>(m)] += L(m, l) * w[static_cast<std::size_t>(l)];
    }
    for (int l = 0; l < n; ++l) {
      Jet r = w[static_cast<std::size_t>(l)];
      for (int m = 0; m < k; ++m) r -= f.E(l, m) * c[static_cast<std::size_t>(m)];
      if (r.max_abs() > zero_tol) return false;
    }
  }
  return true;
}

}  // namespace

GrowthVector growth_vector(const System& sys, const Point& p, int depth, double tol) {
  if (depth < 1) throw ConfigError("growth vector depth must be at least 1");
  if (p.dim() != sys.dim) throw ConfigError("point dimension does not match the system");
  const int n = sys.dim, k = sys.rank();
  GrowthVector gv;
  gv.point = p;
  gv.depth_cap = depth;

  // Level-d words have order `order - (d - 1)`, so depth-cap words keep two
  // orders beyond their value for the vanishing tests.
  const int order = depth + 1;
  const JetSpace& space = JetSpace::get(n, order);
  std::vector<Word> frame;
  for (const auto& e : sys.frame) frame.push_back(e.taylor(p, space, order));

  double scale = 0.0;
  for (const auto& w : frame) scale = std::max(scale, word_scale(w));
  const double zero_tol = 1e-12 * std::max(1.0, scale);

  std::vector<Vec> columns;
  auto rank_now = [&] {
    Mat m(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = columns[c];
    return numerical_rank(m, tol);
  };
  auto push_values = [&](const Word& w) {
    Vec v(n);
    for (int l = 0; l < n; ++l) v[l] = w[static_cast<std::size_t>(l)].value();
    columns.push_back(std::move(v));
  };

  for (const auto& w : frame) push_values(w);
  gv.dims.push_back(rank_now());
  if (gv.dims.back() == n) return gv;

  std::vector<Word> level = frame;
  for (int d = 2; d <= depth; ++d) {
    std::vector<Word> next;
    if (d == 2) {
      for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
          next.push_back(jet_bracket(frame[static_cast<std::size_t>(i)], frame[static_cast<std::size_t>(j)]));
        }
      }
    } else {
      for (const auto& w : level) {
        for (const auto& e : frame) next.push_back(jet_bracket(w, e));
      }
    }
    std::erase_if(next, [&](const Word& w) { return word_scale(w) <= zero_tol; });
    for (const auto& w : next) push_values(w);
    gv.dims.push_back(rank_now());
    if (gv.dims.back() == n) return gv;
    if (next.empty() || (d == 2 && involutive_as_jets(frame, next, zero_tol))) {
      gv.saturated = true;
      return gv;
    }
    level = std::move(next);
  }
  return gv;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Generating:
      return "generating";
    case Verdict::NotGenerating:
      return "not-generating";
    case Verdict::Inconclusive:
      break;
  }
  return "inconclusive";
}

BracketReport is_bracket_generating(const System& sys, std::span<const Point> points, int depth, double tol) {
  if (points.empty()) throw ConfigError("bracket-generating test needs at least one sample point");
  BracketReport r;
  r.depth_cap = depth;
  bool any_inconclusive = false;
  for (const auto& p : points) {
    PointVerdict pv;
    pv.growth = growth_vector(sys, p, depth, tol);
    if (pv.growth.last() == sys.dim) {
      pv.verdict = Verdict::Generating;
    } else if (pv.growth.saturated) {
      pv.verdict = Verdict::NotGenerating;
      r.witnesses.push_back(p);
    } else {
      pv.verdict = Verdict::Inconclusive;
      any_inconclusive = true;
    }
    r.points.push_back(std::move(pv));
  }
  if (!r.witnesses.empty()) {
    r.verdict = Verdict::NotGenerating;
  } else if (any_inconclusive) {
    r.verdict = Verdict::Inconclusive;
  } else {
    r.verdict = Verdict::Generating;
  }
  return r;
}

double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

OrbitEstimate orbit_dimension(const System& sys, const Point& p, int trials, std::uint64_t seed, double tol) {
  const int n = sys.dim, k = sys.rank();
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return unit_uniform(rng()); };

  OrbitEstimate est;
  est.trials = trials;
  Mat cols = sys.frame_matrix(p);
  est.dimension = numerical_rank(cols, tol);
  for (int t = 0; t < trials && est.dimension < n; ++t) {
    const int len = 1 + std::min(5, static_cast<int>(uniform() * 6.0));
    std::vector<FlowStep> steps;
    for (int s = 0; s < len; ++s) {
      const int idx = std::min(k - 1, static_cast<int>(uniform() * k));
      const double dur = uniform() - 0.5;
      steps.push_back({sys.frame[static_cast<std::size_t>(idx)], dur});
    }
    try {
      Point start = p;
      for (auto it = steps.rbegin(); it != steps.rend(); ++it) start = flow(it->field, start, -it->duration).end;
      const Mat e = sys.frame_matrix(start);
      Mat pushed(n, k);
      for (int j = 0; j < k; ++j) pushed.col(j) = pushforward(steps, Tangent{start, e.col(j)}).comps;
      Mat grown(n, cols.cols() + k);
      grown << cols, pushed;
      cols = std::move(grown);
      est.dimension = numerical_rank(cols, tol);
    } catch (const DomainExit&) {
      ++est.skipped;
    } catch (const StepUnderflow&) {
      ++est.skipped;
    } catch (const DomainError&) {
      ++est.skipped;
    }
  }
  return est;
}

int orbit_dimension_estimate(const System& sys, const Point& p, int trials, std::uint64_t seed) {
  return orbit_dimension(sys, p, trials, seed).dimension;
}

std::vector<Point> sample_points(const System& sys, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Point> out;
  const int n = sys.dim;
  const long budget = 1000L * std::max(1, count);
  for (long attempt = 0; attempt < budget && static_cast<int>(out.size()) < count; ++attempt) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = sys.box.lo[i] + unit_uniform(rng()) * (sys.box.hi[i] - sys.box.lo[i]);
    Point p(std::move(x));
    if (!sys.contains(p)) continue;
    try {
      sys.check_at(p);
    } catch (const Error&) {
      continue;
    }
    out.push_back(std::move(p));
  }
  if (static_cast<int>(out.size()) < count) throw ConfigError("could not sample enough valid points in the sample box");
  return out;
}

}  // namespace slitbundle
