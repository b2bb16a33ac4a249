#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slitbundle/chart.hpp"

namespace slitbundle {

/// Symmetric n x n matrix field g(q), stored row-major as an n*n-output evaluator.
class MetricField {
 public:
  MetricField() = default;
  /// The Euclidean metric; Christoffel symbols are skipped entirely.
  static MetricField euclidean(int dim);
  static MetricField from_expressions(const std::vector<std::vector<std::string>>& entries, int dim);
  template <class F>
  static MetricField closed_form(F f, int dim) {
    MetricField m;
    m.dim_ = dim;
    m.eval_ = std::make_shared<ClosedFormEvaluator<F>>(std::move(f), dim, dim * dim);
    return m;
  }

  int dim() const noexcept { return dim_; }
  bool is_euclidean() const noexcept { return eval_ == nullptr; }
  const FieldEvaluator& evaluator() const { return *eval_; }

  Mat operator()(const Point& q) const;

 private:
  int dim_ = 0;
  std::shared_ptr<const FieldEvaluator> eval_;  // null for Euclidean
};

/// Axis-aligned box used to draw random sample points of a system.
struct SampleBox {
  Vec lo;
  Vec hi;
};

/// A constant-rank distribution on an open subset of R^n, given by a frame of
/// k vector fields, with an auxiliary Riemannian metric.
struct System {
  std::string name;
  int dim = 0;
  std::vector<VectorField> frame;
  MetricField metric;
  Domain domain;
  SampleBox box;
  double rank_tol = 1e-7;

  int rank() const noexcept { return static_cast<int>(frame.size()); }
  bool contains(const Point& q) const { return domain.contains(q.span()); }

  /// n x k matrix whose columns are the frame vectors at q.
  Mat frame_matrix(const Point& q) const;
  Mat metric_matrix(const Point& q) const { return metric(q); }
  /// Ambient vector sum_i a_i E_i(q).
  Vec ambient(const Point& q, const Vec& a) const { return frame_matrix(q) * a; }
  /// g-norm of an ambient vector at q.
  double norm(const Point& q, const Vec& v) const;

  /// Checks k in [2, n], frame independence and metric positivity at q.
  /// Throws RankDeficiency or ConfigError on failure.
  void check_at(const Point& q) const;
};

/// Builds the frame/metric of a system; validates shapes.
System make_system(std::string name, int dim, std::vector<VectorField> frame, MetricField metric,
                   Domain domain = {}, SampleBox box = {});

}  // namespace slitbundle
