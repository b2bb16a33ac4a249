#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "slitbundle/dual.hpp"
#include "slitbundle/expr.hpp"
#include "slitbundle/jet.hpp"
#include "slitbundle/ode.hpp"

namespace slitbundle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Chart coordinates of a point of the manifold.
struct Point {
  Vec coords;

  Point() = default;
  explicit Point(Vec c) : coords(std::move(c)) {}
  Point(std::initializer_list<double> c) : coords(Eigen::Map<const Vec>(c.begin(), static_cast<Eigen::Index>(c.size()))) {}

  int dim() const { return static_cast<int>(coords.size()); }
  std::span<const double> span() const { return {coords.data(), static_cast<std::size_t>(coords.size())}; }
};

/// Tangent vector in chart components, tagged with its base point.
struct Tangent {
  Point base;
  Vec comps;
  int dim() const { return static_cast<int>(comps.size()); }
};

/// Open subset of the chart cut out by strict inequalities h_i(x) > 0.
/// An empty inequality list is the whole chart.
class Domain {
 public:
  Domain() = default;
  explicit Domain(std::vector<Expression> inequalities) : inequalities_(std::move(inequalities)) {}

  bool contains(std::span<const double> x) const;
  /// min_i h_i(x); +inf for the whole chart. Positive inside.
  double margin(std::span<const double> x) const;
  bool unbounded() const noexcept { return inequalities_.empty(); }
  const std::vector<Expression>& inequalities() const noexcept { return inequalities_; }

 private:
  std::vector<Expression> inequalities_;
};

/// Vector-valued map R^in -> R^out evaluable with plain doubles and, when
/// differentiable, with first-order duals and arbitrary-order jets.
class FieldEvaluator {
 public:
  virtual ~FieldEvaluator() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual bool differentiable() const { return true; }
  virtual void eval(std::span<const double> x, std::span<double> out) const = 0;
  virtual void eval(std::span<const Dual> x, std::span<Dual> out) const;
  virtual void eval(std::span<const Jet> x, std::span<Jet> out) const;
};

/// Field given by one expression per output component.
class ExpressionEvaluator final : public FieldEvaluator {
 public:
  ExpressionEvaluator(std::vector<Expression> components, int input_dim);
  int input_dim() const override { return input_dim_; }
  int output_dim() const override { return static_cast<int>(components_.size()); }
  void eval(std::span<const double> x, std::span<double> out) const override;
  void eval(std::span<const Dual> x, std::span<Dual> out) const override;
  void eval(std::span<const Jet> x, std::span<Jet> out) const override;
  const std::vector<Expression>& components() const noexcept { return components_; }

 private:
  std::vector<Expression> components_;
  int input_dim_;
};

/// Closed-form field written once as a template over the scalar type:
///   struct F { template <class S> void operator()(std::span<const S>, std::span<S>) const; };
template <class F>
class ClosedFormEvaluator final : public FieldEvaluator {
 public:
  ClosedFormEvaluator(F f, int input_dim, int output_dim)
      : f_(std::move(f)), in_(input_dim), out_(output_dim) {}
  int input_dim() const override { return in_; }
  int output_dim() const override { return out_; }
  void eval(std::span<const double> x, std::span<double> out) const override { f_(x, out); }
  void eval(std::span<const Dual> x, std::span<Dual> out) const override { f_(x, out); }
  void eval(std::span<const Jet> x, std::span<Jet> out) const override { f_(x, out); }

 private:
  F f_;
  int in_, out_;
};

/// Black-box field with values only; derivatives fall back to finite differences.
class OpaqueEvaluator final : public FieldEvaluator {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;
  OpaqueEvaluator(Fn fn, int input_dim, int output_dim)
      : fn_(std::move(fn)), in_(input_dim), out_(output_dim) {}
  int input_dim() const override { return in_; }
  int output_dim() const override { return out_; }
  bool differentiable() const override { return false; }
  void eval(std::span<const double> x, std::span<double> out) const override { fn_(x, out); }

 private:
  Fn fn_;
  int in_, out_;
};

/// Locally defined smooth vector field on an open subset of R^n.
class VectorField {
 public:
  VectorField() = default;
  VectorField(std::shared_ptr<const FieldEvaluator> eval, Domain domain = {});

  static VectorField from_expressions(const std::vector<std::string>& components, int dim, Domain domain = {});
  template <class F>
  static VectorField closed_form(F f, int dim, Domain domain = {}) {
    return VectorField(std::make_shared<ClosedFormEvaluator<F>>(std::move(f), dim, dim), std::move(domain));
  }
  static VectorField opaque(OpaqueEvaluator::Fn fn, int dim, Domain domain = {});
  static VectorField zero(int dim);
  static VectorField coordinate(int dim, int axis);

  int dim() const { return eval_ ? eval_->input_dim() : 0; }
  const Domain& domain() const noexcept { return domain_; }
  const FieldEvaluator& evaluator() const { return *eval_; }
  bool differentiable() const { return eval_ && eval_->differentiable(); }
  bool contains(std::span<const double> x) const { return domain_.contains(x); }

  Vec operator()(const Point& p) const;
  void eval(std::span<const double> x, std::span<double> out) const { eval_->eval(x, out); }
  /// Value and Jacobian DX(p) (forward duals, or central differences for opaque fields).
  Mat jacobian(const Point& p, Vec* value = nullptr) const;
  /// Taylor jets of the components at p in the given space.
  std::vector<Jet> taylor(const Point& p, const JetSpace& space, int order) const;

 private:
  std::shared_ptr<const FieldEvaluator> eval_;
  Domain domain_;
};

/// [X, Y](p) = DY(p) X(p) - DX(p) Y(p).
Tangent lie_bracket(const VectorField& x, const VectorField& y, const Point& p);

/// Bracket of two fields given by their Taylor jets at a common point.
/// Inputs of order r produce an output of order r - 1.
std::vector<Jet> jet_bracket(std::span<const Jet> x, std::span<const Jet> y);

struct FlowResult {
  Point end;
  OdeSolution trajectory;
};

/// Flow of X for time t starting at p (t may be negative).
FlowResult flow(const VectorField& x, const Point& p, double t, const OdeOptions& options = {});

/// One factor of a flow composition: the time-`duration` flow of `field`.
struct FlowStep {
  VectorField field;
  double duration = 0.0;
};

/// Image of a point under the composition; steps apply in list order.
Point flow_composition(std::span<const FlowStep> steps, const Point& p, const OdeOptions& options = {});

/// Tangent map of the composition applied to v, via the variational equation
/// integrated jointly with the state.
Tangent pushforward(std::span<const FlowStep> steps, const Tangent& v, const OdeOptions& options = {});

}  // namespace slitbundle
