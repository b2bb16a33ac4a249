#include "slitbundle/chart.hpp"

#include <cmath>
#include <limits>

#include "slitbundle/error.hpp"

namespace slitbundle {

bool Domain::contains(std::span<const double> x) const {
  for (const auto& h : inequalities_) {
    double v;
    try {
      v = h(x);
    } catch (const DomainError&) {
      return false;
    }
    if (!(v > 0.0)) return false;
  }
  return true;
}

double Domain::margin(std::span<const double> x) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& h : inequalities_) {
    double v;
    try {
      v = h(x);
    } catch (const DomainError&) {
      v = -std::numeric_limits<double>::infinity();
    }
    m = std::min(m, v);
  }
  return m;
}

void FieldEvaluator::eval(std::span<const Dual>, std::span<Dual>) const {
  throw Error("field has no dual-number evaluation");
}

void FieldEvaluator::eval(std::span<const Jet>, std::span<Jet>) const {
  throw Error("field has no jet evaluation");
}

ExpressionEvaluator::ExpressionEvaluator(std::vector<Expression> components, int input_dim)
    : components_(std::move(components)), input_dim_(input_dim) {
  for (const auto& c : components_) {
    if (c.dim() > input_dim_) throw ConfigError("component expression references too many variables");
  }
}

void ExpressionEvaluator::eval(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].evaluate<double>(x);
}

void ExpressionEvaluator::eval(std::span<const Dual> x, std::span<Dual> out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].evaluate<Dual>(x);
}

void ExpressionEvaluator::eval(std::span<const Jet> x, std::span<Jet> out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].evaluate<Jet>(x);
}

VectorField::VectorField(std::shared_ptr<const FieldEvaluator> eval, Domain domain)
    : eval_(std::move(eval)), domain_(std::move(domain)) {
  if (!eval_) throw Error("null field evaluator");
  if (eval_->input_dim() != eval_->output_dim()) throw ConfigError("vector field must map R^n to R^n");
}

VectorField VectorField::from_expressions(const std::vector<std::string>& components, int dim, Domain domain) {
  if (static_cast<int>(components.size()) != dim) {
    throw ConfigError("vector field needs " + std::to_string(dim) + " components, got " +
                      std::to_string(components.size()));
  }
  std::vector<Expression> exprs;
  exprs.reserve(components.size());
  for (const auto& c : components) exprs.push_back(Expression::parse(c, dim));
  return VectorField(std::make_shared<ExpressionEvaluator>(std::move(exprs), dim), std::move(domain));
}

VectorField VectorField::opaque(OpaqueEvaluator::Fn fn, int dim, Domain domain) {
  return VectorField(std::make_shared<OpaqueEvaluator>(std::move(fn), dim, dim), std::move(domain));
}

VectorField VectorField::zero(int dim) {
  std::vector<Expression> exprs(static_cast<std::size_t>(dim), Expression::constant(0.0, dim));
  return VectorField(std::make_shared<ExpressionEvaluator>(std::move(exprs), dim));
}

VectorField VectorField::coordinate(int dim, int axis) {
  std::vector<Expression> exprs;
  for (int i = 0; i < dim; ++i) exprs.push_back(Expression::constant(i == axis ? 1.0 : 0.0, dim));
  return VectorField(std::make_shared<ExpressionEvaluator>(std::move(exprs), dim));
}

Vec VectorField::operator()(const Point& p) const {
  Vec out(dim());
  eval_->eval(p.span(), {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Mat VectorField::jacobian(const Point& p, Vec* value) const {
  const int n = dim();
  Mat jac(n, n);
  if (differentiable() && n <= kMaxDualDirections) {
    std::vector<Dual> x(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = Dual::variable(p.coords[i], i, n);
    eval_->eval(std::span<const Dual>(x), std::span<Dual>(out));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) jac(r, c) = out[static_cast<std::size_t>(r)].d(c);
    }
    if (value) {
      value->resize(n);
      for (int r = 0; r < n; ++r) (*value)[r] = out[static_cast<std::size_t>(r)].value;
    }
    return jac;
  }
  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + p.coords.norm());
  Vec xp = p.coords, fp(n), fm(n);
  for (int c = 0; c < n; ++c) {
    xp[c] = p.coords[c] + h;
    eval_->eval({xp.data(), static_cast<std::size_t>(n)}, {fp.data(), static_cast<std::size_t>(n)});
    xp[c] = p.coords[c] - h;
    eval_->eval({xp.data(), static_cast<std::size_t>(n)}, {fm.data(), static_cast<std::size_t>(n)});
    xp[c] = p.coords[c];
    jac.col(c) = (fp - fm) / (2.0 * h);
  }
  if (value) *value = (*this)(p);
  return jac;
}

std::vector<Jet> VectorField::taylor(const Point& p, const JetSpace& space, int order) const {
  if (!differentiable()) throw Error("opaque field has no Taylor expansion");
  const int n = dim();
  std::vector<Jet> x, out(static_cast<std::size_t>(n));
  x.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x.push_back(Jet::variable(space, i, p.coords[i], order));
  eval_->eval(std::span<const Jet>(x), std::span<Jet>(out));
  return out;
}

Tangent lie_bracket(const VectorField& x, const VectorField& y, const Point& p) {
  if (!x.contains(p.span()) || !y.contains(p.span())) throw DomainError("point outside the field domains");
  Vec xv, yv;
  const Mat dx = x.jacobian(p, &xv);
  const Mat dy = y.jacobian(p, &yv);
  return {p, dy * xv - dx * yv};
}

std::vector<Jet> jet_bracket(std::span<const Jet> x, std::span<const Jet> y) {
  const std::size_t n = x.size();
  std::vector<Jet> out(n, Jet(0.0));
  for (std::size_t l = 0; l < n; ++l) {
    Jet acc(0.0);
    // Constant components have zero derivative; skip them.
    for (std::size_t s = 0; s < n; ++s) {
      if (!y[l].is_constant()) acc += y[l].derivative(static_cast<int>(s)) * x[s];
      if (!x[l].is_constant()) acc -= x[l].derivative(static_cast<int>(s)) * y[s];
    }
    out[l] = std::move(acc);
  }
  return out;
}

FlowResult flow(const VectorField& x, const Point& p, double t, const OdeOptions& options) {
  if (!x.contains(p.span())) throw DomainExit("flow start outside the field domain", 0.0);
  const int n = x.dim();
  OdeRhs rhs = [&x](double, std::span<const double> y, std::span<double> dy) { x.eval(y, dy); };
  OdeGuard guard = [&x](double, std::span<const double> y) { return x.contains(y); };
  FlowResult r;
  r.trajectory = integrate_dopri5(rhs, 0.0, p.span(), t, options, x.domain().unbounded() ? OdeGuard{} : guard);
  const auto end = r.trajectory.back();
  r.end = Point(Eigen::Map<const Vec>(end.data(), n));
  return r;
}

Point flow_composition(std::span<const FlowStep> steps, const Point& p, const OdeOptions& options) {
  Point q = p;
  for (const auto& s : steps) q = flow(s.field, q, s.duration, options).end;
  return q;
}

Tangent pushforward(std::span<const FlowStep> steps, const Tangent& v, const OdeOptions& options) {
  const int n = v.dim();
  Vec state(2 * n);
  state.head(n) = v.base.coords;
  state.tail(n) = v.comps;
  for (const auto& s : steps) {
    const VectorField& field = s.field;
    if (!field.contains({state.data(), static_cast<std::size_t>(n)})) {
      throw DomainExit("pushforward start outside the field domain", 0.0);
    }
    OdeRhs rhs;
    if (field.differentiable()) {
      // One dual direction along V gives X(x) and DX(x) V in a single evaluation.
      rhs = [&field, n](double, std::span<const double> y, std::span<double> dy) {
        std::vector<Dual> x(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          x[static_cast<std::size_t>(i)] = Dual::directional(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(n + i)]);
        }
        field.evaluator().eval(std::span<const Dual>(x), std::span<Dual>(out));
        for (int i = 0; i < n; ++i) {
          dy[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i)].value;
          dy[static_cast<std::size_t>(n + i)] = out[static_cast<std::size_t>(i)].d(0);
        }
      };
    } else {
      rhs = [&field, n](double, std::span<const double> y, std::span<double> dy) {
        const Point p(Eigen::Map<const Vec>(y.data(), n));
        Vec val;
        const Mat jac = field.jacobian(p, &val);
        const Vec dv = jac * Eigen::Map<const Vec>(y.data() + n, n);
        for (int i = 0; i < n; ++i) {
          dy[static_cast<std::size_t>(i)] = val[i];
          dy[static_cast<std::size_t>(n + i)] = dv[i];
        }
      };
    }
    OdeGuard guard = [&field](double, std::span<const double> y) { return field.contains(y.first(static_cast<std::size_t>(y.size() / 2))); };
    const auto sol = integrate_dopri5(rhs, 0.0, {state.data(), static_cast<std::size_t>(2 * n)}, s.duration, options,
                                      field.domain().unbounded() ? OdeGuard{} : guard);
    const auto end = sol.back();
    state = Eigen::Map<const Vec>(end.data(), 2 * n);
  }
  return {Point(state.head(n)), state.tail(n)};
}

}  // namespace slitbundle
