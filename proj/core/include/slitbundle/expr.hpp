#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "slitbundle/dual.hpp"
#include "slitbundle/jet.hpp"

namespace slitbundle {

// Grammar (whitespace-insensitive):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' ['-'] integer)*
//   primary := number | 'x' index | 'pi' | func '(' expr ')' | '(' expr ')'
//   func    := 'sin' | 'cos' | 'exp' | 'sqrt'
//
// Variables are 1-based: x1 .. xn. Binary operators are left-associative.

enum class ExprOp { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Sqrt };

struct ExprNode {
  ExprOp op = ExprOp::Number;
  double number = 0.0;    // Number
  int index = 0;          // Variable (0-based) or Pow exponent
  std::size_t offset = 0; // byte offset in the source text
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

/// Immutable parsed scalar expression over x1..xn.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view source, int dim);
  static Expression constant(double value, int dim);

  int dim() const noexcept { return dim_; }
  const ExprNode& root() const { return *root_; }
  bool valid() const noexcept { return root_ != nullptr; }

  /// Canonical fully parenthesized text; parse(print()) rebuilds the same tree.
  std::string print() const;

  /// Evaluates at a point; S is double, Dual or Jet.
  template <class S>
  S evaluate(std::span<const S> x) const;

  double operator()(std::span<const double> x) const { return evaluate<double>(x); }

  /// True when both trees have the same shape, operators and literal values.
  friend bool structurally_equal(const Expression& a, const Expression& b);

 private:
  Expression(std::shared_ptr<const ExprNode> root, int dim) : root_(std::move(root)), dim_(dim) {}

  std::shared_ptr<const ExprNode> root_;
  int dim_ = 0;
};

std::string print_node(const ExprNode& node);

struct Derivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::optional<Eigen::MatrixXd> hessian;
};

/// Value and gradient (order 1) or value, gradient and Hessian (order 2),
/// exact up to rounding via forward-mode differentiation.
Derivatives eval_with_derivatives(const Expression& e, std::span<const double> p, int order);

extern template double Expression::evaluate<double>(std::span<const double>) const;
extern template Dual Expression::evaluate<Dual>(std::span<const Dual>) const;
extern template Jet Expression::evaluate<Jet>(std::span<const Jet>) const;

}  // namespace slitbundle
