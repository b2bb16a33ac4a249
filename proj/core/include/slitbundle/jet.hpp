#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace slitbundle {

/// Index tables for truncated Taylor polynomials in `vars` variables up to
/// total degree `order`. Monomials are graded (all degree-d monomials precede
/// degree d+1), so the order-r truncation of a jet is a prefix of its
/// coefficient array. Spaces are interned and live for the whole process.
class JetSpace {
 public:
  struct Product {
    std::uint32_t lhs, rhs, out;
  };
  struct DerivativeTerm {
    std::uint32_t from, to;
    double factor;
  };

  static const JetSpace& get(int vars, int order);

  int vars() const noexcept { return vars_; }
  int order() const noexcept { return order_; }
  /// Number of monomials of total degree <= order.
  std::size_t size(int order) const { return prefix_[static_cast<std::size_t>(order)]; }
  int degree(std::size_t index) const { return degree_[index]; }
  std::span<const int> exponents(std::size_t index) const {
    return {exps_.data() + index * static_cast<std::size_t>(vars_), static_cast<std::size_t>(vars_)};
  }
  /// Index of the monomial with the given exponents; requires total degree <= order().
  std::size_t index_of(std::span<const int> exponents) const;

  /// Products whose output degree is <= order, sorted by output degree.
  std::span<const Product> products(int order) const {
    return {products_.data(), product_prefix_[static_cast<std::size_t>(order)]};
  }
  /// Terms mapping the coefficients of an order-`order` jet to its derivative
  /// along `var` (an order-(order-1) jet).
  std::span<const DerivativeTerm> derivative(int var, int order) const;

 private:
  JetSpace(int vars, int order);

  int vars_;
  int order_;
  std::vector<int> exps_;
  std::vector<int> degree_;
  std::vector<std::size_t> prefix_;
  std::vector<Product> products_;
  std::vector<std::size_t> product_prefix_;
  std::vector<std::vector<DerivativeTerm>> derivs_;  // per variable, sorted by `from` degree
  std::vector<std::vector<std::size_t>> deriv_prefix_;
};

/// Truncated multivariate Taylor polynomial (forward-mode AD of arbitrary
/// order). Coefficients are Taylor coefficients around the expansion point, so
/// the value is coeff(0), the gradient is coeff(1..vars) and
/// d^2f/dx_i dx_j = coeff(x_i x_j) * (i == j ? 2 : 1).
/// A jet without a space is an exact constant, compatible with every space.
class Jet {
 public:
  Jet() = default;
  Jet(double constant) : c_{constant} {}  // NOLINT(google-explicit-constructor)

  /// The coordinate function x_var expanded at `at`, truncated at `order`.
  static Jet variable(const JetSpace& space, int var, double at, int order);
  static Jet variable(const JetSpace& space, int var, double at) {
    return variable(space, var, at, space.order());
  }

  bool is_constant() const noexcept { return space_ == nullptr; }
  const JetSpace* space() const noexcept { return space_; }
  /// Truncation order; exact constants report a very large order.
  int order() const noexcept { return space_ ? order_ : kExactOrder; }
  double value() const noexcept { return c_.empty() ? 0.0 : c_[0]; }
  double coeff(std::size_t i) const { return i < c_.size() ? c_[i] : 0.0; }
  std::span<const double> coeffs() const noexcept { return c_; }
  /// Largest absolute coefficient.
  double max_abs() const;

  /// Partial derivative along `var`; the result has order() - 1.
  Jet derivative(int var) const;
  Jet truncated(int order) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator*=(double s);

  friend Jet operator-(Jet a);
  friend Jet operator*(const Jet& a, const Jet& b);

  /// f(this) given the Taylor coefficients f^(m)(value)/m! of f at value().
  Jet compose(std::span<const double> taylor) const;

  static constexpr int kExactOrder = 1 << 20;

 private:
  Jet(const JetSpace* space, int order, std::vector<double> c)
      : space_(space), order_(order), c_(std::move(c)) {}
  void promote(const JetSpace* space, int order);

  const JetSpace* space_ = nullptr;
  int order_ = 0;
  std::vector<double> c_{0.0};
};

inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
Jet operator/(const Jet& a, const Jet& b);
Jet reciprocal(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet exp(const Jet& a);
Jet sqrt(const Jet& a);

inline double value_of(const Jet& a) { return a.value(); }
inline bool carries_derivatives(const Jet& a) { return !a.is_constant() && a.order() > 0; }

}  // namespace slitbundle
