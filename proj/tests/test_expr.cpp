#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "slitbundle/error.hpp"
#include "slitbundle/expr.hpp"
#include "support.hpp"

namespace slitbundle {
namespace {

double eval_at(const std::string& src, std::vector<double> x) {
  const auto e = Expression::parse(src, static_cast<int>(x.size()));
  return e(x);
}

TEST(Expr, SingleVariable) {
  const auto e = Expression::parse("x1", 3);
  EXPECT_EQ(e.root().op, ExprOp::Variable);
  EXPECT_EQ(e.root().index, 0);
}

TEST(Expr, ProductMinusSine) { EXPECT_DOUBLE_EQ(eval_at("x1*x2 - sin(x3)", {2, 3, 0}), 6.0); }

TEST(Expr, PolynomialAgainstDirectArithmetic) {
  const double x1 = 2, x2 = 1;
  EXPECT_DOUBLE_EQ(eval_at("x2 + x1^2/2", {x1, x2, 0}), x2 + x1 * x1 / 2);
}

TEST(Expr, Precedence) {
  EXPECT_DOUBLE_EQ(eval_at("-x1^2", {3}), -9.0);
  EXPECT_DOUBLE_EQ(eval_at("2 - 3 - 4", {0}), -5.0);
  EXPECT_DOUBLE_EQ(eval_at("8 / 4 / 2", {0}), 1.0);
  EXPECT_DOUBLE_EQ(eval_at("1 + 2 * 3^2", {0}), 19.0);
  EXPECT_DOUBLE_EQ(eval_at("  x1 *   ( x1+1 ) ", {2}), 6.0);
  EXPECT_DOUBLE_EQ(eval_at("x1^-2", {2}), 0.25);
  EXPECT_NEAR(eval_at("pi", {0}), std::numbers::pi, 1e-15);
}

TEST(Expr, SyntaxErrorCarriesOffset) {
  try {
    Expression::parse("x1 + * x2", 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 5u);
  }
}

TEST(Expr, UnknownIdentifier) { EXPECT_THROW(Expression::parse("tan(x1)", 1), ParseError); }

TEST(Expr, VariableIndexOutOfRange) {
  EXPECT_THROW(Expression::parse("x4", 3), ParseError);
  EXPECT_THROW(Expression::parse("x0", 3), ParseError);
}

TEST(Expr, NonIntegerExponentRejected) { EXPECT_THROW(Expression::parse("x1^1.5", 1), ParseError); }

TEST(Expr, DomainErrorsAtEvaluation) {
  const auto div = Expression::parse("1/(x1 - 1)", 1);
  EXPECT_THROW(div(std::vector<double>{1.0}), DomainError);
  const auto root = Expression::parse("sqrt(x1)", 1);
  try {
    root(std::vector<double>{-1.0});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("sqrt"), std::string::npos);
  }
}

TEST(Expr, GradientOfSquare) {
  const auto d = eval_with_derivatives(Expression::parse("x1^2", 1), std::vector<double>{3.0}, 1);
  EXPECT_DOUBLE_EQ(d.value, 9.0);
  EXPECT_DOUBLE_EQ(d.gradient[0], 6.0);
  EXPECT_FALSE(d.hessian.has_value());
}

TEST(Expr, SineAtZeroSecondOrder) {
  const auto d = eval_with_derivatives(Expression::parse("sin(x1)", 1), std::vector<double>{0.0}, 2);
  EXPECT_DOUBLE_EQ(d.value, 0.0);
  EXPECT_DOUBLE_EQ(d.gradient[0], 1.0);
  ASSERT_TRUE(d.hessian.has_value());
  EXPECT_DOUBLE_EQ((*d.hessian)(0, 0), 0.0);
}

TEST(Expr, ExpProductAgainstCentralDifferences) {
  const auto e = Expression::parse("exp(x1*x2)", 2);
  const auto d = eval_with_derivatives(e, std::vector<double>{1.0, 1.0}, 1);
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> plus{1.0, 1.0}, minus{1.0, 1.0};
    plus[i] += h;
    minus[i] -= h;
    const double fd = (e(plus) - e(minus)) / (2 * h);
    EXPECT_NEAR(d.gradient[i], fd, 1e-8 * std::abs(fd));
    EXPECT_NEAR(d.gradient[i], std::exp(1.0), 1e-14);
  }
}

TEST(Expr, HessianMatchesClosedForm) {
  // f = x1^2 x2 + sin(x2): H = [[2 x2, 2 x1], [2 x1, -sin x2]]
  const auto d = eval_with_derivatives(Expression::parse("x1^2*x2 + sin(x2)", 2), std::vector<double>{0.7, -1.3}, 2);
  const Mat& H = *d.hessian;
  EXPECT_NEAR(H(0, 0), 2 * -1.3, 1e-14);
  EXPECT_NEAR(H(0, 1), 2 * 0.7, 1e-14);
  EXPECT_NEAR(H(1, 0), 2 * 0.7, 1e-14);
  EXPECT_NEAR(H(1, 1), -std::sin(-1.3), 1e-14);
}

TEST(ExprProperty, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto src = testing::random_expression(rng, 6);
    const auto e = Expression::parse(src, 3);
    const Vec x = testing::random_vec(rng, 3, 1.0);
    const std::vector<double> xs(x.data(), x.data() + 3);
    const auto d = eval_with_derivatives(e, xs, 1);
    auto f = [&](const Vec& y) {
      Vec out(1);
      out[0] = e(std::vector<double>(y.data(), y.data() + 3));
      return out;
    };
    for (int i = 0; i < 3; ++i) {
      const double fd = testing::central_difference(f, x, Vec::Unit(3, i), 1e-4)[0];
      EXPECT_LE(std::abs(d.gradient[i] - fd), 1e-6 * std::max({1.0, std::abs(fd), std::abs(d.value)}))
          << src << " component " << i;
    }
  }
}

TEST(ExprProperty, PrintParseRoundTrip) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto e = Expression::parse(testing::random_expression(rng, 6), 3);
    const auto again = Expression::parse(e.print(), 3);
    EXPECT_TRUE(structurally_equal(e, again)) << e.print();
    EXPECT_EQ(again.print(), e.print());
  }
}

}  // namespace
}  // namespace slitbundle
