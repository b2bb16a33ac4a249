#include "slitbundle/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "slitbundle/error.hpp"
#include "slitbundle/scalar.hpp"

namespace slitbundle {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_node(ExprOp op, std::size_t offset, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->offset = offset;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  Parser(std::string_view src, int dim) : src_(src), dim_(dim) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (accept('+')) {
        lhs = make_node(ExprOp::Add, at, lhs, term());
      } else if (accept('-')) {
        lhs = make_node(ExprOp::Sub, at, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (accept('*')) {
        lhs = make_node(ExprOp::Mul, at, lhs, unary());
      } else if (accept('/')) {
        lhs = make_node(ExprOp::Div, at, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    skip_space();
    const std::size_t at = pos_;
    if (accept('-')) return make_node(ExprOp::Negate, at, unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    for (;;) {
      skip_space();
      const std::size_t at = pos_;
      if (!accept('^')) return base;
      skip_space();
      bool negative = false;
      if (pos_ < src_.size() && src_[pos_] == '-') {
        negative = true;
        ++pos_;
      }
      const std::size_t digits_begin = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ == digits_begin) fail("exponent must be an integer literal");
      if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E')) {
        fail("exponent must be an integer literal");
      }
      int e = 0;
      const auto [ptr, ec] = std::from_chars(src_.data() + digits_begin, src_.data() + pos_, e);
      if (ec != std::errc()) fail("exponent out of range");
      auto n = std::make_shared<ExprNode>();
      n->op = ExprOp::Pow;
      n->offset = at;
      n->index = negative ? -e : e;
      n->lhs = std::move(base);
      base = std::move(n);
    }
  }

  NodePtr primary() {
    skip_space();
    const std::size_t at = pos_;
    if (pos_ >= src_.size()) fail("unexpected end of expression");
    const char c = src_[pos_];
    if (accept('(')) {
      NodePtr e = expression();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
        ++end;
      }
      const std::string_view ident = src_.substr(pos_, end - pos_);
      if (ident.size() >= 2 && ident[0] == 'x' &&
          ident.find_first_not_of("0123456789", 1) == std::string_view::npos) {
        int idx = 0;
        const auto [ptr, ec] = std::from_chars(ident.data() + 1, ident.data() + ident.size(), idx);
        if (ec != std::errc() || idx < 1) fail("invalid variable '" + std::string(ident) + "'");
        if (idx > dim_) {
          fail("variable '" + std::string(ident) + "' has index " + std::to_string(idx - 1) +
               " >= dimension " + std::to_string(dim_));
        }
        pos_ = end;
        auto n = std::make_shared<ExprNode>();
        n->op = ExprOp::Variable;
        n->index = idx - 1;
        n->offset = at;
        return n;
      }
      if (ident == "pi") {
        pos_ = end;
        auto n = std::make_shared<ExprNode>();
        n->op = ExprOp::Number;
        n->number = std::numbers::pi;
        n->offset = at;
        return n;
      }
      ExprOp fn;
      if (ident == "sin") {
        fn = ExprOp::Sin;
      } else if (ident == "cos") {
        fn = ExprOp::Cos;
      } else if (ident == "exp") {
        fn = ExprOp::Exp;
      } else if (ident == "sqrt") {
        fn = ExprOp::Sqrt;
      } else {
        fail("unknown identifier '" + std::string(ident) + "'");
      }
      pos_ = end;
      if (!accept('(')) fail("expected '(' after " + std::string(ident));
      NodePtr arg = expression();
      if (!accept(')')) fail("expected ')'");
      return make_node(fn, at, std::move(arg));
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) {
      ++end;
    }
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
      if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
        end = e;
        while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
      }
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(src_.data() + at, src_.data() + end, value);
    if (ec != std::errc() || ptr != src_.data() + end) fail("malformed number");
    pos_ = end;
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::Number;
    n->number = value;
    n->offset = at;
    return n;
  }

  std::string_view src_;
  int dim_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const char* function_name(ExprOp op) {
  switch (op) {
    case ExprOp::Sin: return "sin";
    case ExprOp::Cos: return "cos";
    case ExprOp::Exp: return "exp";
    case ExprOp::Sqrt: return "sqrt";
    default: return "?";
  }
}

[[noreturn]] void domain_failure(const std::string& what, const ExprNode& node) {
  throw DomainError(what + " in '" + print_node(node) + "' at offset " + std::to_string(node.offset));
}

template <class S>
S eval_node(const ExprNode& n, std::span<const S> x) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::sqrt;
  switch (n.op) {
    case ExprOp::Number: return S(n.number);
    case ExprOp::Variable: return x[static_cast<std::size_t>(n.index)];
    case ExprOp::Negate: return -eval_node(*n.lhs, x);
    case ExprOp::Add: return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
    case ExprOp::Sub: return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
    case ExprOp::Mul: return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
    case ExprOp::Div: {
      S num = eval_node(*n.lhs, x);
      S den = eval_node(*n.rhs, x);
      if (value_of(den) == 0.0) domain_failure("division by zero", n);
      return num / den;
    }
    case ExprOp::Pow: {
      S base = eval_node(*n.lhs, x);
      if (n.index < 0 && value_of(base) == 0.0) domain_failure("negative power of zero", n);
      return integer_power(base, n.index);
    }
    case ExprOp::Sin: return sin(eval_node(*n.lhs, x));
    case ExprOp::Cos: return cos(eval_node(*n.lhs, x));
    case ExprOp::Exp: return exp(eval_node(*n.lhs, x));
    case ExprOp::Sqrt: {
      S arg = eval_node(*n.lhs, x);
      const double v = value_of(arg);
      if (v < 0.0) domain_failure("sqrt of a negative number", n);
      if (v == 0.0 && carries_derivatives(arg)) domain_failure("sqrt is not differentiable at 0", n);
      return sqrt(arg);
    }
  }
  return S(0.0);
}

bool nodes_equal(const ExprNode* a, const ExprNode* b) {
  if (a == nullptr || b == nullptr) return a == b;
  if (a->op != b->op) return false;
  switch (a->op) {
    case ExprOp::Number: return a->number == b->number;
    case ExprOp::Variable: return a->index == b->index;
    case ExprOp::Pow: return a->index == b->index && nodes_equal(a->lhs.get(), b->lhs.get());
    default: return nodes_equal(a->lhs.get(), b->lhs.get()) && nodes_equal(a->rhs.get(), b->rhs.get());
  }
}

}  // namespace

std::string print_node(const ExprNode& n) {
  switch (n.op) {
    case ExprOp::Number: return format_number(n.number);
    case ExprOp::Variable: return "x" + std::to_string(n.index + 1);
    case ExprOp::Negate: return "(-" + print_node(*n.lhs) + ")";
    case ExprOp::Add: return "(" + print_node(*n.lhs) + " + " + print_node(*n.rhs) + ")";
    case ExprOp::Sub: return "(" + print_node(*n.lhs) + " - " + print_node(*n.rhs) + ")";
    case ExprOp::Mul: return "(" + print_node(*n.lhs) + " * " + print_node(*n.rhs) + ")";
    case ExprOp::Div: return "(" + print_node(*n.lhs) + " / " + print_node(*n.rhs) + ")";
    case ExprOp::Pow: return "(" + print_node(*n.lhs) + "^" + std::to_string(n.index) + ")";
    case ExprOp::Sin:
    case ExprOp::Cos:
    case ExprOp::Exp:
    case ExprOp::Sqrt: return std::string(function_name(n.op)) + "(" + print_node(*n.lhs) + ")";
  }
  return "?";
}

Expression Expression::parse(std::string_view source, int dim) {
  if (dim < 0) throw ConfigError("negative dimension");
  return Expression(Parser(source, dim).parse(), dim);
}

Expression Expression::constant(double value, int dim) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Number;
  n->number = value;
  return Expression(std::move(n), dim);
}

std::string Expression::print() const { return root_ ? print_node(*root_) : std::string(); }

template <class S>
S Expression::evaluate(std::span<const S> x) const {
  if (static_cast<int>(x.size()) < dim_) throw DomainError("point has fewer coordinates than the expression dimension");
  return eval_node<S>(*root_, x);
}

template double Expression::evaluate<double>(std::span<const double>) const;
template Dual Expression::evaluate<Dual>(std::span<const Dual>) const;
template Jet Expression::evaluate<Jet>(std::span<const Jet>) const;

bool structurally_equal(const Expression& a, const Expression& b) {
  return a.dim_ == b.dim_ && nodes_equal(a.root_.get(), b.root_.get());
}

Derivatives eval_with_derivatives(const Expression& e, std::span<const double> p, int order) {
  const int n = static_cast<int>(p.size());
  if (n < e.dim()) throw DomainError("point has fewer coordinates than the expression dimension");
  Derivatives out;
  out.gradient = Eigen::VectorXd::Zero(n);
  if (order == 1) {
    if (n > kMaxDualDirections) throw Error("too many variables for first-order dual evaluation");
    std::vector<Dual> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = Dual::variable(p[static_cast<std::size_t>(i)], i, n);
    const Dual r = e.evaluate<Dual>(x);
    out.value = r.value;
    for (int i = 0; i < n; ++i) out.gradient[i] = r.d(i);
    return out;
  }
  if (order != 2) throw Error("eval_with_derivatives supports order 1 or 2");
  const JetSpace& space = JetSpace::get(n, 2);
  std::vector<Jet> x;
  x.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x.push_back(Jet::variable(space, i, p[static_cast<std::size_t>(i)]));
  const Jet r = e.evaluate<Jet>(x);
  out.value = r.value();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> exps(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    out.gradient[i] = r.coeff(1 + static_cast<std::size_t>(i));
    for (int j = i; j < n; ++j) {
      std::fill(exps.begin(), exps.end(), 0);
      ++exps[static_cast<std::size_t>(i)];
      ++exps[static_cast<std::size_t>(j)];
      const double c = r.coeff(space.index_of(exps));
      h(i, j) = h(j, i) = (i == j) ? 2.0 * c : c;
    }
  }
  out.hessian = h;
  return out;
}

}  // namespace slitbundle
