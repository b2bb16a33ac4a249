#include "slitbundle/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <utility>

#include "slitbundle/error.hpp"

namespace slitbundle {

namespace {

// All exponent vectors of total degree exactly `degree` in `vars` variables,
// in reverse lexicographic order (x_0^d first).
void enumerate_degree(int vars, int degree, std::vector<int>& current, int var,
                      std::vector<std::vector<int>>& out) {
  if (var == vars - 1) {
    current[static_cast<std::size_t>(var)] = degree;
    out.push_back(current);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    current[static_cast<std::size_t>(var)] = e;
    enumerate_degree(vars, degree - e, current, var + 1, out);
  }
  current[static_cast<std::size_t>(var)] = 0;
}

}  // namespace

JetSpace::JetSpace(int vars, int order) : vars_(vars), order_(order) {
  std::vector<std::vector<int>> monomials;
  prefix_.resize(static_cast<std::size_t>(order) + 1);
  for (int d = 0; d <= order; ++d) {
    std::vector<int> current(static_cast<std::size_t>(vars), 0);
    if (vars == 0) {
      if (d == 0) monomials.push_back(current);
    } else {
      enumerate_degree(vars, d, current, 0, monomials);
    }
    prefix_[static_cast<std::size_t>(d)] = monomials.size();
  }

  std::map<std::vector<int>, std::size_t> lookup;
  exps_.reserve(monomials.size() * static_cast<std::size_t>(vars));
  for (std::size_t i = 0; i < monomials.size(); ++i) {
    lookup.emplace(monomials[i], i);
    exps_.insert(exps_.end(), monomials[i].begin(), monomials[i].end());
    degree_.push_back(std::accumulate(monomials[i].begin(), monomials[i].end(), 0));
  }

  // Products grouped by output degree so that truncation is a prefix.
  std::vector<std::vector<Product>> by_degree(static_cast<std::size_t>(order) + 1);
  std::vector<int> sum(static_cast<std::size_t>(vars));
  for (std::size_t a = 0; a < monomials.size(); ++a) {
    for (std::size_t b = 0; b < monomials.size(); ++b) {
      const int d = degree_[a] + degree_[b];
      if (d > order) continue;
      for (std::size_t v = 0; v < sum.size(); ++v) sum[v] = monomials[a][v] + monomials[b][v];
      by_degree[static_cast<std::size_t>(d)].push_back(
          {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
           static_cast<std::uint32_t>(lookup.at(sum))});
    }
  }
  product_prefix_.resize(static_cast<std::size_t>(order) + 1);
  for (int d = 0; d <= order; ++d) {
    auto& group = by_degree[static_cast<std::size_t>(d)];
    products_.insert(products_.end(), group.begin(), group.end());
    product_prefix_[static_cast<std::size_t>(d)] = products_.size();
  }

  derivs_.resize(static_cast<std::size_t>(vars));
  deriv_prefix_.resize(static_cast<std::size_t>(vars));
  for (int v = 0; v < vars; ++v) {
    auto& terms = derivs_[static_cast<std::size_t>(v)];
    auto& pref = deriv_prefix_[static_cast<std::size_t>(v)];
    pref.assign(static_cast<std::size_t>(order) + 1, 0);
    for (std::size_t i = 0; i < monomials.size(); ++i) {
      const int e = monomials[i][static_cast<std::size_t>(v)];
      if (e == 0) continue;
      std::vector<int> lowered = monomials[i];
      --lowered[static_cast<std::size_t>(v)];
      terms.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(lookup.at(lowered)),
                       static_cast<double>(e)});
    }
    for (int d = 0; d <= order; ++d) {
      pref[static_cast<std::size_t>(d)] = static_cast<std::size_t>(std::count_if(
          terms.begin(), terms.end(), [&](const DerivativeTerm& t) { return degree_[t.from] <= d; }));
    }
  }
}

const JetSpace& JetSpace::get(int vars, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<JetSpace>> registry;
  if (vars < 0 || order < 0) throw Error("jet space requires nonnegative variables and order");
  std::lock_guard lock(mutex);
  auto& slot = registry[{vars, order}];
  if (!slot) slot.reset(new JetSpace(vars, order));
  return *slot;
}

std::size_t JetSpace::index_of(std::span<const int> exponents) const {
  // Rank of the exponent vector among monomials of the same degree, offset by
  // the prefix of lower degrees. A linear scan is fine: only used off the hot path.
  const int d = std::accumulate(exponents.begin(), exponents.end(), 0);
  if (d > order_) throw Error("monomial degree exceeds jet order");
  const std::size_t begin = d == 0 ? 0 : prefix_[static_cast<std::size_t>(d - 1)];
  for (std::size_t i = begin; i < prefix_[static_cast<std::size_t>(d)]; ++i) {
    if (std::equal(exponents.begin(), exponents.end(), this->exponents(i).begin())) return i;
  }
  throw Error("monomial not found in jet space");
}

std::span<const JetSpace::DerivativeTerm> JetSpace::derivative(int var, int order) const {
  const auto& terms = derivs_[static_cast<std::size_t>(var)];
  return {terms.data(), deriv_prefix_[static_cast<std::size_t>(var)][static_cast<std::size_t>(order)]};
}

Jet Jet::variable(const JetSpace& space, int var, double at, int order) {
  if (order > space.order()) throw Error("jet order exceeds its space");
  std::vector<double> c(space.size(order), 0.0);
  c[0] = at;
  if (order >= 1) c[1 + static_cast<std::size_t>(var)] = 1.0;
  return Jet(&space, order, std::move(c));
}

double Jet::max_abs() const {
  double m = 0.0;
  for (double x : c_) m = std::max(m, std::abs(x));
  return m;
}

Jet Jet::derivative(int var) const {
  if (!space_) return Jet(0.0);
  if (order_ == 0) throw Error("cannot differentiate an order-0 jet");
  std::vector<double> out(space_->size(order_ - 1), 0.0);
  for (const auto& t : space_->derivative(var, order_)) out[t.to] += t.factor * c_[t.from];
  return Jet(space_, order_ - 1, std::move(out));
}

Jet Jet::truncated(int order) const {
  if (!space_ || order >= order_) return *this;
  if (order < 0) throw Error("negative truncation order");
  return Jet(space_, order, std::vector<double>(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(space_->size(order))));
}

void Jet::promote(const JetSpace* space, int order) {
  const double c0 = c_[0];
  space_ = space;
  order_ = order;
  c_.assign(space->size(order), 0.0);
  c_[0] = c0;
}

Jet& Jet::operator+=(const Jet& o) {
  if (!o.space_) {
    c_[0] += o.c_[0];
    return *this;
  }
  if (!space_) promote(o.space_, o.order_);
  if (space_ != o.space_) throw Error("jets from different spaces");
  if (o.order_ < order_) *this = truncated(o.order_);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  if (!o.space_) {
    c_[0] -= o.c_[0];
    return *this;
  }
  if (!space_) promote(o.space_, o.order_);
  if (space_ != o.space_) throw Error("jets from different spaces");
  if (o.order_ < order_) *this = truncated(o.order_);
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (double& x : c_) x *= s;
  return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (!b.space_) {
    Jet r = a;
    return r *= b.c_[0];
  }
  if (!a.space_) {
    Jet r = b;
    return r *= a.c_[0];
  }
  if (a.space_ != b.space_) throw Error("jets from different spaces");
  const int order = std::min(a.order_, b.order_);
  std::vector<double> out(a.space_->size(order), 0.0);
  const double* pa = a.c_.data();
  const double* pb = b.c_.data();
  for (const auto& t : a.space_->products(order)) out[t.out] += pa[t.lhs] * pb[t.rhs];
  return Jet(a.space_, order, std::move(out));
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }

Jet operator-(Jet a) { return a *= -1.0; }

Jet Jet::compose(std::span<const double> taylor) const {
  if (!space_) return Jet(taylor[0]);
  Jet tail = *this;
  tail.c_[0] = 0.0;
  const int r = std::min<int>(order_, static_cast<int>(taylor.size()) - 1);
  Jet result(taylor[static_cast<std::size_t>(r)]);
  for (int m = r - 1; m >= 0; --m) {
    result = result * tail;
    result.c_[0] += taylor[static_cast<std::size_t>(m)];
  }
  if (result.is_constant()) result.promote(space_, order_);
  return result;
}

namespace {

int taylor_length(const Jet& a) { return a.is_constant() ? 1 : a.order() + 1; }

}  // namespace

Jet reciprocal(const Jet& a) {
  const double x = a.value();
  if (x == 0.0) throw DomainError("reciprocal of a jet with zero value");
  std::vector<double> t(static_cast<std::size_t>(taylor_length(a)));
  double p = 1.0 / x;
  for (std::size_t m = 0; m < t.size(); ++m) {
    t[m] = (m % 2 == 0) ? p : -p;
    p /= x;
  }
  return a.compose(t);
}

Jet operator/(const Jet& a, const Jet& b) {
  if (b.is_constant()) {
    Jet r = a;
    return r *= 1.0 / b.value();
  }
  return a * reciprocal(b);
}

Jet sin(const Jet& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  std::vector<double> t(static_cast<std::size_t>(taylor_length(a)));
  double fact = 1.0;
  for (std::size_t m = 0; m < t.size(); ++m) {
    if (m > 0) fact *= static_cast<double>(m);
    const double d = (m % 4 == 0) ? s : (m % 4 == 1) ? c : (m % 4 == 2) ? -s : -c;
    t[m] = d / fact;
  }
  return a.compose(t);
}

Jet cos(const Jet& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  std::vector<double> t(static_cast<std::size_t>(taylor_length(a)));
  double fact = 1.0;
  for (std::size_t m = 0; m < t.size(); ++m) {
    if (m > 0) fact *= static_cast<double>(m);
    const double d = (m % 4 == 0) ? c : (m % 4 == 1) ? -s : (m % 4 == 2) ? -c : s;
    t[m] = d / fact;
  }
  return a.compose(t);
}

Jet exp(const Jet& a) {
  const double e = std::exp(a.value());
  std::vector<double> t(static_cast<std::size_t>(taylor_length(a)));
  double fact = 1.0;
  for (std::size_t m = 0; m < t.size(); ++m) {
    if (m > 0) fact *= static_cast<double>(m);
    t[m] = e / fact;
  }
  return a.compose(t);
}

Jet sqrt(const Jet& a) {
  const double x = a.value();
  if (x < 0.0 || (x == 0.0 && carries_derivatives(a))) {
    throw DomainError("sqrt of a jet with nonpositive value");
  }
  std::vector<double> t(static_cast<std::size_t>(taylor_length(a)));
  // binom(1/2, m) * x^(1/2 - m)
  double binom = 1.0;
  double p = std::sqrt(x);
  for (std::size_t m = 0; m < t.size(); ++m) {
    if (m > 0) {
      binom *= (0.5 - static_cast<double>(m - 1)) / static_cast<double>(m);
      p /= x;
    }
    t[m] = binom * p;
  }
  return a.compose(t);
}

}  // namespace slitbundle
