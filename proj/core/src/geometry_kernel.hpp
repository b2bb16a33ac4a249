#pragma once

// Connection formulas written once over the scalar type. Instantiated with
// double (values at a point) and Jet (Taylor expansions, for brackets and
// curvature).

#include <cmath>
#include <span>
#include <vector>

#include "slitbundle/error.hpp"
#include "slitbundle/scalar.hpp"
#include "slitbundle/system.hpp"

namespace slitbundle::detail {

template <class S>
struct Dense {
  int rows = 0, cols = 0;
  std::vector<S> a;

  Dense() = default;
  Dense(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r * c), S(0.0)) {}
  S& operator()(int i, int j) { return a[static_cast<std::size_t>(i * cols + j)]; }
  const S& operator()(int i, int j) const { return a[static_cast<std::size_t>(i * cols + j)]; }
};

/// Solves A X = B by Gauss-Jordan with partial pivoting on the value part.
template <class S>
Dense<S> solve(Dense<S> A, Dense<S> B) {
  const int n = A.rows;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::abs(value_of(A(col, col)));
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(value_of(A(r, col)));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (!(best > 0.0)) throw RankDeficiency("singular Gram matrix");
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(A(piv, c), A(col, c));
      for (int c = 0; c < B.cols; ++c) std::swap(B(piv, c), B(col, c));
    }
    const S inv = reciprocal(A(col, col));
    for (int c = 0; c < n; ++c) A(col, c) = A(col, c) * inv;
    for (int c = 0; c < B.cols; ++c) B(col, c) = B(col, c) * inv;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const S f = A(r, col);
      if (value_of(f) == 0.0 && !carries_derivatives(f)) continue;
      for (int c = 0; c < n; ++c) A(r, c) = A(r, c) - f * A(col, c);
      for (int c = 0; c < B.cols; ++c) B(r, c) = B(r, c) - f * B(col, c);
    }
  }
  return B;
}

/// Frame, metric and their first partial derivatives at a point.
template <class S>
struct FrameData {
  int n = 0, k = 0;
  bool euclidean = true;
  Dense<S> E;                 // n x k
  std::vector<Dense<S>> dE;   // dE[j] = d/dq_j E
  Dense<S> g;                 // n x n
  std::vector<Dense<S>> dg;   // dg[j] = d/dq_j g
};

/// Gamma[l](i, j) = 1/2 g^{lm} (d_i g_{mj} + d_j g_{mi} - d_m g_{ij}). Empty when Euclidean.
template <class S>
std::vector<Dense<S>> christoffel(const FrameData<S>& f) {
  std::vector<Dense<S>> gamma;
  if (f.euclidean) return gamma;
  const int n = f.n;
  // Lowered symbols Gamma_{m,ij}.
  Dense<S> lowered(n, n * n);
  for (int m = 0; m < n; ++m) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        lowered(m, i * n + j) = S(0.5) * (f.dg[static_cast<std::size_t>(i)](m, j) +
                                          f.dg[static_cast<std::size_t>(j)](m, i) -
                                          f.dg[static_cast<std::size_t>(m)](i, j));
      }
    }
  }
  const Dense<S> raised = solve(f.g, lowered);
  gamma.assign(static_cast<std::size_t>(n), Dense<S>(n, n));
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) gamma[static_cast<std::size_t>(l)](i, j) = raised(l, i * n + j);
    }
  }
  return gamma;
}

/// L = (E^T g E)^{-1} E^T g, the k x n map sending an ambient vector to the
/// frame coordinates of its g-orthogonal projection onto D.
template <class S>
Dense<S> left_inverse(const FrameData<S>& f) {
  const int n = f.n, k = f.k;
  Dense<S> etg(k, n);
  for (int i = 0; i < k; ++i) {
    for (int c = 0; c < n; ++c) {
      if (f.euclidean) {
        etg(i, c) = f.E(c, i);
      } else {
        S acc(0.0);
        for (int r = 0; r < n; ++r) acc = acc + f.E(r, i) * f.g(r, c);
        etg(i, c) = acc;
      }
    }
  }
  Dense<S> gram(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      S acc(0.0);
      for (int c = 0; c < n; ++c) acc = acc + etg(i, c) * f.E(c, j);
      gram(i, j) = acc;
    }
  }
  return solve(gram, etg);
}

/// Projected coefficients A[j](m, i) with grad^D_{d_j} E_i = sum_m A[j](m, i) E_m.
template <class S>
std::vector<Dense<S>> projected(const FrameData<S>& f, const std::vector<Dense<S>>& gamma, const Dense<S>& L) {
  const int n = f.n, k = f.k;
  std::vector<Dense<S>> out(static_cast<std::size_t>(n), Dense<S>(k, k));
  std::vector<S> cov(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < k; ++i) {
      // (grad_{d_j} E_i)^l = d_j E_i^l + Gamma^l_{js} E_i^s
      for (int l = 0; l < n; ++l) {
        S acc = f.dE[static_cast<std::size_t>(j)](l, i);
        if (!gamma.empty()) {
          for (int s = 0; s < n; ++s) acc = acc + gamma[static_cast<std::size_t>(l)](j, s) * f.E(s, i);
        }
        cov[static_cast<std::size_t>(l)] = std::move(acc);
      }
      for (int m = 0; m < k; ++m) {
        S acc(0.0);
        for (int l = 0; l < n; ++l) acc = acc + L(m, l) * cov[static_cast<std::size_t>(l)];
        out[static_cast<std::size_t>(j)](m, i) = std::move(acc);
      }
    }
  }
  return out;
}

/// Contraction sum_{j,i} A[j](m, i) w_j a_i.
template <class S>
std::vector<S> contract(const std::vector<Dense<S>>& coeffs, std::span<const S> w, std::span<const S> a) {
  const int k = coeffs.empty() ? 0 : coeffs[0].rows;
  std::vector<S> out(static_cast<std::size_t>(k), S(0.0));
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    for (int m = 0; m < k; ++m) {
      S acc(0.0);
      for (int i = 0; i < k; ++i) acc = acc + coeffs[j](m, i) * a[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(m)] = out[static_cast<std::size_t>(m)] + w[j] * acc;
    }
  }
  return out;
}

/// Frame data as jets: frame and metric expanded to `order + 1` in `space`
/// (whose first n variables are the chart coordinates, and whose order is at
/// least `order + 1`) so that the
/// derivatives, and everything built from them, have order `order`.
FrameData<Jet> frame_jets(const System& sys, const Point& q, const JetSpace& space, int order);

/// Frame data at a point with exact first derivatives (dual numbers).
FrameData<double> frame_values(const System& sys, const Point& q);

/// GammaD(w, a) into out (size k). Euclidean metrics take a heap-free path
/// that needs only the directional derivative of the frame along w.
void connection_term_into(const System& sys, std::span<const double> q, std::span<const double> w,
                          std::span<const double> a, std::span<double> out);

}  // namespace slitbundle::detail
