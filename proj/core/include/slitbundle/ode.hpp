#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace slitbundle {

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  std::size_t max_steps = 1'000'000;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 selects automatically
};

using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// Returns false when (t, y) lies outside the admissible region. Steps ending
/// outside are rejected and retried with a smaller step; if the step cannot be
/// shrunk further the integration stops with DomainExit at the last accepted time.
using OdeGuard = std::function<bool(double t, std::span<const double> y)>;

/// Called after every accepted step; throwing aborts the integration.
using OdeMonitor = std::function<void(double t, std::span<const double> y)>;

/// Accepted steps of an integration, including the initial state.
class OdeSolution {
 public:
  OdeSolution() = default;
  explicit OdeSolution(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return times_.size(); }
  double time(std::size_t i) const { return times_[i]; }
  std::span<const double> state(std::size_t i) const { return {states_.data() + i * dim_, dim_}; }
  std::span<const double> derivative(std::size_t i) const { return {derivs_.data() + i * dim_, dim_}; }
  std::span<const double> back() const { return state(size() - 1); }
  const std::vector<double>& times() const noexcept { return times_; }

  void push(double t, std::span<const double> y, std::span<const double> dydt) {
    times_.push_back(t);
    states_.insert(states_.end(), y.begin(), y.end());
    derivs_.insert(derivs_.end(), dydt.begin(), dydt.end());
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> states_;
  std::vector<double> derivs_;
};

/// Embedded Dormand-Prince 5(4) with local error control and FSAL. Integrates
/// from t0 to t1 (t1 < t0 is allowed). Stores every accepted step together with
/// the right-hand side there, so the derivative at each sample is exact.
OdeSolution integrate_dopri5(const OdeRhs& rhs, double t0, std::span<const double> y0, double t1,
                             const OdeOptions& options = {}, const OdeGuard& guard = nullptr,
                             const OdeMonitor& monitor = nullptr);

}  // namespace slitbundle
