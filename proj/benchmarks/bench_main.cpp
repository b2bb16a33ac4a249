#include <benchmark/benchmark.h>

#include "slitbundle/connection.hpp"
#include "slitbundle/distribution.hpp"
#include "slitbundle/expr.hpp"
#include "slitbundle/planner.hpp"
#include "slitbundle/second_order.hpp"
#include "slitbundle/systems.hpp"

namespace {

using namespace slitbundle;

Vec v2(double a, double b) { return Vec(Eigen::Vector2d(a, b)); }

void BM_ExpressionGradient(benchmark::State& state) {
  const Expression e = Expression::parse("exp(x1*x2) + sin(x3)/(2 + cos(x1)) + x2^3", 3);
  const std::vector<double> x{0.3, -0.7, 1.1};
  for (auto _ : state) benchmark::DoNotOptimize(eval_with_derivatives(e, x, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_ExpressionGradient)->Arg(1)->Arg(2);

void BM_ConnectionTerm(benchmark::State& state) {
  const System sys = builtin(state.range(0) == 0 ? "heisenberg" : "martinet");
  const Point q{0.3, -0.2, 0.5};
  const Vec w = sys.ambient(q, v2(0.4, 1.0)), a = v2(1.0, -0.5);
  for (auto _ : state) benchmark::DoNotOptimize(connection_term(sys, q, w, a));
}
BENCHMARK(BM_ConnectionTerm)->Arg(0)->Arg(1);

void BM_GrowthVector(benchmark::State& state) {
  const System sys = builtin("martinet");
  const Point p{0.2, 0.0, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(growth_vector(sys, p, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GrowthVector)->Arg(2)->Arg(4)->Arg(6);

void BM_ReachabilityRank(benchmark::State& state) {
  const System sys = builtin("heisenberg");
  const BundleState s{Point{0.1, 0.2, 0.3}, v2(0.7, -0.4)};
  for (auto _ : state) benchmark::DoNotOptimize(reachability_rank(sys, s, 4));
}
BENCHMARK(BM_ReachabilityRank);

void BM_IntegrateArc(benchmark::State& state) {
  const System sys = builtin("unicycle");
  const BundleState s{Point{0, 0, 0}, v2(1, 0.5)};
  for (auto _ : state) benchmark::DoNotOptimize(integrate_arc(sys, s, SecondOrderControl{v2(0.3, -0.2)}, 1.0));
}
BENCHMARK(BM_IntegrateArc);

void BM_PlanHeisenberg(benchmark::State& state) {
  const System sys = builtin("heisenberg");
  PlanRequest req;
  req.p = Point{0, 0, 0};
  req.q = Point{0, 0, 1};
  req.v_p = sys.ambient(req.p, v2(1, 0));
  req.v_q = sys.ambient(req.q, v2(0, 1));
  req.options.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(plan(sys, req));
}
BENCHMARK(BM_PlanHeisenberg)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
