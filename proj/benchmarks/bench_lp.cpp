#include <random>

#include <benchmark/benchmark.h>

#include "fcil/lp.hpp"

namespace {

// An FSW-shaped objective: n weights, k absolute-value terms, one linear term.
fcil::AbsObjective make_objective(int n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  fcil::AbsObjective obj;
  obj.n = n;
  for (int i = 0; i < k; ++i) {
    fcil::AbsTerm t;
    t.a = normal(rng);
    t.b = Eigen::VectorXd::NullaryExpr(n, [&] { return normal(rng) / n; });
    t.weight = 1.0 / k;
    obj.abs_terms.push_back(std::move(t));
  }
  fcil::LinTerm lin;
  lin.c = 1.0;
  lin.d = Eigen::VectorXd::NullaryExpr(n, [&] { return normal(rng) / n; });
  lin.weight = 0.5;
  obj.lin_terms.push_back(std::move(lin));
  return obj;
}

void BM_SolveAbsLp(benchmark::State& state) {
  const auto obj = make_objective(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 7);
  const auto lp = fcil::build_abs_lp(obj);
  for (auto _ : state) {
    auto sol = fcil::solve_lp(lp);
    benchmark::DoNotOptimize(sol.objective);
  }
  state.counters["vars"] = static_cast<double>(lp.num_vars());
}
BENCHMARK(BM_SolveAbsLp)
    ->Args({100, 3})
    ->Args({1000, 3})
    ->Args({1000, 10})
    ->Args({5000, 20})
    ->Unit(benchmark::kMillisecond);

void BM_BuildAbsLp(benchmark::State& state) {
  const auto obj = make_objective(static_cast<int>(state.range(0)), 10, 11);
  for (auto _ : state) {
    auto lp = fcil::build_abs_lp(obj);
    benchmark::DoNotOptimize(lp.cost.data());
  }
}
BENCHMARK(BM_BuildAbsLp)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

}  // namespace
