#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "sublab/forms.hpp"
#include "sublab/metric.hpp"
#include "sublab/solver.hpp"

namespace {

sublab::GridSpec square(std::size_t n) { return {-1.0, 1.0, -1.0, 1.0, n, n}; }

void BM_FastMarchingGrushin(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto grid = square(n);
  const auto form = sublab::assemble_form(sublab::DegeneracyProfile::power(1.0), grid);
  const auto source = grid.nearest_node(0.0, 0.0);
  for (auto _ : state) {
    auto field = sublab::solve_distance(form, source, 1e-3);
    benchmark::DoNotOptimize(field.values.data());
  }
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n * n));
}
BENCHMARK(BM_FastMarchingGrushin)->Arg(129)->Arg(257)->Arg(513)
    ->Unit(benchmark::kMillisecond)->Complexity(benchmark::oNLogN);

void BM_ConjugateGradientGrushin(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto grid = square(n);
  const auto form = sublab::assemble_form(sublab::DegeneracyProfile::power(1.0), grid);
  std::vector<double> rhs(grid.size(), 0.0);
  std::vector<double> boundary(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    boundary[k] = std::sin(3.0 * grid.node_x(k)) + grid.node_y(k);
  }
  const auto system = sublab::assemble_linear(form, rhs, boundary);
  int iterations = 0;
  for (auto _ : state) {
    std::vector<double> x(grid.size(), 0.0);
    iterations = sublab::solve_linear(system, x, {1e-10, 100000}).iterations;
    benchmark::DoNotOptimize(x.data());
  }
  state.counters["cg_iterations"] = iterations;
}
BENCHMARK(BM_ConjugateGradientGrushin)->Arg(65)->Arg(129)->Arg(257)
    ->Unit(benchmark::kMillisecond);

void BM_PaperModelConstruction(benchmark::State& state) {
  for (auto _ : state) {
    auto p = sublab::DegeneracyProfile::paper_model(9.0, 0.9);
    benchmark::DoNotOptimize(p.cache().data());
  }
}
BENCHMARK(BM_PaperModelConstruction)->Unit(benchmark::kMillisecond);

void BM_PaperModelEvaluation(benchmark::State& state) {
  const auto p = sublab::DegeneracyProfile::paper_model(9.0, 0.9);
  double x = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.log_value(x));
    x = x < 0.8 ? x * 1.01 : 1e-3;
  }
}
BENCHMARK(BM_PaperModelEvaluation);

void BM_DeepLogEvaluation(benchmark::State& state) {
  const auto p = sublab::DegeneracyProfile::paper_model(9.0, 0.9);
  double s = -800.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.log_value_from_log(s));
    s = s > -5000.0 ? s - 37.0 : -800.0;
  }
}
BENCHMARK(BM_DeepLogEvaluation);

}  // namespace
BENCHMARK_MAIN();
