// Serial reference loops against their OpenMP counterparts on the hot kernels.
#include <benchmark/benchmark.h>

#include <numbers>

#include "parest/assembly.hpp"
#include "parest/equilibration.hpp"
#include "parest/verification.hpp"

using namespace parest;

namespace {

Execution mode(const benchmark::State& state) { return state.range(1) ? Execution::parallel : Execution::serial; }

std::shared_ptr<ScalarSpace> square(int cells, int degree) {
  ManufacturedSpec s;
  s.kind = ManufacturedKind::fourier_2d;
  return std::make_shared<ScalarSpace>(manufactured(s).mesh(cells), degree);
}

void BM_ElementMatrices(benchmark::State& state) {
  const auto space = square(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(element_matrices(*space, OperatorKind::stiffness, mode(state)));
}

void BM_AssembleStiffness(benchmark::State& state) {
  const auto space = square(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_full(*space, OperatorKind::stiffness, mode(state)));
}

void BM_ImplicitEuler(benchmark::State& state) {
  ManufacturedSpec s;
  s.kind = ManufacturedKind::fourier_2d;
  s.decay = 2 * std::numbers::pi * std::numbers::pi;
  const auto prob = manufactured(s);
  const auto space = square(static_cast<int>(state.range(0)), 1);
  auto partition = std::make_shared<TimePartition>(TimePartition::uniform(1.0, 16));
  const auto data = time_mean_rhs(*prob.source(), *partition, *space);
  const Vector u0 = initial_datum(*space, prob.initial());
  for (auto _ : state) benchmark::DoNotOptimize(implicit_euler_run(space, partition, data, u0, mode(state)));
}

void BM_EquilibratedFlux(benchmark::State& state) {
  ManufacturedSpec s;
  s.kind = ManufacturedKind::fourier_2d;
  s.decay = 2 * std::numbers::pi * std::numbers::pi;
  const auto prob = manufactured(s);
  const auto space = square(static_cast<int>(state.range(0)), 1);
  auto partition = std::make_shared<TimePartition>(TimePartition::uniform(1.0, 4));
  const auto sol = implicit_euler_run(space, partition, time_mean_rhs(*prob.source(), *partition, *space),
                                      initial_datum(*space, prob.initial()));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_flux(sol, 2, mode(state)));
}

}  // namespace

BENCHMARK(BM_ElementMatrices)->ArgsProduct({{32, 64}, {0, 1}})->ArgNames({"cells", "parallel"});
BENCHMARK(BM_AssembleStiffness)->ArgsProduct({{32, 64}, {0, 1}})->ArgNames({"cells", "parallel"});
BENCHMARK(BM_ImplicitEuler)->ArgsProduct({{32, 64}, {0, 1}})->ArgNames({"cells", "parallel"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EquilibratedFlux)->ArgsProduct({{8, 16}, {0, 1}})->ArgNames({"cells", "parallel"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
