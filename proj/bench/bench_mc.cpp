#include <benchmark/benchmark.h>

#include "slq/monte_carlo.hpp"

namespace {

using namespace slq;

ProblemData bench_problem(Eigen::Index n) {
  ProblemSpec s;
  s.grid = TimeGrid(0.0, 1.0, 500);
  s.n = n;
  s.m = 1;
  Matrix A = -0.5 * Matrix::Identity(n, n);
  A(0, n - 1) += 0.3;
  s.A = MatrixPath::constant(A);
  s.B = MatrixPath::constant(Matrix::Ones(n, 1));
  s.C = MatrixPath::constant(0.4 * Matrix::Identity(n, n));
  s.D = MatrixPath::constant(Matrix::Constant(n, 1, 0.2));
  s.G = Matrix::Identity(n, n);
  s.Q = MatrixPath::constant(Matrix::Identity(n, n), true);
  s.R = MatrixPath::constant(Matrix::Identity(1, 1), true);
  s.fill_defaults();
  return ProblemData(std::move(s));
}

SimulationConfig config(const benchmark::State& state) {
  SimulationConfig cfg;
  cfg.n_paths = static_cast<std::size_t>(state.range(1));
  cfg.seed = 3;
  cfg.execution = state.range(0) == 0 ? Execution::serial : Execution::parallel;
  return cfg;
}

void BM_simulate_cost(benchmark::State& state) {
  const ProblemData p = bench_problem(2);
  const Control c = Control::of(FeedbackLaw::state_feedback(
      MatrixPath::constant(Matrix::Constant(1, 2, -0.5))));
  const SimulationConfig cfg = config(state);
  const Vector x = Vector::Ones(2);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_cost(p, c, 0.0, x, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_convexity_probe(benchmark::State& state) {
  const ProblemData p = bench_problem(2);
  const SimulationConfig cfg = config(state);
  for (auto _ : state) benchmark::DoNotOptimize(convexity_probe(p, 20, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_simulate_cost)->ArgsProduct({{0, 1}, {2000, 20000}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_convexity_probe)->ArgsProduct({{0, 1}, {2000, 20000}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
