#include <benchmark/benchmark.h>

#include "marginlab/linalg.hpp"
#include "marginlab/linear_margin.hpp"
#include "marginlab/opt_chain.hpp"
#include "marginlab/xor_net.hpp"

using namespace marginlab;

static void BM_SampleXor(benchmark::State& state) {
  const XorSpec spec = XorSpec::from_kappa(static_cast<int>(state.range(0)), 64, 2.0, 1.5, 64);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_xor(spec, seed++));
}
BENCHMARK(BM_SampleXor)->Arg(1024)->Arg(4096);

static void BM_GramDeviation(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dataset ds = sample_linear(LinearSpec::canonical(4096, n, 0.1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(gram_deviation(ds.noise, 0.1, 4095));
}
BENCHMARK(BM_GramDeviation)->Arg(64)->Arg(256);

static void BM_MinNormSolver(benchmark::State& state) {
  const Dataset ds = sample_linear(LinearSpec::canonical(2048, 64, 0.1), 2);
  const Eigen::VectorXd c = ds.y;
  for (auto _ : state) {
    MinNormSolver s(ds.noise);
    benchmark::DoNotOptimize(s.solve(c));
  }
}
BENCHMARK(BM_MinNormSolver);

static void BM_SolveMaxMargin(benchmark::State& state) {
  const LinearSpec spec = LinearSpec::from_kappa(static_cast<int>(state.range(0)), 32, 1.0);
  const Dataset ds = sample_linear(spec, 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_max_margin(ds));
}
BENCHMARK(BM_SolveMaxMargin)->Arg(1024)->Arg(8192)->Unit(benchmark::kMillisecond);

static void BM_SoftMinGradient(benchmark::State& state) {
  const XorSpec spec = XorSpec::from_kappa(2048, 64, 2.0, 1.5, static_cast<int>(state.range(0)));
  const Dataset ds = sample_xor(spec, 4);
  const TwoLayerNet net = construct_signal_net(spec);
  Eigen::MatrixXd g;
  for (auto _ : state) benchmark::DoNotOptimize(soft_min_margin(net, ds, 0.05, &g));
}
BENCHMARK(BM_SoftMinGradient)->Arg(64)->Arg(256);

static void BM_ConstructNetwork(benchmark::State& state) {
  const XorSpec spec = XorSpec::from_kappa(2048, 64, 2.0, 1.5, static_cast<int>(state.range(0)));
  const Dataset ds = sample_xor(spec, 5);
  for (auto _ : state) benchmark::DoNotOptimize(construct_network(ds, spec, ConstructMode::optimal()));
}
BENCHMARK(BM_ConstructNetwork)->Arg(64)->Arg(256);

static void BM_KappaGen(benchmark::State& state) {
  double h = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kappa_gen_xor(h));
    h = h >= 1.9 ? 1.0 : h + 0.01;
  }
}
BENCHMARK(BM_KappaGen);

static void BM_XorTestError(benchmark::State& state) {
  const XorSpec spec = XorSpec::from_kappa(2048, 64, 2.0, 1.5, 64);
  const TwoLayerNet net = construct_signal_net(spec);
  for (auto _ : state) benchmark::DoNotOptimize(xor_test_error(net, spec, 2000, 6));
}
BENCHMARK(BM_XorTestError)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
