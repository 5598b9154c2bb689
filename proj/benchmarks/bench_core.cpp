#include <benchmark/benchmark.h>

#include <cmath>

#include "bpl/flow.hpp"
#include "bpl/prox.hpp"
#include "bpl/stationary.hpp"
#include "bpl/transport.hpp"

using namespace bpl;

namespace {

DensityField bump(int n, double eps) {
  return density_from_function(TorusGrid(1, n), [=](double x) { return 1.0 + eps * std::cos(2.0 * M_PI * x); });
}

void BM_W2Torus(benchmark::State& st) {
  const int n = int(st.range(0));
  const auto a = bump(n, 0.5);
  const auto b = density_from_function(TorusGrid(1, n), [](double x) { return 1.0 + 0.3 * std::sin(6.0 * M_PI * x); });
  for (auto _ : st) benchmark::DoNotOptimize(w2_1d(a, b, TransportMode::Torus).distance);
  st.SetComplexityN(n);
}
BENCHMARK(BM_W2Torus)->RangeMultiplier(2)->Range(64, 1024)->Complexity()->Unit(benchmark::kMicrosecond);

void BM_Prox(benchmark::State& st) {
  const auto rho = bump(int(st.range(0)), 0.5);
  const double tau = st.range(1) * 1e-3;
  for (auto _ : st) benchmark::DoNotOptimize(prox(rho, tau).envelope);
}
BENCHMARK(BM_Prox)->Args({128, 100})->Args({256, 100})->Args({128, 1})->Unit(benchmark::kMillisecond);

void BM_MinimizeE(benchmark::State& st) {
  const TorusGrid g(1, int(st.range(0)));
  const auto pack = KineticsPack::exponential(1);
  const auto V = Potential::cosine(0.5);
  for (auto _ : st) benchmark::DoNotOptimize(minimize_E(V, pack, g).eta_s);
}
BENCHMARK(BM_MinimizeE)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FixedPoint(benchmark::State& st) {
  const TorusGrid g(1, int(st.range(0)));
  const auto pack = KineticsPack::exponential(1);
  const auto V = Potential::cosine(0.5);
  for (auto _ : st) benchmark::DoNotOptimize(fixed_point_solve(V, pack, g).eta_s);
}
BENCHMARK(BM_FixedPoint)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FlowStep(benchmark::State& st) {
  FlowConfig c;
  c.n_x = c.n_v = int(st.range(0));
  c.initial.amplitude = 0.5;
  auto mu = initial_state(c);
  const auto V = Potential::cosine(0.5);
  for (auto _ : st) {
    mu = step(mu, c.dt, c.tau, V);
    benchmark::DoNotOptimize(mu.values().data());
  }
}
BENCHMARK(BM_FlowStep)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DiscreteTransport(benchmark::State& st) {
  const int n = int(st.range(0));
  WeightedPoints a, b;
  for (int i = 0; i < n; ++i) {
    a.points.push_back({std::fmod(0.37 * i, 1.0)});
    a.weights.push_back(1.0 / n);
    b.points.push_back({std::fmod(0.61 * i + 0.1, 1.0)});
    b.weights.push_back(1.0 / n);
  }
  for (auto _ : st) benchmark::DoNotOptimize(w2_discrete(a, b).distance);
}
BENCHMARK(BM_DiscreteTransport)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
