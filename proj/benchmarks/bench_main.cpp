#include <cmath>
#include <numbers>

#include <benchmark/benchmark.h>

#include "ladderlab/counting.hpp"
#include "ladderlab/dynamics.hpp"
#include "ladderlab/ladder.hpp"
#include "ladderlab/liouville.hpp"
#include "ladderlab/spectra.hpp"

using namespace ladderlab;

namespace {

const double L = 2.0 * std::numbers::pi;

StandardStationaryMetric product_t2() { return {3, FlatTorus{{L, L}, {32, 32}}, ConstantField{1.0}}; }

StandardStationaryMetric cosine_t2() { return {3, FlatTorus{{L, L}, {64, 64}}, CosineField{1.0, 0.2, 0, 1.0}}; }

void BM_ProductSlice(benchmark::State& state)
{
    SliceBuilder builder(product_t2());
    const double m = double(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(builder.build_window(m, std::sqrt(2.0), 0.5));
}
BENCHMARK(BM_ProductSlice)->Arg(50)->Arg(200)->Arg(800);

void BM_CountSharp(benchmark::State& state)
{
    SliceBuilder builder(product_t2());
    const auto slice = builder.build_window(200, std::sqrt(2.0), 5.0);
    for (auto _ : state) benchmark::DoNotOptimize(count_sharp(slice, std::sqrt(2.0), 0.5));
}
BENCHMARK(BM_CountSharp);

void BM_PencilSlice(benchmark::State& state)
{
    const StandardStationaryMetric g(3, FlatTorus{{L, L}, {32, 32}}, CosineField{1.0, 0.1, 0, 1.0},
                                     {ConstantField{0.3}, ConstantField{0.0}});
    PencilOptions o;
    o.basis_cutoff = double(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(pencil_joint_spectrum(g, 5.0, o));
}
BENCHMARK(BM_PencilSlice)->Arg(4)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_VolumeQuadrature(benchmark::State& state)
{
    const auto g = cosine_t2();
    for (auto _ : state) benchmark::DoNotOptimize(volume_quadrature(g, std::sqrt(2.0)));
}
BENCHMARK(BM_VolumeQuadrature)->Unit(benchmark::kMillisecond);

void BM_VolumeMonteCarlo(benchmark::State& state)
{
    const auto g = cosine_t2();
    MonteCarloOptions o;
    o.samples = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(volume_montecarlo(g, std::sqrt(2.0), o));
}
BENCHMARK(BM_VolumeMonteCarlo)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_Flow(benchmark::State& state)
{
    const auto g = cosine_t2();
    Vec x(2), dir(2);
    x << 0.3, 1.1;
    dir << 0.6, 0.8;
    const PhaseState s = state_on_level(g, x, dir, 1.5);
    FlowOptions o;
    for (auto _ : state) benchmark::DoNotOptimize(flow_to(g, s, 100.0, o));
}
BENCHMARK(BM_Flow)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
