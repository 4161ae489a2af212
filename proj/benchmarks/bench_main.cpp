#include <benchmark/benchmark.h>

#include <cmath>

#include "keplerdrag/manifolds.hpp"
#include "keplerdrag/series.hpp"

using namespace kepler;

namespace {

ChartPoint c1pt(double r1, double v, double l) {
    ChartPoint p;
    p.chart = ChartId::C1;
    p.c = {r1, v, l};
    return p;
}

void BM_VectorField(benchmark::State& state) {
    const ChartId id = static_cast<ChartId>(state.range(0));
    const Params p{1.0};
    std::array<double, 3> c{0.8, 0.3, 0.4};
    if (id == ChartId::C1) c = {1.2, -0.1, 0.5};
    for (auto _ : state) {
        auto fo = vector_field(id, c, p);
        benchmark::DoNotOptimize(fo);
    }
}
BENCHMARK(BM_VectorField)
    ->Arg(int(ChartId::PHYS))
    ->Arg(int(ChartId::C1))
    ->Arg(int(ChartId::C2))
    ->Arg(int(ChartId::C21))
    ->Arg(int(ChartId::C21INF));

void BM_IntegrateOrbitLap(benchmark::State& state) {
    const Params p{1.0};
    const double h = 0.125;
    const double r1m = 1.0 / (1.0 + std::sqrt(2.0 * h));
    IntegratorControls ctl;
    ctl.chart_switching = false;
    ctl.sample_stride = 1 << 30;
    const double period = 2.0 * M_PI * std::pow(1.0 - 2.0 * h, -1.5);
    for (auto _ : state) {
        auto tr = integrate(c1pt(r1m, 0.0, 0.0), p, ctl, {}, period);
        benchmark::DoNotOptimize(tr.n_accepted);
    }
}
BENCHMARK(BM_IntegrateOrbitLap)->Unit(benchmark::kMicrosecond);

void BM_SeriesExactN40(benchmark::State& state) {
    const Params p{1.0};
    for (auto _ : state) {
        auto sc = compute_coefficients(p, 40);
        benchmark::DoNotOptimize(sc.Y.back());
    }
}
BENCHMARK(BM_SeriesExactN40)->Unit(benchmark::kMillisecond);

void BM_SummationEval(benchmark::State& state) {
    auto sc = compute_coefficients(Params{1.0}, 40);
    for (auto _ : state) {
        auto mp = evaluate_manifold(sc, 0.3, SummationMode::BorelPadeLaplace);
        benchmark::DoNotOptimize(mp.v);
    }
}
BENCHMARK(BM_SummationEval)->Unit(benchmark::kMicrosecond);

void BM_ForwardHLimit(benchmark::State& state) {
    const Params p{1.0};
    for (auto _ : state) {
        auto est = h_infinity(c1pt(1.1, 0.05, 0.15), p, 0.06, 2.0);
        benchmark::DoNotOptimize(est.value);
    }
}
BENCHMARK(BM_ForwardHLimit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
