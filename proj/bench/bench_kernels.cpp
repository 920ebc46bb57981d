// Serial reference kernels against their OpenMP counterparts.
// Thread-count arguments above the available cores just oversubscribe.

#include <benchmark/benchmark.h>

#include "lf/forest.hpp"
#include "lf/simgen.hpp"
#include "lf/theory.hpp"

namespace {

lf::Dataset bench_data(lf::Index n, lf::Index p) {
    lf::PolyDgpSpec spec;
    spec.n = n;
    spec.p = p;
    spec.snr = 2.0;
    lf::RngStream rng(42, 0);
    return lf::gen_polynomial(spec, rng);
}

const lf::Dataset& data() {
    static const lf::Dataset d = bench_data(400, 50);
    return d;
}

const lf::Forest& forest() {
    static const lf::Forest f = lf::serial::fit_forest(data(), 100, lf::TreeParams::defaults(50), lf::RngStream(1, 0));
    return f;
}

void BM_FitForestSerial(benchmark::State& state) {
    for (auto _ : state) {
        auto f = lf::serial::fit_forest(data(), 100, lf::TreeParams::defaults(50), lf::RngStream(1, 0));
        benchmark::DoNotOptimize(f.trees.data());
    }
}
BENCHMARK(BM_FitForestSerial)->Unit(benchmark::kMillisecond);

void BM_FitForestParallel(benchmark::State& state) {
    const lf::Exec exec{static_cast<int>(state.range(0))};
    for (auto _ : state) {
        auto f = lf::fit_forest(data(), 100, lf::TreeParams::defaults(50), lf::RngStream(1, 0), exec);
        benchmark::DoNotOptimize(f.trees.data());
    }
}
BENCHMARK(BM_FitForestParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_PredictionMatrixSerial(benchmark::State& state) {
    for (auto _ : state) {
        auto m = lf::serial::prediction_matrix(forest(), data().features, lf::RowOrigin::training);
        benchmark::DoNotOptimize(m.values.data());
    }
}
BENCHMARK(BM_PredictionMatrixSerial)->Unit(benchmark::kMillisecond);

void BM_PredictionMatrixParallel(benchmark::State& state) {
    const lf::Exec exec{static_cast<int>(state.range(0))};
    for (auto _ : state) {
        auto m = lf::prediction_matrix(forest(), data().features, lf::RowOrigin::training, exec);
        benchmark::DoNotOptimize(m.values.data());
    }
}
BENCHMARK(BM_PredictionMatrixParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

// workers = 1 runs the trial loop inline, which is the serial reference.
void BM_OracleMonteCarlo(benchmark::State& state) {
    auto cfg = lf::theory::equal_weight_oracle(20, 200, 1.0);
    cfg.trials = 200;
    const lf::Exec exec{static_cast<int>(state.range(0))};
    for (auto _ : state) {
        auto r = lf::theory::gaussian_oracle_mc(cfg, {0.0, 0.5, 1.0}, lf::RngStream(3, 0), exec);
        benchmark::DoNotOptimize(r.points.data());
    }
}
BENCHMARK(BM_OracleMonteCarlo)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
