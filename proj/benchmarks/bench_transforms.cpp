#include <benchmark/benchmark.h>

#include "rflego/baselines.hpp"
#include "rflego/numerics.hpp"
#include "rflego/random.hpp"
#include "rflego/synth.hpp"

using namespace rflego;

namespace {

CVector noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    CVector x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    return x;
}

RVector real_noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    RVector x(n);
    for (auto& v : x) v = std::abs(g(rng));
    return x;
}

}  // namespace

static void BM_Dft(benchmark::State& state) {
    const CVector x = noise(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(baselines::dft(x));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dft)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

static void BM_Bluestein(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const CVector x = noise(n, 2);
    const auto chirps = baselines::make_chirps(n);
    for (auto _ : state) benchmark::DoNotOptimize(baselines::bluestein_ft(x, chirps));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Bluestein)->RangeMultiplier(2)->Range(64, 1024)->Complexity();
BENCHMARK(BM_Bluestein)->Arg(255)->Arg(511);

static void BM_FftRadix2(benchmark::State& state) {
    CVector x = noise(static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state) {
        numerics::fft_radix2(x, false);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_FftRadix2)->RangeMultiplier(4)->Range(64, 4096);

static void BM_CorrelateDirect(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const CVector x = noise(n, 4), k = noise(n, 5);
    for (auto _ : state) benchmark::DoNotOptimize(numerics::correlate(x, k, numerics::CorrelationMode::Circular));
}
BENCHMARK(BM_CorrelateDirect)->Arg(64)->Arg(256);

static void BM_CorrelateFast(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const CVector x = noise(n, 4), k = noise(n, 5);
    for (auto _ : state) benchmark::DoNotOptimize(numerics::correlate_circular_fast(x, k));
}
BENCHMARK(BM_CorrelateFast)->Arg(64)->Arg(256)->Arg(1024);

static void BM_AdmmLasso(benchmark::State& state) {
    const auto a = make_steering_dictionary(8, -60.0, 60.0, 1.0);
    const baselines::AdmmSolver solver(a, {0.1, 1.0, static_cast<int>(state.range(0))});
    const CVector r = noise(8, 6);
    for (auto _ : state) benchmark::DoNotOptimize(solver.solve(r));
}
BENCHMARK(BM_AdmmLasso)->Arg(10)->Arg(100);

static void BM_AdmmSetup(benchmark::State& state) {
    const auto a = make_steering_dictionary(8, -60.0, 60.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(baselines::AdmmSolver(a, {}));
}
BENCHMARK(BM_AdmmSetup)->Unit(benchmark::kMicrosecond);

static void BM_Cfar(benchmark::State& state) {
    const RVector x = real_noise(static_cast<std::size_t>(state.range(0)), 7);
    baselines::CfarConfig cfg;
    cfg.variant = static_cast<baselines::CfarVariant>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(baselines::cfar(x, cfg));
}
BENCHMARK(BM_Cfar)->ArgsProduct({{128, 1024}, {0, 1}})->ArgNames({"n", "variant"});

static void BM_SynthFrames(benchmark::State& state) {
    auto cfg = synth::SynthConfig::defaults(static_cast<synth::ModuleKind>(state.range(0)));
    cfg.n_frames = 256;
    for (auto _ : state) benchmark::DoNotOptimize(synth::generate(cfg));
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_SynthFrames)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
