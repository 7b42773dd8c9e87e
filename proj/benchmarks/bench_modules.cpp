#include <benchmark/benchmark.h>

#include "rflego/lego_beamformer.hpp"
#include "rflego/lego_detector.hpp"
#include "rflego/lego_ft.hpp"
#include "rflego/synth.hpp"
#include "rflego/train.hpp"

using namespace rflego;

namespace {

synth::Dataset frames(synth::ModuleKind kind, std::size_t n) {
    auto cfg = synth::SynthConfig::defaults(kind);
    cfg.n_frames = n;
    cfg.seed = 17;
    return synth::generate(cfg);
}

}  // namespace

static void BM_FtForward(benchmark::State& state) {
    auto cfg = synth::SynthConfig::defaults(synth::ModuleKind::FT);
    cfg.n_frames = 1;
    cfg.ft_n = static_cast<std::size_t>(state.range(0));
    const auto ds = synth::generate(cfg);
    const auto p = ft::ft_init(cfg.ft_n);
    for (auto _ : state) benchmark::DoNotOptimize(ft::ft_forward(p, ds.frames[0].input_c));
}
BENCHMARK(BM_FtForward)->Arg(64)->Arg(256)->Arg(255);

static void BM_BfForward(benchmark::State& state) {
    const auto ds = frames(synth::ModuleKind::BF, 1);
    const auto a = synth::dictionary_for(ds.config);
    const auto p = bf::bf_init(a, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(bf::bf_forward(p, a, ds.frames[0].input_c));
}
BENCHMARK(BM_BfForward)->Arg(5)->Arg(10)->Arg(20);

static void BM_DetScores(benchmark::State& state) {
    const auto ds = frames(synth::ModuleKind::DET, 1);
    baselines::CfarConfig cfg;
    cfg.train_cells = static_cast<int>(state.range(0));
    const auto p = det::det_init_from_cfar(cfg);
    for (auto _ : state) benchmark::DoNotOptimize(det::det_scores(p, ds.frames[0].input_r));
}
BENCHMARK(BM_DetScores)->Arg(4)->Arg(8)->Arg(16);

// one taped forward and backward pass over a chunk of frames
static void BM_LossAndGradient(benchmark::State& state) {
    const auto kind = static_cast<synth::ModuleKind>(state.range(0));
    const auto ds = frames(kind, 32);
    ad::TapedFunction fn;
    std::vector<ad::ParamBlock> blocks;
    if (kind == synth::ModuleKind::FT) {
        const auto p = ft::ft_init(ds.config.ft_n);
        fn = train::ft_loss_function(p, ds.frames);
        blocks = ft::to_blocks(p);
    } else if (kind == synth::ModuleKind::BF) {
        static const auto a = synth::dictionary_for(ds.config);
        const auto p = bf::bf_init(a, 10);
        fn = train::bf_loss_function(p, a, ds.frames);
        blocks = bf::to_blocks(p);
    } else {
        const auto p = det::det_init_from_cfar({});
        fn = train::det_loss_function(p, ds.frames);
        blocks = det::to_blocks(p);
    }
    for (auto _ : state) benchmark::DoNotOptimize(ad::value_and_grad(fn, blocks));
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_LossAndGradient)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
