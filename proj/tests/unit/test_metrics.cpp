#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracle_values.hpp"
#include "rflego/errors.hpp"
#include "rflego/metrics.hpp"
#include "rflego/random.hpp"

using namespace rflego;
using namespace rflego::metrics;

namespace {

CVector tone(std::size_t n, double bin, std::size_t padded) {
    CVector x(padded);
    for (std::size_t m = 0; m < n; ++m) {
        x[m] = std::polar(1.0, 2.0 * std::numbers::pi * bin * static_cast<double>(m) / static_cast<double>(n));
    }
    return x;
}

double exhaustive_mae(std::vector<double> est, const std::vector<double>& truth, double max_error) {
    std::sort(est.begin(), est.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            total += j < est.size() ? std::min(std::abs(est[j] - truth[j]), max_error) : max_error;
        }
        best = std::min(best, total / static_cast<double>(truth.size()));
    } while (std::next_permutation(est.begin(), est.end()));
    return best;
}

}  // namespace

TEST(Pslr, HalfBinToneOnDftSamples) {
    CVector x = tone(256, 10.5, 256);
    numerics::fft_radix2(x, false);
    EXPECT_NEAR(pslr_db(numerics::magnitude(x), 3, true), oracle::kHalfBinPslrDftDb, 1e-9);
}

TEST(Pslr, HalfBinToneDenseSpectrum) {
    CVector x = tone(256, 10.5, 256 * 64);
    numerics::fft_radix2(x, false);
    EXPECT_NEAR(pslr_db(numerics::magnitude(x), 64, true), oracle::kHalfBinPslrDenseDb, 1e-9);
}

TEST(Pslr, EdgeCases) {
    RVector spike(32, 0.0);
    spike[5] = 1.0;
    EXPECT_TRUE(std::isinf(pslr_db(spike)));
    RVector wrap(32, 0.0);
    wrap[0] = 1.0;
    wrap[30] = 0.5;
    EXPECT_TRUE(std::isinf(pslr_db(wrap, 3, true)));
    EXPECT_NEAR(pslr_db(wrap, 3, false), 20.0 * std::log10(2.0), 1e-12);
    EXPECT_THROW(pslr_db(RVector(8, 0.0)), DataError);
}

TEST(Papr, FlatAndSpike) {
    EXPECT_NEAR(papr_db(RVector(16, 2.0)), 0.0, 1e-12);
    RVector s(100, 0.0);
    s[3] = 1.0;
    EXPECT_NEAR(papr_db(s), 20.0, 1e-12);
}

TEST(PickPeaks, OrderSeparationAndFloor) {
    RVector m(20, 0.0);
    m[2] = 1.0;
    m[4] = 0.8;
    m[10] = 0.6;
    m[19] = 0.7;
    m[15] = 0.05;
    const auto p = pick_peaks(m, 5, 3, true);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0], 2u);
    EXPECT_EQ(p[1], 10u);
    const auto q = pick_peaks(m, 5, 3, false);
    EXPECT_EQ(q, (std::vector<std::size_t>{2, 19, 10}));
    EXPECT_EQ(pick_peaks(m, 1, 3, true).size(), 1u);
    EXPECT_EQ(pick_peaks(m, 5, 3, false, 0.0).size(), 4u);
}

TEST(Mae, PenalizesMissesAndWraps) {
    const std::vector<double> truth{10.0, 50.0};
    EXPECT_NEAR(mae(std::vector<double>{11.0, 48.0}, truth, 100.0), 1.5, 1e-15);
    EXPECT_NEAR(mae(std::vector<double>{11.0}, truth, 100.0), 50.5, 1e-15);
    EXPECT_NEAR(mae(std::vector<double>{255.0}, std::vector<double>{1.0}, 128.0, 256.0), 2.0, 1e-15);
    EXPECT_NEAR(mae(std::vector<double>{500.0}, std::vector<double>{1.0}, 30.0), 30.0, 1e-15);
    EXPECT_THROW(mae(std::vector<double>{1.0}, std::vector<double>{}, 1.0), DataError);
}

TEST(Mae, PermutationInvariantAndOptimalForSmallK) {
    Rng rng(17);
    std::uniform_real_distribution<double> pos(0.0, 100.0), err(-2.0, 2.0);
    std::uniform_int_distribution<int> k(1, 3), extra(-1, 1);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> truth;
        while (static_cast<int>(truth.size()) < k(rng)) {
            const double t = pos(rng);
            if (std::all_of(truth.begin(), truth.end(), [&](double o) { return std::abs(o - t) >= 10.0; })) {
                truth.push_back(t);
            }
        }
        std::vector<double> est;
        for (double t : truth) est.push_back(t + err(rng));
        const int e = extra(rng);
        if (e < 0 && est.size() > 1) est.pop_back();
        if (e > 0) est.push_back(pos(rng));
        const double ref = mae(est, truth, 90.0);
        std::vector<double> shuffled = est;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(mae(shuffled, truth, 90.0), ref);
        if (est.size() <= truth.size()) EXPECT_NEAR(ref, exhaustive_mae(est, truth, 90.0), 1e-12);
    }
}

TEST(Detections, CountsHitsAndFalseCells) {
    std::vector<std::uint8_t> mask(20, 0);
    mask[5] = 1;   // hit for truth 6
    mask[12] = 1;  // false alarm
    mask[0] = 1;   // within tolerance of truth 19 only when circular
    const std::vector<int> truth{6, 19};
    const auto lin = count_detections(mask, truth, 1, false);
    EXPECT_EQ(lin.hits, 1u);
    EXPECT_EQ(lin.targets, 2u);
    EXPECT_EQ(lin.noise_cells, 20u - 3u - 2u);
    EXPECT_EQ(lin.false_cells, 2u);
    const auto circ = count_detections(mask, truth, 1, true);
    EXPECT_EQ(circ.hits, 2u);
    EXPECT_EQ(circ.false_cells, 1u);
    EXPECT_EQ(noise_cell_scores(RVector(20, 1.0), truth, 1, true).size(), 14u);
}

TEST(Detections, CalibratedSplitUsesLeadingFrames) {
    std::vector<synth::LabeledFrame> frames(2000);
    std::vector<RVector> scores(2000);
    Rng rng(3);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        frames[i].truth_bins = {50};
        scores[i].resize(128);
        for (auto& v : scores[i]) v = g(rng);
        scores[i][50] = 10.0;
    }
    CascadeOptions opt;
    opt.target_far = 1e-2;
    const CascadeResult r = calibrated_detection(scores, frames, opt, false);
    EXPECT_EQ(r.calibration_frames, 1000u);
    EXPECT_EQ(r.evaluation_frames, 1000u);
    EXPECT_EQ(r.calibration_cells, 1000u * 125u);
    EXPECT_EQ(r.metrics.dr, 1.0);
    EXPECT_NEAR(r.metrics.far, 1e-2, 2e-3);
    std::vector<RVector> few(scores.begin(), scores.begin() + 100);
    std::vector<synth::LabeledFrame> few_frames(frames.begin(), frames.begin() + 100);
    EXPECT_THROW(calibrated_detection(few, few_frames, opt, false), DataError);
}

TEST(Evaluate, ClassicalFtOnNoiselessOnGridTones) {
    std::vector<synth::LabeledFrame> frames;
    for (int i = 0; i < 8; ++i) {
        const std::vector<double> bins{static_cast<double>(5 + 20 * i), static_cast<double>(9 + 20 * i)};
        const CVector amps{{1.0, 0.0}, {0.0, 0.5}};
        frames.push_back(synth::ft_frame_from_peaks(256, bins, amps, 0.0, false, 0));
    }
    const FtEval e = evaluate_ft_classical(frames, 1);
    EXPECT_EQ(e.frames, 8u);
    EXPECT_EQ(e.mae_bins, 0.0);
    EXPECT_NEAR(e.pslr_db, 20.0 * std::log10(2.0), 1e-9);
    const FtEval l = evaluate_ft_lego(ft::ft_init(256), frames, 1);
    EXPECT_NEAR(l.pslr_db, e.pslr_db, 1e-9);
    EXPECT_EQ(l.mae_bins, e.mae_bins);
}

TEST(Evaluate, BeamformerLegoInitVersusAdmm) {
    synth::SynthConfig c = synth::SynthConfig::defaults(synth::ModuleKind::BF);
    c.n_frames = 40;
    c.snr_low_db = 30.0;
    c.bf_sources_max = 1;
    const SteeringDictionary a = synth::dictionary_for(c);
    const synth::Dataset d = synth::generate(c);
    const BfEval admm = evaluate_bf_admm(a, {0.1, 1.0, 200}, d.frames, 1);
    EXPECT_LT(admm.mae_deg, 1.0);
    const BfEval lego = evaluate_bf_lego(bf::bf_init(a, 10), a, d.frames, 1);
    EXPECT_EQ(lego.frames, 40u);
    EXPECT_LT(lego.mae_deg, 5.0);
}

TEST(Cascade, FrontBackNamesRoundTrip) {
    for (auto f : {FrontKind::ClassicalFT, FrontKind::LegoFT, FrontKind::ClassicalBF, FrontKind::LegoBF}) {
        EXPECT_EQ(parse_front(front_name(f)), f);
    }
    for (auto b : {BackKind::ClassicalCfar, BackKind::LegoDet}) EXPECT_EQ(parse_back(back_name(b)), b);
    EXPECT_THROW(parse_front("fpga"), Error);
}

TEST(Cascade, ClassicalChainDetectsStrongTones) {
    synth::SynthConfig c = synth::SynthConfig::defaults(synth::ModuleKind::FT);
    c.n_frames = 1000;
    c.snr_low_db = 10.0;
    c.snr_high_db = 20.0;
    const synth::Dataset d = synth::generate(c);
    CascadeModels m;
    CascadeOptions opt;
    opt.threads = 1;
    const CascadeResult r = cascade_eval(FrontKind::ClassicalFT, BackKind::ClassicalCfar, m, d, opt);
    EXPECT_GT(r.metrics.dr, 0.9);
    EXPECT_LT(r.metrics.far, 2e-3);
    const CascadeResult again = cascade_eval(FrontKind::ClassicalFT, BackKind::ClassicalCfar, m, d, opt);
    EXPECT_EQ(r.threshold, again.threshold);
    EXPECT_THROW(cascade_eval(FrontKind::ClassicalBF, BackKind::ClassicalCfar, m, d, opt), DimensionError);
}
