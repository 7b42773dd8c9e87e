#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rflego/errors.hpp"
#include "rflego/train.hpp"

using namespace rflego;
using namespace rflego::train;

TEST(Loss, CosineValues) {
    const RVector t{0.0, 1.0, 0.0};
    EXPECT_NEAR(cosine_loss(RVector{0.0, 3.0, 0.0}, t), 0.0, 1e-15);
    EXPECT_NEAR(cosine_loss(RVector{1.0, 0.0, 0.0}, t), 1.0, 1e-15);
    EXPECT_NEAR(cosine_loss(RVector{1.0, 1.0, 0.0}, t), 1.0 - 1.0 / std::sqrt(2.0), 1e-15);
    const CVector c{{0.0, 0.0}, {0.0, -2.0}, {0.0, 0.0}};
    EXPECT_NEAR(cosine_loss(c, t), 0.0, 1e-15);
    EXPECT_THROW(cosine_loss(RVector{1.0}, RVector{0.0}), DataError);
    EXPECT_THROW(cosine_loss(RVector{1.0, 2.0}, t), DimensionError);
}

TEST(Loss, CosineOnTapeAgrees) {
    const CVector pred{{0.3, 0.1}, {1.0, -0.4}, {0.2, 0.2}, {0.0, 0.05}};
    const RVector target{0.0, 1.0, 0.5, 0.0};
    ad::Tape t;
    const ad::Var l = cosine_loss_on_tape(t, t.constant(std::span<const Complex>(pred)), target);
    EXPECT_NEAR(t.scalar(l), cosine_loss(pred, target), 1e-14);
}

TEST(Loss, WeightedBce) {
    const RVector p{0.9, 0.2, 0.4};
    const RVector m{1.0, 0.0, 0.0};
    const double w = 2.0;
    const double expect = (w * -std::log(0.9) - std::log(0.8) - std::log(0.6)) / (w + 2.0);
    EXPECT_NEAR(bce_loss(p, m, w), expect, 1e-14);
    EXPECT_TRUE(std::isfinite(bce_loss(RVector{0.0, 1.0}, RVector{1.0, 0.0})));
    EXPECT_NEAR(bce_weight_total(m, w), 4.0, 0.0);
}

TEST(Loss, LogitFormMatchesProbabilityForm) {
    const RVector z{-3.0, 0.5, 2.0, -0.1, 40.0};
    const RVector m{0.0, 1.0, 1.0, 0.0, 0.0};
    RVector p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = numerics::sigmoid(z[i]);
    ad::Tape t;
    const ad::Var s1 = bce_sum_on_tape(t, t.constant(std::span<const double>(p)), m, 3.0);
    const ad::Var s2 = bce_logits_sum_on_tape(t, t.constant(std::span<const double>(z)), m, 3.0);
    EXPECT_NEAR(t.scalar(s1), t.scalar(s2), 1e-9);
    EXPECT_NEAR(t.scalar(s1) / bce_weight_total(m, 3.0), bce_loss(p, m, 3.0), 1e-12);
}

TEST(Loss, PositiveWeightCountsCells) {
    std::vector<synth::LabeledFrame> frames(2);
    frames[0].target = {1.0, 0.0, 0.0, 0.0};
    frames[1].target = {0.0, 0.0, 1.0, 0.0};
    EXPECT_EQ(positive_weight(frames), 3.0);
    frames[0].target.assign(4, 0.0);
    frames[1].target.assign(4, 0.0);
    EXPECT_EQ(positive_weight(frames), 1.0);
}

TEST(Optimizer, FirstAdamStepHasLearningRateSize) {
    std::vector<ad::ParamBlock> params{{"w", {1.0, -2.0, 0.5}, false, 3, 1, true}, {"f", {4.0}, false, 1, 1, false}};
    AdamState s = AdamState::for_blocks(params);
    const std::vector<RVector> g{{0.3, -5.0, 0.0}, {1.0}};
    optimizer_step(params, g, s, 0.1, 0.0);
    EXPECT_NEAR(params[0].values[0], 0.9, 1e-7);
    EXPECT_NEAR(params[0].values[1], -1.9, 1e-7);
    EXPECT_EQ(params[0].values[2], 0.5);
    EXPECT_EQ(params[1].values[0], 4.0);
    EXPECT_EQ(s.step, 1u);
}

TEST(Optimizer, DecoupledWeightDecay) {
    std::vector<ad::ParamBlock> params{{"w", {2.0}, false, 1, 1, true}};
    AdamState s = AdamState::for_blocks(params);
    optimizer_step(params, std::vector<RVector>{{0.0}}, s, 0.1, 0.5);
    EXPECT_NEAR(params[0].values[0], 2.0 * (1.0 - 0.05), 1e-15);
}

TEST(Optimizer, NonFiniteGradientLeavesStateUntouched) {
    std::vector<ad::ParamBlock> params{{"w", {1.0, 2.0}, false, 2, 1, true}};
    AdamState s = AdamState::for_blocks(params);
    optimizer_step(params, std::vector<RVector>{{0.1, 0.1}}, s, 0.01, 0.0);
    const auto before = params;
    const auto m_before = s.m;
    EXPECT_THROW(optimizer_step(params, std::vector<RVector>{{NAN, 0.1}}, s, 0.01, 0.0), NumericError);
    EXPECT_EQ(params[0].values, before[0].values);
    EXPECT_EQ(s.m, m_before);
    EXPECT_EQ(s.step, 1u);
}

TEST(Optimizer, ConstantGradientStepApproachesLearningRate) {
    std::vector<ad::ParamBlock> params{{"w", {0.0}, false, 1, 1, true}};
    AdamState s = AdamState::for_blocks(params);
    double last = 0.0;
    for (int i = 0; i < 5000; ++i) {
        const double before = params[0].values[0];
        optimizer_step(params, std::vector<RVector>{{0.37}}, s, 1e-3, 0.0);
        last = before - params[0].values[0];
    }
    EXPECT_NEAR(last, 1e-3, 1e-9);
}

TEST(Optimizer, ZeroGradientOnlyDecays) {
    std::vector<ad::ParamBlock> params{{"w", {3.0, -1.0}, false, 2, 1, true}};
    AdamState s = AdamState::for_blocks(params);
    optimizer_step(params, std::vector<RVector>{{0.0, 0.0}}, s, 1e-3, 0.0);
    EXPECT_EQ(params[0].values, (RVector{3.0, -1.0}));
    optimizer_step(params, std::vector<RVector>{{0.0, 0.0}}, s, 1e-3, 0.01);
    EXPECT_NEAR(params[0].values[0], 3.0 * (1.0 - 1e-5), 1e-15);
    EXPECT_NEAR(params[0].values[1], -1.0 * (1.0 - 1e-5), 1e-15);
}

TEST(Split, DeterministicDisjointAndComplete) {
    const Split a = make_split(1000, 0.8, 9);
    const Split b = make_split(1000, 0.8, 9);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.train.size(), 800u);
    EXPECT_EQ(a.validation.size(), 200u);
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.validation.begin(), a.validation.end());
    EXPECT_EQ(all.size(), 1000u);
    EXPECT_NE(make_split(1000, 0.8, 10).train, a.train);
    const Split tiny = make_split(2, 0.99, 1);
    EXPECT_EQ(tiny.validation.size(), 1u);
}

TEST(Config, KeyValueRoundTripAndValidation) {
    TrainConfig c = TrainConfig::for_module(synth::ModuleKind::DET);
    EXPECT_EQ(c.loss, LossKind::Bce);
    c.learning_rate = 3e-4;
    c.epochs = 7;
    const TrainConfig back = TrainConfig::from_keyvalues(c.to_keyvalues(), synth::ModuleKind::DET);
    EXPECT_EQ(back.learning_rate, 3e-4);
    EXPECT_EQ(back.epochs, 7u);
    EXPECT_EQ(back.loss, LossKind::Bce);
    TrainConfig bad;
    bad.split = 1.0;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(parse_loss("hinge"), Error);
}

namespace {

synth::Dataset tiny(synth::ModuleKind kind, std::size_t frames) {
    synth::SynthConfig c = synth::SynthConfig::defaults(kind);
    c.n_frames = frames;
    c.seed = 77;
    c.ft_n = 32;
    c.ft_peaks_max = 2;
    c.det_length = 48;
    c.det_peaks_max = 2;
    c.bf_grid_step_deg = 4.0;
    return synth::generate(c);
}

TrainConfig quick(synth::ModuleKind kind, int threads) {
    TrainConfig c = TrainConfig::for_module(kind);
    c.epochs = 3;
    c.batch_size = 16;
    c.chunk_size = 4;
    c.learning_rate = 5e-3;
    c.threads = threads;
    return c;
}

}  // namespace

TEST(Training, FtRunIsReproducibleAcrossThreadCounts) {
    const synth::Dataset d = tiny(synth::ModuleKind::FT, 64);
    const auto a = train_ft(ft::ft_init(32), d, quick(synth::ModuleKind::FT, 1));
    const auto b = train_ft(ft::ft_init(32), d, quick(synth::ModuleKind::FT, 3));
    EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
    EXPECT_EQ(a.params.k1, b.params.k1);
    EXPECT_EQ(a.history.epochs(), 3u);
    EXPECT_EQ(a.history.metric_name, "val_mae_bins");
    EXPECT_LT(a.history.train_loss.back(), a.history.train_loss.front());
}

TEST(Training, BeamformerLossDecreases) {
    const synth::Dataset d = tiny(synth::ModuleKind::BF, 64);
    const SteeringDictionary a = synth::dictionary_for(d.config);
    const auto r = train_bf(bf::bf_init(a, 3), a, d, quick(synth::ModuleKind::BF, 1));
    EXPECT_LT(r.history.val_loss.back(), r.history.initial_val_loss);
    EXPECT_EQ(r.history.metric_name, "val_mae_deg");
}

TEST(Training, DetectorKeepsBestCheckpoint) {
    const synth::Dataset d = tiny(synth::ModuleKind::DET, 64);
    baselines::CfarConfig cfg;
    cfg.guard_cells = 1;
    cfg.train_cells = 4;
    const auto r = train_det(det::det_init_from_cfar(cfg), d, quick(synth::ModuleKind::DET, 1));
    EXPECT_EQ(r.history.metric_name, "val_dr_at_half");
    EXPECT_LE(r.history.best_epoch, 3u);
    const std::string csv = r.history.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_loss,val_dr_at_half");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Training, FtDefaultRecipeLowersValidationLoss) {
    synth::SynthConfig c = synth::SynthConfig::defaults(synth::ModuleKind::FT);
    c.n_frames = 2000;
    c.seed = 11;
    const synth::Dataset d = synth::generate(c);
    TrainConfig t = TrainConfig::for_module(synth::ModuleKind::FT);
    t.epochs = 10;
    const auto r = train_ft(ft::ft_init(256), d, t);
    EXPECT_LT(r.history.val_loss.back(), r.history.initial_val_loss);
    EXPECT_EQ(r.history.best_epoch, 10u);
}

TEST(Training, ZeroEpochsReturnsInit) {
    const synth::Dataset d = tiny(synth::ModuleKind::FT, 16);
    TrainConfig c = quick(synth::ModuleKind::FT, 1);
    c.epochs = 0;
    const ft::FTParams init = ft::ft_init(32);
    const auto r = train_ft(init, d, c);
    EXPECT_EQ(r.params.k1, init.k1);
    EXPECT_EQ(r.history.best_epoch, 0u);
}

TEST(Training, RejectsMismatchedData) {
    const synth::Dataset d = tiny(synth::ModuleKind::DET, 16);
    EXPECT_THROW(train_ft(ft::ft_init(32), d, quick(synth::ModuleKind::FT, 1)), Error);
}

TEST(Gradcheck, SuiteAtInitIsAccurate) {
    for (auto kind : {synth::ModuleKind::FT, synth::ModuleKind::BF, synth::ModuleKind::DET}) {
        const auto cases = gradient_suite(kind, 3, 1e-5, 0, 1);
        ASSERT_EQ(cases.size(), 1u);
        EXPECT_GT(cases[0].parameters, 0u);
        EXPECT_LT(cases[0].max_rel_error, 1e-4) << synth::module_name(kind);
    }
}
