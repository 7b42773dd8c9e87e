#include <gtest/gtest.h>

#include <cmath>

#include "rflego/config.hpp"
#include "rflego/dataset_io.hpp"
#include "rflego/errors.hpp"
#include "rflego/params_io.hpp"
#include "rflego/random.hpp"

using namespace rflego;

TEST(KeyValues, ParsesCommentsAndTypes) {
    const KeyValues kv = KeyValues::parse("# header\nversion = 1\nlr = 2.5e-3  # trailing\nn=7\nflag = true\n");
    EXPECT_EQ(kv.get_double("lr", 0.0), 2.5e-3);
    EXPECT_EQ(kv.get_int("n", 0), 7);
    EXPECT_TRUE(kv.get_bool("flag", false));
    EXPECT_EQ(kv.get("missing", "x"), "x");
}

TEST(KeyValues, RejectsMalformedInput) {
    EXPECT_THROW(KeyValues::parse("lr = 1\n"), ValidationError);
    EXPECT_THROW(KeyValues::parse("version = 2\n"), ValidationError);
    EXPECT_THROW(KeyValues::parse("version = 1\nbroken line\n"), ValidationError);
    EXPECT_THROW(KeyValues::parse("version = 1\na = 1\na = 2\n"), ValidationError);
    const KeyValues kv = KeyValues::parse("version = 1\na = one\nb = 1.5\n");
    EXPECT_THROW(kv.get_double("a", 0.0), ValidationError);
    EXPECT_THROW(kv.get_int("b", 0), ValidationError);
}

TEST(KeyValues, ReportsUnusedKeys) {
    const KeyValues kv = KeyValues::parse("version = 1\nalpha = 1\nbeta = 2\n");
    kv.get_int("alpha", 0);
    EXPECT_EQ(kv.first_unused_key(), "beta");
    kv.get_int("beta", 0);
    EXPECT_EQ(kv.first_unused_key(), "");
}

TEST(KeyValues, TextRoundTrip) {
    KeyValues kv;
    kv.set("version", "1");
    kv.set("x", "0.1");
    const KeyValues back = KeyValues::parse(kv.to_string());
    EXPECT_EQ(back.entries(), kv.entries());
}

class DatasetRoundTrip : public ::testing::TestWithParam<synth::ModuleKind> {};

TEST_P(DatasetRoundTrip, EncodeDecodeIsLossless) {
    synth::SynthConfig c = synth::SynthConfig::defaults(GetParam());
    c.n_frames = 25;
    c.seed = 5;
    const synth::Dataset d = synth::generate(c);
    const auto bytes = io::encode_dataset(d);
    const synth::Dataset back = io::decode_dataset(bytes);
    ASSERT_EQ(back.frames.size(), d.frames.size());
    EXPECT_EQ(back.config.kind, c.kind);
    EXPECT_EQ(back.config.seed, c.seed);
    for (std::size_t i = 0; i < d.frames.size(); ++i) {
        EXPECT_EQ(back.frames[i].input_c, d.frames[i].input_c);
        EXPECT_EQ(back.frames[i].input_r, d.frames[i].input_r);
        EXPECT_EQ(back.frames[i].target, d.frames[i].target);
        EXPECT_EQ(back.frames[i].truth, d.frames[i].truth);
        EXPECT_EQ(back.frames[i].truth_bins, d.frames[i].truth_bins);
        EXPECT_EQ(back.frames[i].snr_db, d.frames[i].snr_db);
    }
    EXPECT_EQ(io::encode_dataset(back), bytes);
}

INSTANTIATE_TEST_SUITE_P(Modules, DatasetRoundTrip,
                         ::testing::Values(synth::ModuleKind::FT, synth::ModuleKind::BF, synth::ModuleKind::DET));

TEST(Dataset, RejectsCorruptFiles) {
    synth::SynthConfig c = synth::SynthConfig::defaults(synth::ModuleKind::DET);
    c.n_frames = 3;
    auto bytes = io::encode_dataset(synth::generate(c));
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    EXPECT_THROW(io::decode_dataset(truncated), ValidationError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(io::decode_dataset(bad_magic), ValidationError);
    auto bad_version = bytes;
    bad_version[8] = 9;
    EXPECT_THROW(io::decode_dataset(bad_version), ValidationError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(io::decode_dataset(trailing), ValidationError);
}

namespace {

template <class Blocks>
void perturb(Blocks& blocks, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& b : blocks) {
        if (!b.trainable) continue;
        for (auto& v : b.values) v += g(rng);
    }
}

}  // namespace

TEST(Params, FtRoundTripIsExact) {
    const ft::FTParams init = ft::ft_init(32);
    auto blocks = ft::to_blocks(init);
    perturb(blocks, 1);
    const ft::FTParams p = ft::from_blocks(init, blocks);
    const std::string text = io::encode_ft_params(p);
    EXPECT_EQ(io::params_module(text), "ft");
    const ft::FTParams back = io::decode_ft_params(text);
    EXPECT_EQ(back.k1, p.k1);
    EXPECT_EQ(back.k2, p.k2);
    EXPECT_EQ(back.null_raw, p.null_raw);
    EXPECT_EQ(back.gamma1, p.gamma1);
    EXPECT_EQ(io::encode_ft_params(back), text);
}

TEST(Params, BeamformerRoundTripIsExact) {
    const SteeringDictionary a = make_steering_dictionary(8, -30.0, 30.0, 2.0);
    const bf::BFParams init = bf::bf_init(a, 4, true);
    auto blocks = bf::to_blocks(init);
    perturb(blocks, 2);
    const bf::BFParams p = bf::from_blocks(init, blocks);
    const auto [back, dict] = io::decode_bf_params(io::encode_bf_params(p, a));
    EXPECT_EQ(dict.grid, a.grid);
    EXPECT_EQ(dict.matrix, a.matrix);
    EXPECT_EQ(back.w, p.w);
    EXPECT_EQ(back.wg, p.wg);
    EXPECT_EQ(back.gate_bias, p.gate_bias);
    EXPECT_EQ(back.per_layer_gates, true);
}

TEST(Params, DetectorRoundTripIsExact) {
    const det::SSMParams init = det::det_init_from_cfar({});
    auto blocks = det::to_blocks(init);
    perturb(blocks, 3);
    const det::SSMParams p = det::from_blocks(init, blocks);
    const det::SSMParams back = io::decode_det_params(io::encode_det_params(p));
    EXPECT_EQ(back.fwd.a, p.fwd.a);
    EXPECT_EQ(back.bwd.c, p.bwd.c);
    EXPECT_EQ(back.threshold, p.threshold);
    EXPECT_EQ(back.beta_raw, p.beta_raw);
}

TEST(Params, RejectsWrongModuleAndGarbage) {
    const std::string det_text = io::encode_det_params(det::det_init_from_cfar({}));
    EXPECT_THROW(io::decode_ft_params(det_text), ValidationError);
    EXPECT_THROW(io::decode_det_params("{not json"), ValidationError);
    EXPECT_THROW(io::decode_det_params(R"({"format":"rflego-params","version":99})"), ValidationError);
}
