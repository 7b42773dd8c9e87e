#include <gtest/gtest.h>

#include <cmath>

#include "rflego/autodiff.hpp"
#include "rflego/errors.hpp"
#include "rflego/random.hpp"

using namespace rflego;
using namespace rflego::ad;

namespace {

ParamBlock real_block(std::string name, std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    ParamBlock b{std::move(name), RVector(n), false, n, 1, true};
    for (auto& v : b.values) v = u(rng);
    return b;
}

ParamBlock complex_block(std::string name, std::size_t n, std::uint64_t seed) {
    ParamBlock b = real_block(std::move(name), 2 * n, seed);
    b.complex = true;
    b.rows = n;
    return b;
}

double check(const TapedFunction& fn, std::vector<ParamBlock> params) { return finite_diff_check(fn, params, 1e-5); }

}  // namespace

TEST(Tape, ElementwiseRealGradients) {
    auto fn = [](Tape& t, std::span<const Var> v) {
        Var a = v[0], b = v[1];
        Var e = t.add(t.mul(a, b), t.solve(a, t.softplus(b)));
        e = t.sub(t.tanh(e), t.sigmoid(t.mul(a, a)));
        e = t.add(e, t.log(t.softplus(a)));
        return t.reduce(Reduction::Sum, t.clip(e, -0.8, 2.0));
    };
    EXPECT_LT(check(fn, {real_block("a", 6, 1), real_block("b", 6, 2)}), 1e-6);
}

TEST(Tape, ComplexGradients) {
    auto fn = [](Tape& t, std::span<const Var> v) {
        Var x = v[0], k = v[1];
        Var y = t.correlate(x, k);
        y = t.add(y, t.tanh(t.mul(y, x)));
        y = t.soft_threshold(y, t.softplus(v[2]));
        return t.reduce(Reduction::Norm, t.add(y, t.constant(std::span<const double>(RVector(8, 0.1)))));
    };
    EXPECT_LT(check(fn, {complex_block("x", 8, 3), complex_block("k", 8, 4), real_block("l", 1, 5, -2.0, -1.0)}),
              1e-6);
}

TEST(Tape, MatVecConcatAndMean) {
    auto fn = [](Tape& t, std::span<const Var> v) {
        Var y = t.matvec(v[0], v[1]);
        std::vector<Var> parts{y, t.magnitude(v[2])};
        Var c = t.concat(parts);
        return t.reduce(Reduction::Mean, t.mul(c, c));
    };
    ParamBlock m = real_block("m", 12, 6);
    m.rows = 3;
    m.cols = 4;
    EXPECT_LT(check(fn, {m, real_block("x", 4, 7), complex_block("z", 5, 8)}), 1e-6);
}

TEST(Tape, MaxRoutesGradientToMaximizer) {
    Tape t;
    RVector x{0.5, 2.0, -1.0, 2.0};
    Var p = t.parameter(std::span<const double>(x));
    Var m = t.reduce(Reduction::Max, p);
    EXPECT_EQ(t.scalar(m), 2.0);
    t.backward(m);
    const auto g = t.real_grad(p);
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[1], 1.0);
    EXPECT_EQ(g[3], 0.0);
}

TEST(Tape, ComplexGradientConvention) {
    // L = |z|^2 -> dL/dRe + j dL/dIm = 2 z
    Tape t;
    CVector z{{0.3, -1.2}};
    Var p = t.parameter(std::span<const Complex>(z));
    Var l = t.reduce(Reduction::Sum, t.mul(t.magnitude(p), t.magnitude(p)));
    t.backward(l);
    EXPECT_NEAR(t.complex_grad(p)[0].real(), 0.6, 1e-14);
    EXPECT_NEAR(t.complex_grad(p)[0].imag(), -2.4, 1e-14);
}

TEST(Tape, RejectsUnsupportedOperations) {
    Tape t;
    CVector z{{1.0, 1.0}, {2.0, 0.0}};
    RVector r{1.0, 2.0, 3.0};
    Var c = t.constant(std::span<const Complex>(z));
    Var x = t.constant(std::span<const double>(r));
    EXPECT_THROW(t.reduce(Reduction::Min, x), CapabilityError);
    EXPECT_THROW(t.reduce(Reduction::OrderStatistic, x), CapabilityError);
    EXPECT_THROW(t.reduce(Reduction::Max, c), CapabilityError);
    EXPECT_THROW(t.softplus(c), CapabilityError);
    EXPECT_THROW(t.add(c, x), DimensionError);
    EXPECT_THROW(t.correlate(x, x), CapabilityError);
    EXPECT_THROW(t.backward(c), DimensionError);
}

TEST(Tape, ReplayIsBitIdentical) {
    Tape t;
    CVector z{{1.0, 0.5}, {-0.2, 0.1}, {0.7, -0.3}, {0.0, 1.0}};
    Var a = t.parameter(std::span<const Complex>(z));
    Var y = t.tanh(t.correlate(a, a));
    t.reduce(Reduction::Norm, y);
    EXPECT_TRUE(t.replay_matches());
}

TEST(Dropout, InvertedScalingAndDeterminism) {
    RVector ones(20000, 1.0);
    Tape t1, t2;
    Rng r1(3), r2(3);
    Var a = dropout(t1, t1.constant(std::span<const double>(ones)), 0.25, r1);
    Var b = dropout(t2, t2.constant(std::span<const double>(ones)), 0.25, r2);
    const auto va = t1.real_value(a);
    const auto vb = t2.real_value(b);
    double sum = 0.0;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        EXPECT_EQ(va[i], vb[i]);
        sum += va[i];
        zeros += va[i] == 0.0;
        if (va[i] != 0.0) EXPECT_NEAR(va[i], 4.0 / 3.0, 1e-15);
    }
    EXPECT_NEAR(sum / 20000.0, 1.0, 0.03);
    EXPECT_NEAR(static_cast<double>(zeros) / 20000.0, 0.25, 0.02);
}

TEST(ValueAndGrad, GradientLayoutFollowsBlocks) {
    std::vector<ParamBlock> params{real_block("a", 3, 9), complex_block("k", 2, 10)};
    auto fn = [](Tape& t, std::span<const Var> v) {
        Var s = t.reduce(Reduction::Sum, t.mul(v[0], v[0]));
        return t.add(s, t.reduce(Reduction::Norm, v[1]));
    };
    const ValueAndGrad vg = value_and_grad(fn, params);
    ASSERT_EQ(vg.gradients.size(), 2u);
    ASSERT_EQ(vg.gradients[1].size(), 4u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(vg.gradients[0][i], 2.0 * params[0].values[i], 1e-15);
    EXPECT_NEAR(evaluate(fn, params), vg.value, 0.0);
}

TEST(FiniteDiff, FlatRegionsCompareAbsolutely) {
    auto fn = [](Tape& t, std::span<const Var> v) { return t.reduce(Reduction::Sum, t.clip(v[0], -0.1, 0.1)); };
    EXPECT_EQ(check(fn, {real_block("a", 4, 11, 0.5, 0.9)}), 0.0);
    EXPECT_THROW(finite_diff_check(fn, std::vector<ParamBlock>{real_block("a", 1, 1)}, 0.0), std::invalid_argument);
}
