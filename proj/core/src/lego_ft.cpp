#include "rflego/lego_ft.hpp"

#include <cmath>

#include "rflego/errors.hpp"

namespace rflego::ft {

using ad::ParamBlock;
using ad::Reduction;
using ad::Tape;
using ad::Var;

void FTParams::validate() const {
    if (n < 1 || chirps.n != n || k1.size() != n || k2.size() != n || null_raw.size() != n) {
        throw ValidationError("ft params: inconsistent lengths");
    }
    numerics::require_finite(k1, "ft kernel 1");
    numerics::require_finite(k2, "ft kernel 2");
    numerics::require_finite(null_raw, "ft nulling levels");
    if (!std::isfinite(gamma1) || !std::isfinite(gamma2) || !std::isfinite(null_mix)) {
        throw NumericError("ft params: non-finite scalar");
    }
}

FTParams ft_init(std::size_t n, bool nulling_enabled) {
    if (n < 16) {
        throw DimensionError("ft_init: N must be at least 16");
    }
    FTParams p;
    p.n = n;
    p.chirps = baselines::make_chirps(n);
    p.k1 = p.chirps.conv;
    p.k2.assign(n, Complex{});
    p.k2[0] = 1.0;
    p.null_raw.assign(n, numerics::softplus_inverse(kInitRelativeLevel));
    p.nulling_enabled = nulling_enabled;
    return p;
}

Ablation parse_ablation(const std::string& name) {
    if (name == "no_activation") return Ablation::NoActivation;
    if (name == "no_nulling") return Ablation::NoNulling;
    throw DataError("unknown ft ablation '" + name + "' (expected no_activation or no_nulling)");
}

FTParams ft_ablate(FTParams params, Ablation which) {
    switch (which) {
        case Ablation::NoActivation:
            params.activation_enabled = false;
            params.gamma1 = 0.0;
            params.gamma2 = 0.0;
            break;
        case Ablation::NoNulling:
            params.nulling_enabled = false;
            break;
    }
    return params;
}

namespace {

ParamBlock complex_block(const std::string& name, const CVector& v) {
    ParamBlock b;
    b.name = name;
    b.complex = true;
    b.rows = v.size();
    b.values.reserve(2 * v.size());
    for (const auto& c : v) {
        b.values.push_back(c.real());
        b.values.push_back(c.imag());
    }
    return b;
}

ParamBlock real_block(const std::string& name, RVector v, bool trainable) {
    ParamBlock b;
    b.name = name;
    b.rows = v.size();
    b.values = std::move(v);
    b.trainable = trainable;
    return b;
}

CVector unpack_complex(const ParamBlock& b) {
    CVector v(b.rows);
    for (std::size_t i = 0; i < b.rows; ++i) v[i] = {b.values[2 * i], b.values[2 * i + 1]};
    return v;
}

Var activation(Tape& t, Var u, Var gamma, const TapeOptions& opt) {
    Var th = t.tanh(u);
    if (opt.dropout > 0.0 && opt.rng != nullptr) {
        th = ad::dropout(t, th, opt.dropout, *opt.rng);
    }
    return t.add(u, t.mul(gamma, th));
}

}  // namespace

std::vector<ParamBlock> to_blocks(const FTParams& p) {
    std::vector<ParamBlock> blocks;
    blocks.push_back(complex_block("k1", p.k1));
    blocks.push_back(complex_block("k2", p.k2));
    blocks.push_back(real_block("gamma", {p.gamma1, p.gamma2}, p.activation_enabled));
    blocks.push_back(real_block("null_raw", p.null_raw, p.nulling_enabled));
    blocks.push_back(real_block("null_mix", {p.null_mix}, p.nulling_enabled));
    return blocks;
}

FTParams from_blocks(const FTParams& like, std::span<const ParamBlock> blocks) {
    if (blocks.size() != 5) {
        throw ValidationError("ft params: expected 5 blocks");
    }
    FTParams p = like;
    p.k1 = unpack_complex(blocks[0]);
    p.k2 = unpack_complex(blocks[1]);
    p.gamma1 = blocks[2].values.at(0);
    p.gamma2 = blocks[2].values.at(1);
    p.null_raw = blocks[3].values;
    p.null_mix = blocks[4].values.at(0);
    p.validate();
    return p;
}

Var forward_on_tape(Tape& t, const FTParams& p, std::span<const Var> leaves, Var x, const TapeOptions& opt) {
    if (t.size(x) != p.n) {
        throw DimensionError("ft_forward: input length " + std::to_string(t.size(x)) + " != N = " +
                             std::to_string(p.n));
    }
    if (leaves.size() != 5) {
        throw DimensionError("ft_forward: expected 5 parameter leaves");
    }
    const Var pre = t.constant(std::span<const Complex>(p.chirps.pre));
    const Var post = t.constant(std::span<const Complex>(p.chirps.post));

    Var y = t.mul(x, pre);
    y = t.correlate(y, leaves[0]);
    if (p.activation_enabled) {
        // gamma block holds both layers; split with constant selectors
        const Var g1 = t.reduce(Reduction::Sum, t.mul(leaves[2], t.constant(std::span<const double>(RVector{1.0, 0.0}))));
        y = activation(t, y, g1, opt);
    }
    y = t.correlate(y, leaves[1]);
    if (p.activation_enabled) {
        const Var g2 = t.reduce(Reduction::Sum, t.mul(leaves[2], t.constant(std::span<const double>(RVector{0.0, 1.0}))));
        y = activation(t, y, g2, opt);
    }
    Var r = t.mul(post, y);
    if (!p.nulling_enabled) {
        return r;
    }
    const Var scale = t.reduce(Reduction::Max, t.magnitude(r));
    const Var level = t.mul(t.softplus(leaves[3]), scale);
    const Var shrunk = t.soft_threshold(r, level);
    return t.add(r, t.mul(leaves[4], t.sub(shrunk, r)));
}

CVector ft_forward(const FTParams& p, std::span<const Complex> x) {
    if (x.size() != p.n) {
        throw DimensionError("ft_forward: input length " + std::to_string(x.size()) + " != N = " +
                             std::to_string(p.n));
    }
    Tape t;
    std::vector<Var> leaves;
    for (const auto& b : to_blocks(p)) {
        if (b.complex) {
            leaves.push_back(t.constant(std::span<const Complex>(unpack_complex(b))));
        } else {
            leaves.push_back(t.constant(std::span<const double>(b.values)));
        }
    }
    const Var out = forward_on_tape(t, p, leaves, t.constant(x));
    const auto v = t.complex_value(out);
    return {v.begin(), v.end()};
}

}  // namespace rflego::ft
