#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rflego/autodiff.hpp"
#include "rflego/baselines.hpp"

namespace rflego::ft {

/// Learnable chirp-z transform.
///   y0 = x * pre
///   y1 = act1(corr(y0, k1)),  y2 = act2(corr(y1, k2)),  act(u) = u + gamma * tanh(u) on re/im
///   R  = post * y2
///   nulling: level = softplus(raw) * max|R|,  out = R + mix * (soft_threshold(R, level) - R)
/// At init k1 = conv chirp, k2 = impulse, gamma = 0 and mix = 0, so out == DFT(x).
struct FTParams {
    std::size_t n = 0;
    baselines::ChirpPair chirps;
    CVector k1;
    CVector k2;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    RVector null_raw;
    double null_mix = 0.0;
    bool nulling_enabled = true;
    bool activation_enabled = true;

    void validate() const;
};

/// Default per-bin shrink level relative to the largest output magnitude.
inline constexpr double kInitRelativeLevel = 0.05;

FTParams ft_init(std::size_t n, bool nulling_enabled = true);

enum class Ablation { NoActivation, NoNulling };
Ablation parse_ablation(const std::string& name);
FTParams ft_ablate(FTParams params, Ablation which);

/// Trainable blocks in a fixed order: k1, k2, gamma, null_raw, null_mix.
/// Frozen pieces (ablated activation, disabled nulling) are marked trainable = false.
std::vector<ad::ParamBlock> to_blocks(const FTParams& p);
FTParams from_blocks(const FTParams& like, std::span<const ad::ParamBlock> blocks);

struct TapeOptions {
    double dropout = 0.0;
    Rng* rng = nullptr;
};

/// Records the forward pass; `leaves` are the bound blocks from to_blocks().
ad::Var forward_on_tape(ad::Tape& tape, const FTParams& p, std::span<const ad::Var> leaves, ad::Var x,
                        const TapeOptions& opt = {});

CVector ft_forward(const FTParams& p, std::span<const Complex> x);

}  // namespace rflego::ft
