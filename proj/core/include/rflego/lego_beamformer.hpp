#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rflego/autodiff.hpp"
#include "rflego/steering.hpp"

namespace rflego::bf {

/// Gated unrolled ADMM. Per layer t, starting from x = z = v = 0:
///   x = (A^H r + eta_t (z - v)) / (w_t + eta_t)                 eta_t = softplus(eta_raw_t)
///   c = soft_threshold(x + v, softplus(theta_raw_t))
///   g = sigmoid(Wg |z| + Ug |v| + bias)
///   z = g * c + (1 - g) * z
///   v = v + x - z
/// Returns the final z.
enum class GateMode {
    Gated,           // full model
    NoGate,          // z = c
    NoIterationLink  // z = g * c, previous z dropped
};

struct BFParams {
    std::size_t layers = 0;
    std::size_t grid = 0;
    bool per_layer_gates = false;
    GateMode mode = GateMode::Gated;
    std::vector<RVector> w;   // per layer, length G
    RVector eta_raw;          // per layer
    RVector theta_raw;        // per layer
    std::vector<RVector> wg;  // G*G row-major; one entry, or one per layer
    std::vector<RVector> ug;
    RVector gate_bias;        // length G

    void validate() const;
    double eta(std::size_t t) const;
    double theta(std::size_t t) const;
    std::size_t parameter_count() const;
};

inline constexpr double kInitEta = 1.0;
inline constexpr double kInitTheta = 0.1;
inline constexpr double kInitGateBias = 4.0;

BFParams bf_init(const SteeringDictionary& a, std::size_t layers = 10, bool per_layer_gates = false);

enum class Ablation { NoGate, NoIterationConnection };
Ablation parse_ablation(const std::string& name);
BFParams bf_ablate(BFParams params, Ablation which);

/// Blocks: for each layer w_t, eta_t, theta_t; then Wg (one or per layer), Ug (same), bias.
std::vector<ad::ParamBlock> to_blocks(const BFParams& p);
BFParams from_blocks(const BFParams& like, std::span<const ad::ParamBlock> blocks);

struct TapeOptions {
    double dropout = 0.0;
    Rng* rng = nullptr;
};

struct LayerTrace {
    RVector gate;  // empty when the gate is not used
    CVector z;
};

/// Records the forward pass. `ahr` is A^H r as a complex constant of length G.
ad::Var forward_on_tape(ad::Tape& tape, const BFParams& p, std::span<const ad::Var> leaves, ad::Var ahr,
                        const TapeOptions& opt = {}, std::vector<ad::Var>* gate_nodes = nullptr,
                        std::vector<ad::Var>* z_nodes = nullptr);

CVector bf_forward(const BFParams& p, const SteeringDictionary& a, std::span<const Complex> r,
                   std::vector<LayerTrace>* trace = nullptr);

/// Greedy peak picking on |spectrum|: largest local maximum first, suppress +/- min_separation
/// bins, stop after max_k peaks or when the next peak is below 10% of the global maximum.
std::vector<double> bf_estimate_angles(std::span<const Complex> spectrum, std::span<const double> grid,
                                       std::size_t max_k, std::size_t min_separation_bins);

}  // namespace rflego::bf
