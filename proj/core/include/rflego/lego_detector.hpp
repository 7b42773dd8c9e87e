#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rflego/autodiff.hpp"
#include "rflego/baselines.hpp"

namespace rflego::det {

/// One direction of the linear state-space scan
///   z_n = A z_{n-1} + B x_n,  out_n = C z_n + D x_n,  z_{-1} = 0.
/// The forward direction scans left to right, the backward direction right to left.
struct Direction {
    RVector a;  // L x L row-major
    RVector b;  // L
    RVector c;  // L
    double d = 0.0;
};

/// score = forward_out + backward_out, probability = sigmoid(beta * (score - threshold)).
struct SSMParams {
    std::size_t state = 0;  // L
    Direction fwd;
    Direction bwd;
    double beta_raw = 0.0;  // beta = softplus(beta_raw)
    double threshold = 0.0;
    bool freeze_state = false;  // A held fixed (identity-state ablation)
    bool linear_output = false; // no-activation ablation

    void validate() const;
    double beta() const;
};

inline constexpr double kInitBeta = 8.0;

/// Exact CA-CFAR at init: A is the lower shift, B = e1, C puts -scale/(2 train) on the taps at
/// distances guard+1 .. guard+train, D_fwd = 1, D_bwd = 0. State size L = guard + train + 1.
SSMParams det_init_from_cfar(const baselines::CfarConfig& cfg);

enum class Ablation { NoActivation, IdentityState };
Ablation parse_ablation(const std::string& name);
SSMParams det_ablate(SSMParams params, Ablation which);

struct DetectionResult {
    RVector scores;
    RVector probabilities;
    std::vector<std::uint8_t> mask;
};

/// Blocks: A_f, B_f, C_f, D_f, A_b, B_b, C_b, D_b, beta_raw, threshold.
std::vector<ad::ParamBlock> to_blocks(const SSMParams& p);
SSMParams from_blocks(const SSMParams& like, std::span<const ad::ParamBlock> blocks);

struct TapeOptions {
    double dropout = 0.0;
    Rng* rng = nullptr;
};

/// Impulse responses h_k = C A^k B, k = 0..length-1, for both directions (length-long real vectors).
struct Kernels {
    ad::Var fwd_states;  // length x L matrix of A^k B
    ad::Var bwd_states;
};

Kernels kernels_on_tape(ad::Tape& tape, const SSMParams& p, std::span<const ad::Var> leaves, std::size_t length);

/// Scores for one signal; the per-frame dropout (if any) acts on the readout vectors C.
ad::Var scores_on_tape(ad::Tape& tape, const SSMParams& p, std::span<const ad::Var> leaves, const Kernels& k,
                       std::span<const double> x, const TapeOptions& opt = {});

/// beta * (score - threshold); not available with linear_output.
ad::Var logits_on_tape(ad::Tape& tape, const SSMParams& p, std::span<const ad::Var> leaves, ad::Var scores);
/// Probabilities from scores; with linear_output the sigmoid is replaced by score - threshold + 0.5.
ad::Var probabilities_on_tape(ad::Tape& tape, const SSMParams& p, std::span<const ad::Var> leaves, ad::Var scores);

/// Direct recurrence, no tape. Used for inference.
RVector det_scores(const SSMParams& p, std::span<const double> x);
DetectionResult det_forward(const SSMParams& p, std::span<const double> x);

/// Bilinear map: Ad = (I - dt/2 A)^{-1} (I + dt/2 A), Bd = (I - dt/2 A)^{-1} dt B.
void det_discretize(std::span<const double> cont_a, std::span<const double> cont_b, std::size_t n, double dt,
                    RVector& disc_a, RVector& disc_b);

/// Threshold so that a fraction `target_far` of the given noise scores lies strictly above it.
double calibrate_from_scores(std::vector<double> scores, double target_far);

/// Sets p.threshold from noise-only signals and returns it. Needs at least 1e5 cells.
double det_calibrate_threshold(SSMParams& p, std::span<const RVector> noise_frames, double target_far);

inline constexpr std::size_t kMinCalibrationCells = 100000;

/// Spectral radius of a square row-major matrix.
double spectral_radius(std::span<const double> a, std::size_t n);

}  // namespace rflego::det
