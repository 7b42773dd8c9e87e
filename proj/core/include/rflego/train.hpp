#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rflego/autodiff.hpp"
#include "rflego/config.hpp"
#include "rflego/lego_beamformer.hpp"
#include "rflego/lego_detector.hpp"
#include "rflego/lego_ft.hpp"
#include "rflego/synth.hpp"

namespace rflego::train {

enum class LossKind { Cosine, Bce };

LossKind parse_loss(const std::string& name);
const char* loss_name(LossKind k) noexcept;

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    std::size_t batch_size = 512;
    double split = 0.8;
    double dropout = 0.2;
    std::size_t epochs = 50;
    std::uint64_t seed = 1;
    LossKind loss = LossKind::Cosine;
    /// Frames per tape inside a batch; gradients of the chunks are summed in order.
    std::size_t chunk_size = 32;
    int threads = 0;

    void validate() const;
    static TrainConfig for_module(synth::ModuleKind kind);
    static TrainConfig from_keyvalues(const KeyValues& kv, synth::ModuleKind kind);
    KeyValues to_keyvalues() const;
};

struct TrainHistory {
    std::string metric_name;
    double initial_val_loss = 0.0;
    double initial_val_metric = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_metric;
    std::size_t best_epoch = 0;  // 0 = initial parameters
    std::size_t skipped_steps = 0;
    std::vector<std::string> log;
    double wall_seconds = 0.0;

    std::size_t epochs() const noexcept { return train_loss.size(); }
    /// epoch,train_loss,val_loss,val_metric with round-trip precision; row 0 is the initial state.
    std::string to_csv() const;
};

// ---------------------------------------------------------------------------
// losses

double cosine_loss(std::span<const double> pred, std::span<const double> target);
double cosine_loss(std::span<const Complex> pred, std::span<const double> target);

inline constexpr double kProbabilityClip = 1e-7;

/// sum(w_i l_i) / sum(w_i) with w = positive_weight on mask cells and 1 elsewhere.
double bce_loss(std::span<const double> probabilities, std::span<const double> mask, double positive_weight = 1.0);

/// negatives / positives over the given masks; 1 when there are no positives.
double positive_weight(std::span<const synth::LabeledFrame> frames);

ad::Var cosine_loss_on_tape(ad::Tape& tape, ad::Var pred, std::span<const double> target);
/// Returns sum(w_i l_i) (unnormalized); divide by bce_weight_total for the mean.
ad::Var bce_sum_on_tape(ad::Tape& tape, ad::Var probabilities, std::span<const double> mask, double positive_weight);
/// Same sum for probabilities sigmoid(logits), evaluated as softplus terms with the logits clipped
/// to the range matching the probability clip.
ad::Var bce_logits_sum_on_tape(ad::Tape& tape, ad::Var logits, std::span<const double> mask, double positive_weight);
double bce_weight_total(std::span<const double> mask, double positive_weight);

// ---------------------------------------------------------------------------
// optimizer

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<RVector> m;
    std::vector<RVector> v;

    static AdamState for_blocks(std::span<const ad::ParamBlock> blocks);
};

/// AdamW: p <- p (1 - lr wd), then the bias-corrected adaptive step. Frozen blocks are untouched.
/// A non-finite gradient throws NumericError and leaves params and moments unchanged.
void optimizer_step(std::vector<ad::ParamBlock>& params, std::span<const RVector> grads, AdamState& state, double lr,
                    double weight_decay);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Seeded shuffle, first floor(split n) indices train (at least one frame on each side).
Split make_split(std::size_t n, double split, std::uint64_t seed);

// ---------------------------------------------------------------------------
// per-module losses as taped functions of the parameter blocks (no dropout)

ad::TapedFunction ft_loss_function(const ft::FTParams& like, std::span<const synth::LabeledFrame> frames);
ad::TapedFunction bf_loss_function(const bf::BFParams& like, const SteeringDictionary& a,
                                   std::span<const synth::LabeledFrame> frames);
ad::TapedFunction det_loss_function(const det::SSMParams& like, std::span<const synth::LabeledFrame> frames);

// ---------------------------------------------------------------------------
// gradient checks at reduced sizes (FT N = 64, beamformer G = 41, detector L = 6)

struct GradcheckCase {
    synth::ModuleKind module = synth::ModuleKind::FT;
    std::size_t perturbation = 0;  // 0 = init
    std::size_t parameters = 0;
    double max_rel_error = 0.0;
};

/// Central-difference check of the training loss at init and at `perturbations` random
/// perturbations of the init parameters.
std::vector<GradcheckCase> gradient_suite(synth::ModuleKind kind, std::uint64_t seed, double step,
                                          std::size_t perturbations, std::size_t frames = 2);

// ---------------------------------------------------------------------------
// training loops

template <class P>
struct TrainResult {
    P params;
    TrainHistory history;
};

TrainResult<ft::FTParams> train_ft(const ft::FTParams& init, const synth::Dataset& data, const TrainConfig& cfg);
TrainResult<bf::BFParams> train_bf(const bf::BFParams& init, const SteeringDictionary& a, const synth::Dataset& data,
                                   const TrainConfig& cfg);
TrainResult<det::SSMParams> train_det(const det::SSMParams& init, const synth::Dataset& data, const TrainConfig& cfg);

}  // namespace rflego::train
