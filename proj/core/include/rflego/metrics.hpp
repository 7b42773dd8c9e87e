#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rflego/baselines.hpp"
#include "rflego/lego_beamformer.hpp"
#include "rflego/lego_detector.hpp"
#include "rflego/lego_ft.hpp"
#include "rflego/synth.hpp"

namespace rflego::metrics {

/// Ceiling applied to PSLR values before averaging, since a spectrum without side lobes has
/// an infinite PSLR.
inline constexpr double kPslrCeilingDb = 60.0;

/// 20 log10(peak / largest sample outside +/- halfwidth bins of the peak). Returns +inf when
/// nothing nonzero remains outside the main lobe. With circular = true the exclusion wraps.
double pslr_db(std::span<const double> magnitude, std::size_t halfwidth = 3, bool circular = true);

/// 10 log10(max |s|^2 / mean |s|^2).
double papr_db(std::span<const double> magnitude);

std::size_t peak_bin(std::span<const double> magnitude);

/// Greedy peak picking: local maxima in decreasing order, each suppressing +/- min_separation
/// bins, at most max_k, stopping below floor_fraction of the global maximum.
std::vector<std::size_t> pick_peaks(std::span<const double> magnitude, std::size_t max_k, std::size_t min_separation,
                                    bool circular, double floor_fraction = 0.1);

/// Mean absolute error after greedy global nearest matching. Each truth is matched to at most
/// one estimate; unmatched truths cost max_error. If period > 0 distances wrap.
double mae(std::span<const double> estimates, std::span<const double> truths, double max_error, double period = 0.0);

struct DetectionCounts {
    std::uint64_t hits = 0;
    std::uint64_t targets = 0;
    std::uint64_t false_cells = 0;
    std::uint64_t noise_cells = 0;

    double dr() const { return targets ? static_cast<double>(hits) / static_cast<double>(targets) : 0.0; }
    double far() const {
        return noise_cells ? static_cast<double>(false_cells) / static_cast<double>(noise_cells) : 0.0;
    }
    DetectionCounts& operator+=(const DetectionCounts& o);
};

/// A truth is hit if any mask cell within +/- tolerance is set. Cells farther than tolerance from
/// every truth are noise cells; set noise cells are false alarms.
DetectionCounts count_detections(std::span<const std::uint8_t> mask, std::span<const int> truth_bins, int tolerance,
                                 bool circular = false);

struct DetectionMetrics {
    double dr = 0.0;
    double far = 0.0;
    int tolerance_bins = 1;
    DetectionCounts counts;
};

DetectionMetrics dr_far(std::span<const det::DetectionResult> results, std::span<const synth::LabeledFrame> frames,
                        int tolerance_bins = 1);

/// Scores at cells farther than tolerance from every truth bin.
std::vector<double> noise_cell_scores(std::span<const double> scores, std::span<const int> truth_bins, int tolerance,
                                      bool circular = false);

// ---------------------------------------------------------------------------
// cascade

enum class FrontKind { ClassicalFT, LegoFT, ClassicalBF, LegoBF };
enum class BackKind { ClassicalCfar, LegoDet };

FrontKind parse_front(const std::string& name);
BackKind parse_back(const std::string& name);
const char* front_name(FrontKind k) noexcept;
const char* back_name(BackKind k) noexcept;

struct CascadeModels {
    const ft::FTParams* ft = nullptr;
    const bf::BFParams* bf = nullptr;
    const SteeringDictionary* dictionary = nullptr;
    baselines::AdmmConfig admm{0.1, 1.0, 10};
    const det::SSMParams* det = nullptr;
    baselines::CfarConfig cfar{};
};

struct CascadeOptions {
    double target_far = 1e-3;
    int tolerance_bins = 1;
    double calibration_fraction = 0.5;  // leading share of frames used to set the threshold
    std::optional<double> inject_snr_db;
    std::uint64_t noise_seed = 7;
    int threads = 0;
};

struct CascadeResult {
    DetectionMetrics metrics;
    double threshold = 0.0;
    std::size_t calibration_frames = 0;
    std::size_t evaluation_frames = 0;
    std::size_t calibration_cells = 0;
};

/// Front-stage output for one frame: complex spectrum (FT: divided by sqrt(N)).
CVector front_output(FrontKind front, const CascadeModels& m, const synth::LabeledFrame& frame);

/// Back-stage scores on a magnitude profile.
RVector back_scores(BackKind back, const CascadeModels& m, std::span<const double> magnitude);

/// Runs front -> (optional interface noise) -> |.| -> back. The back-stage threshold is set on the
/// non-target cells of the calibration frames to hit target_far; DR/FAR are measured on the rest.
/// Splits frames into a leading calibration share and the rest, sets the score threshold from the
/// calibration frames' noise cells at target_far and counts detections (score > threshold) on the rest.
CascadeResult calibrated_detection(std::span<const RVector> scores, std::span<const synth::LabeledFrame> frames,
                                   const CascadeOptions& opt, bool circular);

CascadeResult cascade_eval(FrontKind front, BackKind back, const CascadeModels& m, const synth::Dataset& data,
                           const CascadeOptions& opt = {});

// ---------------------------------------------------------------------------
// per-module evaluation summaries

struct FtEval {
    double pslr_db = 0.0;  // mean of per-frame PSLR, each capped at kPslrCeilingDb
    double papr_db = 0.0;
    double mae_bins = 0.0;
    std::size_t frames = 0;
};

/// Evaluates spectra (|output| per frame) against FT frames. Peaks: K = number of truths,
/// min separation 2 bins, circular.
FtEval evaluate_ft_spectra(std::span<const RVector> magnitudes, std::span<const synth::LabeledFrame> frames);
FtEval evaluate_ft_classical(std::span<const synth::LabeledFrame> frames, int threads = 0);
FtEval evaluate_ft_lego(const ft::FTParams& p, std::span<const synth::LabeledFrame> frames, int threads = 0);

struct BfEval {
    double mae_deg = 0.0;
    std::size_t frames = 0;
};

inline constexpr std::size_t kBfMinSeparationBins = 3;

BfEval evaluate_bf_spectra(std::span<const CVector> spectra, const SteeringDictionary& a,
                           std::span<const synth::LabeledFrame> frames);
BfEval evaluate_bf_admm(const SteeringDictionary& a, const baselines::AdmmConfig& cfg,
                        std::span<const synth::LabeledFrame> frames, int threads = 0);
BfEval evaluate_bf_lego(const bf::BFParams& p, const SteeringDictionary& a, std::span<const synth::LabeledFrame> frames,
                        int threads = 0);

}  // namespace rflego::metrics
