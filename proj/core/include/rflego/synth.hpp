#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rflego/config.hpp"
#include "rflego/numerics.hpp"
#include "rflego/steering.hpp"

namespace rflego::synth {

enum class ModuleKind { FT, BF, DET };

const char* module_name(ModuleKind kind) noexcept;
/// Accepts ft, beamformer (bf), detector (det).
ModuleKind parse_module(const std::string& name);

struct SynthConfig {
    ModuleKind kind = ModuleKind::FT;
    std::size_t n_frames = 30000;
    std::uint64_t seed = 1;
    double snr_low_db = 5.0;
    double snr_high_db = 40.0;
    bool add_noise = true;

    // frequency transform
    std::size_t ft_n = 256;
    int ft_peaks_min = 1;
    int ft_peaks_max = 4;
    double ft_min_separation_bins = 4.0;
    double ft_amp_low = 0.3;
    double ft_amp_high = 1.0;

    // beamformer
    std::size_t bf_antennas = 8;
    double bf_grid_low_deg = -60.0;
    double bf_grid_high_deg = 60.0;
    double bf_grid_step_deg = 1.0;
    int bf_sources_min = 1;
    int bf_sources_max = 3;
    double bf_min_separation_deg = 10.0;

    // detector
    std::size_t det_length = 128;
    int det_peaks_min = 1;
    int det_peaks_max = 5;
    int det_width_min = 3;
    int det_width_max = 11;

    void validate() const;

    static SynthConfig defaults(ModuleKind kind);
    static SynthConfig from_keyvalues(const KeyValues& kv);
    KeyValues to_keyvalues() const;
};

/// One synthetic sample.
///  - FT:  input_c is the noisy time signal (length N); target is the clean on-grid magnitude
///         spectrum normalized to max 1; truth holds fractional peak bins, truth_bins the rounded bins.
///  - BF:  input_c is the array snapshot (length M); target is the sparse magnitude vector on the
///         grid; truth holds source angles in degrees, truth_bins the nearest grid bins.
///  - DET: input_r is the real signal; target is the 0/1 apex mask; truth/truth_bins hold apex indices.
struct LabeledFrame {
    CVector input_c;
    RVector input_r;
    RVector target;
    double snr_db = 0.0;
    double signal_power = 0.0;
    double noise_variance = 0.0;
    RVector truth;
    std::vector<int> truth_bins;
};

struct Dataset {
    SynthConfig config;
    std::vector<LabeledFrame> frames;
};

SteeringDictionary dictionary_for(const SynthConfig& cfg);

Dataset gen_ft_dataset(const SynthConfig& cfg);
Dataset gen_bf_dataset(const SynthConfig& cfg, const SteeringDictionary& a);
Dataset gen_det_dataset(const SynthConfig& cfg);
Dataset generate(const SynthConfig& cfg);

/// Single-frame builders with explicit ground truth, used by tests and oracles.
/// noise_seed selects the noise realization; snr_db is ignored when add_noise is false.
LabeledFrame ft_frame_from_peaks(std::size_t n, std::span<const double> bins, std::span<const Complex> amplitudes,
                                 double snr_db, bool add_noise, std::uint64_t noise_seed);
LabeledFrame bf_frame_from_sources(const SteeringDictionary& a, std::span<const double> angles_deg,
                                   std::span<const Complex> amplitudes, double snr_db, bool add_noise,
                                   std::uint64_t noise_seed);

enum class PeakShape { Hann, Hamming };

/// Envelope value at offset d from the apex for a peak of the given width; zero for |d| >= width/2.
double peak_envelope(PeakShape shape, int width, int d);

LabeledFrame det_frame_from_peaks(std::size_t length, std::span<const int> apexes, std::span<const int> widths,
                                  std::span<const PeakShape> shapes, double snr_db, bool add_noise,
                                  std::uint64_t noise_seed);

/// Signal power over noise variance as constructed, in dB.
double constructed_snr_db(const LabeledFrame& frame, ModuleKind kind);

}  // namespace rflego::synth
