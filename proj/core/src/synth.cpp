#include "rflego/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "rflego/errors.hpp"
#include "rflego/parallel.hpp"
#include "rflego/random.hpp"

namespace rflego::synth {

namespace {

constexpr std::uint64_t kFrameStream = 0x5f7e11;

double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

Complex unit_phasor(Rng& rng) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double p = phase(rng);
    return {std::cos(p), std::sin(p)};
}

// circularly proper complex Gaussian with E|n|^2 = variance
Complex complex_gaussian(Rng& rng, double variance) {
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

double circular_distance(double a, double b, double n) {
    const double d = std::fmod(std::abs(a - b), n);
    return std::min(d, n - d);
}

template <class Make>
Dataset generate_frames(const SynthConfig& cfg, Make make) {
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.frames.resize(cfg.n_frames);
    parallel_for(cfg.n_frames, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, kFrameStream, i));
        ds.frames[i] = make(rng);
    });
    return ds;
}

}  // namespace

const char* module_name(ModuleKind kind) noexcept {
    switch (kind) {
        case ModuleKind::FT: return "ft";
        case ModuleKind::BF: return "beamformer";
        case ModuleKind::DET: return "detector";
    }
    return "?";
}

ModuleKind parse_module(const std::string& name) {
    if (name == "ft") return ModuleKind::FT;
    if (name == "beamformer" || name == "bf") return ModuleKind::BF;
    if (name == "detector" || name == "det") return ModuleKind::DET;
    throw DataError("unknown module '" + name + "' (expected ft, beamformer or detector)");
}

void SynthConfig::validate() const {
    if (!(snr_low_db <= snr_high_db)) throw DataError("synth: snr_low_db must not exceed snr_high_db");
    switch (kind) {
        case ModuleKind::FT:
            if (ft_n < 16) throw DataError("synth: ft_n must be at least 16");
            if (ft_peaks_min < 0 || ft_peaks_min > ft_peaks_max) throw DataError("synth: bad ft peak range");
            if (!(ft_amp_low > 0.0) || ft_amp_low > ft_amp_high) throw DataError("synth: bad ft amplitude range");
            if (ft_min_separation_bins * ft_peaks_max > static_cast<double>(ft_n)) {
                throw DataError("synth: ft peaks cannot be separated within N bins");
            }
            break;
        case ModuleKind::BF:
            if (bf_antennas < 2) throw DataError("synth: bf_antennas must be at least 2");
            if (bf_sources_min < 0 || bf_sources_min > bf_sources_max) throw DataError("synth: bad source range");
            if (!(bf_grid_step_deg > 0.0) || bf_grid_low_deg > bf_grid_high_deg) throw DataError("synth: bad grid");
            if (bf_min_separation_deg * (bf_sources_max - 1) > bf_grid_high_deg - bf_grid_low_deg) {
                throw DataError("synth: sources cannot be separated within the grid span");
            }
            break;
        case ModuleKind::DET:
            if (det_length < 32) throw DataError("synth: det_length must be at least 32");
            if (det_peaks_min < 0 || det_peaks_min > det_peaks_max) throw DataError("synth: bad peak range");
            if (det_width_min < 1 || det_width_min > det_width_max) throw DataError("synth: bad width range");
            if (static_cast<std::size_t>(det_width_max * (det_peaks_max + 1)) > det_length) {
                throw DataError("synth: peaks cannot be separated within det_length");
            }
            break;
    }
}

SynthConfig SynthConfig::defaults(ModuleKind kind) {
    SynthConfig c;
    c.kind = kind;
    return c;
}

SynthConfig SynthConfig::from_keyvalues(const KeyValues& kv) {
    SynthConfig c = defaults(parse_module(kv.get("module", "ft")));
    c.n_frames = static_cast<std::size_t>(kv.get_int("n_frames", static_cast<long long>(c.n_frames)));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.snr_low_db = kv.get_double("snr_low_db", c.snr_low_db);
    c.snr_high_db = kv.get_double("snr_high_db", c.snr_high_db);
    c.add_noise = kv.get_bool("add_noise", c.add_noise);
    c.ft_n = static_cast<std::size_t>(kv.get_int("ft_n", static_cast<long long>(c.ft_n)));
    c.ft_peaks_min = static_cast<int>(kv.get_int("ft_peaks_min", c.ft_peaks_min));
    c.ft_peaks_max = static_cast<int>(kv.get_int("ft_peaks_max", c.ft_peaks_max));
    c.ft_min_separation_bins = kv.get_double("ft_min_separation_bins", c.ft_min_separation_bins);
    c.ft_amp_low = kv.get_double("ft_amp_low", c.ft_amp_low);
    c.ft_amp_high = kv.get_double("ft_amp_high", c.ft_amp_high);
    c.bf_antennas = static_cast<std::size_t>(kv.get_int("bf_antennas", static_cast<long long>(c.bf_antennas)));
    c.bf_grid_low_deg = kv.get_double("bf_grid_low_deg", c.bf_grid_low_deg);
    c.bf_grid_high_deg = kv.get_double("bf_grid_high_deg", c.bf_grid_high_deg);
    c.bf_grid_step_deg = kv.get_double("bf_grid_step_deg", c.bf_grid_step_deg);
    c.bf_sources_min = static_cast<int>(kv.get_int("bf_sources_min", c.bf_sources_min));
    c.bf_sources_max = static_cast<int>(kv.get_int("bf_sources_max", c.bf_sources_max));
    c.bf_min_separation_deg = kv.get_double("bf_min_separation_deg", c.bf_min_separation_deg);
    c.det_length = static_cast<std::size_t>(kv.get_int("det_length", static_cast<long long>(c.det_length)));
    c.det_peaks_min = static_cast<int>(kv.get_int("det_peaks_min", c.det_peaks_min));
    c.det_peaks_max = static_cast<int>(kv.get_int("det_peaks_max", c.det_peaks_max));
    c.det_width_min = static_cast<int>(kv.get_int("det_width_min", c.det_width_min));
    c.det_width_max = static_cast<int>(kv.get_int("det_width_max", c.det_width_max));
    c.validate();
    return c;
}

KeyValues SynthConfig::to_keyvalues() const {
    KeyValues kv;
    auto num = [](double v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    };
    kv.set("version", std::to_string(KeyValues::kConfigVersion));
    kv.set("module", module_name(kind));
    kv.set("n_frames", std::to_string(n_frames));
    kv.set("seed", std::to_string(seed));
    kv.set("snr_low_db", num(snr_low_db));
    kv.set("snr_high_db", num(snr_high_db));
    kv.set("add_noise", add_noise ? "true" : "false");
    switch (kind) {
        case ModuleKind::FT:
            kv.set("ft_n", std::to_string(ft_n));
            kv.set("ft_peaks_min", std::to_string(ft_peaks_min));
            kv.set("ft_peaks_max", std::to_string(ft_peaks_max));
            kv.set("ft_min_separation_bins", num(ft_min_separation_bins));
            kv.set("ft_amp_low", num(ft_amp_low));
            kv.set("ft_amp_high", num(ft_amp_high));
            break;
        case ModuleKind::BF:
            kv.set("bf_antennas", std::to_string(bf_antennas));
            kv.set("bf_grid_low_deg", num(bf_grid_low_deg));
            kv.set("bf_grid_high_deg", num(bf_grid_high_deg));
            kv.set("bf_grid_step_deg", num(bf_grid_step_deg));
            kv.set("bf_sources_min", std::to_string(bf_sources_min));
            kv.set("bf_sources_max", std::to_string(bf_sources_max));
            kv.set("bf_min_separation_deg", num(bf_min_separation_deg));
            break;
        case ModuleKind::DET:
            kv.set("det_length", std::to_string(det_length));
            kv.set("det_peaks_min", std::to_string(det_peaks_min));
            kv.set("det_peaks_max", std::to_string(det_peaks_max));
            kv.set("det_width_min", std::to_string(det_width_min));
            kv.set("det_width_max", std::to_string(det_width_max));
            break;
    }
    return kv;
}

SteeringDictionary dictionary_for(const SynthConfig& cfg) {
    return make_steering_dictionary(cfg.bf_antennas, cfg.bf_grid_low_deg, cfg.bf_grid_high_deg, cfg.bf_grid_step_deg);
}

// ---------------------------------------------------------------------------
// frequency transform

LabeledFrame ft_frame_from_peaks(std::size_t n, std::span<const double> bins, std::span<const Complex> amplitudes,
                                 double snr_db, bool add_noise, std::uint64_t noise_seed) {
    if (bins.size() != amplitudes.size()) {
        throw DimensionError("ft_frame_from_peaks: bins and amplitudes differ in length");
    }
    LabeledFrame f;
    f.snr_db = snr_db;
    CVector s(n, Complex{});
    for (std::size_t p = 0; p < bins.size(); ++p) {
        for (std::size_t m = 0; m < n; ++m) {
            // phase reduced modulo 2*pi through the bin*m product mod N
            const double cycles = std::fmod(bins[p] * static_cast<double>(m), static_cast<double>(n));
            const double angle = 2.0 * std::numbers::pi * cycles / static_cast<double>(n);
            s[m] += amplitudes[p] * Complex{std::cos(angle), std::sin(angle)};
        }
    }
    double power = 0.0;
    for (const auto& v : s) power += std::norm(v);
    power /= static_cast<double>(n);

    double gain = 1.0;
    if (add_noise && power > 0.0) {
        // unit noise variance; signal scaled to the requested SNR
        gain = std::sqrt(db_to_power(snr_db) / power);
        f.noise_variance = 1.0;
    }
    f.signal_power = power * gain * gain;

    f.input_c.resize(n);
    Rng rng(noise_seed);
    for (std::size_t m = 0; m < n; ++m) {
        f.input_c[m] = s[m] * gain;
        if (add_noise) f.input_c[m] += complex_gaussian(rng, 1.0);
    }

    f.target.assign(n, 0.0);
    for (std::size_t p = 0; p < bins.size(); ++p) {
        const auto nn = static_cast<long long>(n);
        const long long rounded = static_cast<long long>(std::llround(bins[p]));
        const auto k = static_cast<std::size_t>(((rounded % nn) + nn) % nn);
        f.target[k] = std::max(f.target[k], std::abs(amplitudes[p]) * gain);
        f.truth.push_back(bins[p]);
        f.truth_bins.push_back(static_cast<int>(k));
    }
    const double peak = *std::max_element(f.target.begin(), f.target.end());
    if (peak > 0.0) {
        for (auto& v : f.target) v /= peak;
    }
    return f;
}

Dataset gen_ft_dataset(const SynthConfig& cfg) {
    if (cfg.kind != ModuleKind::FT) throw DataError("gen_ft_dataset: config is not for the ft module");
    return generate_frames(cfg, [&cfg](Rng& rng) {
        const auto n = static_cast<double>(cfg.ft_n);
        std::uniform_int_distribution<int> count(cfg.ft_peaks_min, cfg.ft_peaks_max);
        std::uniform_real_distribution<double> pos(0.0, n);
        std::uniform_real_distribution<double> mag(cfg.ft_amp_low, cfg.ft_amp_high);
        std::uniform_real_distribution<double> snr(cfg.snr_low_db, cfg.snr_high_db);
        const int k = count(rng);
        std::vector<double> bins;
        CVector amps;
        while (static_cast<int>(bins.size()) < k) {
            const double b = pos(rng);
            const bool ok = std::all_of(bins.begin(), bins.end(), [&](double other) {
                return circular_distance(b, other, n) >= cfg.ft_min_separation_bins;
            });
            if (ok) bins.push_back(b);
        }
        for (int p = 0; p < k; ++p) amps.push_back(mag(rng) * unit_phasor(rng));
        const double s = snr(rng);
        return ft_frame_from_peaks(cfg.ft_n, bins, amps, s, cfg.add_noise, rng());
    });
}

// ---------------------------------------------------------------------------
// beamformer

LabeledFrame bf_frame_from_sources(const SteeringDictionary& a, std::span<const double> angles_deg,
                                   std::span<const Complex> amplitudes, double snr_db, bool add_noise,
                                   std::uint64_t noise_seed) {
    if (angles_deg.size() != amplitudes.size()) {
        throw DimensionError("bf_frame_from_sources: angles and amplitudes differ in length");
    }
    const std::size_t m = a.antennas;
    LabeledFrame f;
    f.snr_db = snr_db;
    CVector clean(m, Complex{});
    for (std::size_t k = 0; k < angles_deg.size(); ++k) {
        const CVector sv = a.steering(angles_deg[k]);
        for (std::size_t i = 0; i < m; ++i) clean[i] += amplitudes[k] * sv[i];
    }
    double power = 0.0;
    for (const auto& v : clean) power += std::norm(v);
    power /= static_cast<double>(m);
    f.signal_power = power;

    f.input_c = clean;
    if (add_noise && power > 0.0) {
        f.noise_variance = power / db_to_power(snr_db);
        Rng rng(noise_seed);
        for (auto& v : f.input_c) v += complex_gaussian(rng, f.noise_variance);
    }

    f.target.assign(a.grid_size(), 0.0);
    for (std::size_t k = 0; k < angles_deg.size(); ++k) {
        const std::size_t bin = a.nearest_bin(angles_deg[k]);
        f.target[bin] = std::max(f.target[bin], std::abs(amplitudes[k]));
        f.truth.push_back(angles_deg[k]);
        f.truth_bins.push_back(static_cast<int>(bin));
    }
    return f;
}

Dataset gen_bf_dataset(const SynthConfig& cfg, const SteeringDictionary& a) {
    if (cfg.kind != ModuleKind::BF) throw DataError("gen_bf_dataset: config is not for the beamformer module");
    if (a.antennas != cfg.bf_antennas) throw DimensionError("gen_bf_dataset: dictionary does not match config");
    return generate_frames(cfg, [&cfg, &a](Rng& rng) {
        std::uniform_int_distribution<int> count(cfg.bf_sources_min, cfg.bf_sources_max);
        std::uniform_real_distribution<double> angle(cfg.bf_grid_low_deg, cfg.bf_grid_high_deg);
        std::uniform_real_distribution<double> mag(0.5, 1.5);
        std::uniform_real_distribution<double> snr(cfg.snr_low_db, cfg.snr_high_db);
        const int k = count(rng);
        std::vector<double> angles;
        while (static_cast<int>(angles.size()) < k) {
            const double t = angle(rng);
            const bool ok = std::all_of(angles.begin(), angles.end(), [&](double other) {
                return std::abs(t - other) >= cfg.bf_min_separation_deg;
            });
            if (ok) angles.push_back(t);
        }
        CVector amps;
        for (int p = 0; p < k; ++p) amps.push_back(mag(rng) * unit_phasor(rng));
        const double s = snr(rng);
        return bf_frame_from_sources(a, angles, amps, s, cfg.add_noise, rng());
    });
}

// ---------------------------------------------------------------------------
// detector

double peak_envelope(PeakShape shape, int width, int d) {
    const double half = 0.5 * static_cast<double>(width);
    const double ad = std::abs(static_cast<double>(d));
    if (ad >= half) return 0.0;
    const double c = std::cos(std::numbers::pi * ad / half);
    return shape == PeakShape::Hann ? 0.5 + 0.5 * c : 0.54 + 0.46 * c;
}

LabeledFrame det_frame_from_peaks(std::size_t length, std::span<const int> apexes, std::span<const int> widths,
                                  std::span<const PeakShape> shapes, double snr_db, bool add_noise,
                                  std::uint64_t noise_seed) {
    if (apexes.size() != widths.size() || apexes.size() != shapes.size()) {
        throw DimensionError("det_frame_from_peaks: peak descriptions differ in length");
    }
    LabeledFrame f;
    f.snr_db = snr_db;
    f.input_r.assign(length, 0.0);
    f.target.assign(length, 0.0);
    const double amplitude = std::sqrt(db_to_power(snr_db));
    for (std::size_t p = 0; p < apexes.size(); ++p) {
        const int apex = apexes[p];
        if (apex < 0 || static_cast<std::size_t>(apex) >= length) {
            throw DimensionError("det_frame_from_peaks: apex outside the frame");
        }
        const int reach = widths[p] / 2 + 1;
        for (int d = -reach; d <= reach; ++d) {
            const int i = apex + d;
            if (i < 0 || static_cast<std::size_t>(i) >= length) continue;
            f.input_r[static_cast<std::size_t>(i)] += amplitude * peak_envelope(shapes[p], widths[p], d);
        }
        f.target[static_cast<std::size_t>(apex)] = 1.0;
        f.truth.push_back(apex);
        f.truth_bins.push_back(apex);
    }
    f.signal_power = apexes.empty() ? 0.0 : amplitude * amplitude;
    if (add_noise) {
        f.noise_variance = 1.0;
        Rng rng(noise_seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (auto& v : f.input_r) v += nd(rng);
    }
    return f;
}

Dataset gen_det_dataset(const SynthConfig& cfg) {
    if (cfg.kind != ModuleKind::DET) throw DataError("gen_det_dataset: config is not for the detector module");
    return generate_frames(cfg, [&cfg](Rng& rng) {
        std::uniform_int_distribution<int> count(cfg.det_peaks_min, cfg.det_peaks_max);
        std::uniform_int_distribution<int> width(cfg.det_width_min, cfg.det_width_max);
        std::bernoulli_distribution hann(0.5);
        std::uniform_real_distribution<double> snr(cfg.snr_low_db, cfg.snr_high_db);
        const int k = count(rng);
        std::vector<int> apexes, widths;
        std::vector<PeakShape> shapes;
        const int len = static_cast<int>(cfg.det_length);
        while (static_cast<int>(apexes.size()) < k) {
            const int w = width(rng);
            const int half = w / 2;
            std::uniform_int_distribution<int> pos(half, len - 1 - half);
            const int a = pos(rng);
            bool ok = true;
            for (std::size_t q = 0; q < apexes.size(); ++q) {
                if (std::abs(a - apexes[q]) < std::max(w, widths[q])) ok = false;
            }
            if (!ok) continue;
            apexes.push_back(a);
            widths.push_back(w);
            shapes.push_back(hann(rng) ? PeakShape::Hann : PeakShape::Hamming);
        }
        const double s = snr(rng);
        return det_frame_from_peaks(cfg.det_length, apexes, widths, shapes, s, cfg.add_noise, rng());
    });
}

Dataset generate(const SynthConfig& cfg) {
    switch (cfg.kind) {
        case ModuleKind::FT: return gen_ft_dataset(cfg);
        case ModuleKind::BF: return gen_bf_dataset(cfg, dictionary_for(cfg));
        case ModuleKind::DET: return gen_det_dataset(cfg);
    }
    throw CapabilityError("generate: unknown module");
}

double constructed_snr_db(const LabeledFrame& frame, ModuleKind) {
    if (!(frame.noise_variance > 0.0) || !(frame.signal_power > 0.0)) {
        throw DataError("constructed_snr_db: frame has no noise or no signal");
    }
    return 10.0 * std::log10(frame.signal_power / frame.noise_variance);
}

}  // namespace rflego::synth
