#include "rflego/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "rflego/errors.hpp"
#include "rflego/parallel.hpp"
#include "rflego/random.hpp"

namespace rflego::metrics {

namespace {

void require_nonzero(std::span<const double> m, const char* what) {
    if (m.empty() || std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; })) {
        throw DataError(std::string(what) + ": spectrum is all zero");
    }
}

std::size_t bin_distance(std::size_t a, std::size_t b, std::size_t n, bool circular) {
    const std::size_t d = a > b ? a - b : b - a;
    return circular ? std::min(d, n - d) : d;
}

}  // namespace

double pslr_db(std::span<const double> magnitude, std::size_t halfwidth, bool circular) {
    require_nonzero(magnitude, "pslr");
    const std::size_t n = magnitude.size();
    const std::size_t peak = peak_bin(magnitude);
    double side = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (bin_distance(i, peak, n, circular) <= halfwidth) continue;
        side = std::max(side, magnitude[i]);
    }
    if (side == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(magnitude[peak] / side);
}

double papr_db(std::span<const double> magnitude) {
    require_nonzero(magnitude, "papr");
    double peak = 0.0, mean = 0.0;
    for (double v : magnitude) {
        peak = std::max(peak, v * v);
        mean += v * v;
    }
    mean /= static_cast<double>(magnitude.size());
    return 10.0 * std::log10(peak / mean);
}

std::size_t peak_bin(std::span<const double> magnitude) {
    if (magnitude.empty()) throw DataError("peak_bin: empty spectrum");
    return static_cast<std::size_t>(std::max_element(magnitude.begin(), magnitude.end()) - magnitude.begin());
}

std::vector<std::size_t> pick_peaks(std::span<const double> magnitude, std::size_t max_k, std::size_t min_separation,
                                    bool circular, double floor_fraction) {
    const std::size_t n = magnitude.size();
    std::vector<std::size_t> chosen;
    if (n == 0 || max_k == 0) return chosen;
    const double global = *std::max_element(magnitude.begin(), magnitude.end());
    if (!(global > 0.0)) return chosen;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        const double left = (i > 0) ? magnitude[i - 1] : (circular ? magnitude[n - 1] : -1.0);
        const double right = (i + 1 < n) ? magnitude[i + 1] : (circular ? magnitude[0] : -1.0);
        if (magnitude[i] > 0.0 && magnitude[i] >= left && magnitude[i] >= right) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return magnitude[a] > magnitude[b]; });
    for (std::size_t c : candidates) {
        if (chosen.size() >= max_k || magnitude[c] < floor_fraction * global) break;
        const bool clear = std::all_of(chosen.begin(), chosen.end(),
                                       [&](std::size_t q) { return bin_distance(c, q, n, circular) > min_separation; });
        if (clear) chosen.push_back(c);
    }
    return chosen;
}

double mae(std::span<const double> estimates, std::span<const double> truths, double max_error, double period) {
    if (truths.empty()) throw DataError("mae: empty truth set");
    auto dist = [period](double a, double b) {
        double d = std::abs(a - b);
        if (period > 0.0) {
            d = std::fmod(d, period);
            d = std::min(d, period - d);
        }
        return d;
    };
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        for (std::size_t j = 0; j < truths.size(); ++j) pairs.emplace_back(dist(estimates[i], truths[j]), i, j);
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> est_used(estimates.size(), false), truth_used(truths.size(), false);
    double total = 0.0;
    std::size_t matched = 0;
    for (const auto& [d, i, j] : pairs) {
        if (est_used[i] || truth_used[j]) continue;
        est_used[i] = truth_used[j] = true;
        total += std::min(d, max_error);
        ++matched;
    }
    total += max_error * static_cast<double>(truths.size() - matched);
    return total / static_cast<double>(truths.size());
}

DetectionCounts& DetectionCounts::operator+=(const DetectionCounts& o) {
    hits += o.hits;
    targets += o.targets;
    false_cells += o.false_cells;
    noise_cells += o.noise_cells;
    return *this;
}

DetectionCounts count_detections(std::span<const std::uint8_t> mask, std::span<const int> truth_bins, int tolerance,
                                 bool circular) {
    const std::size_t n = mask.size();
    DetectionCounts c;
    std::vector<bool> near(n, false);
    for (int t : truth_bins) {
        if (t < 0 || static_cast<std::size_t>(t) >= n) throw DimensionError("count_detections: truth outside frame");
        bool hit = false;
        for (int d = -tolerance; d <= tolerance; ++d) {
            long long i = t + d;
            if (circular) {
                i = ((i % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n);
            } else if (i < 0 || i >= static_cast<long long>(n)) {
                continue;
            }
            near[static_cast<std::size_t>(i)] = true;
            if (mask[static_cast<std::size_t>(i)]) hit = true;
        }
        ++c.targets;
        if (hit) ++c.hits;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (near[i]) continue;
        ++c.noise_cells;
        if (mask[i]) ++c.false_cells;
    }
    return c;
}

DetectionMetrics dr_far(std::span<const det::DetectionResult> results, std::span<const synth::LabeledFrame> frames,
                        int tolerance_bins) {
    if (results.size() != frames.size()) {
        throw DimensionError("dr_far: " + std::to_string(results.size()) + " results for " +
                             std::to_string(frames.size()) + " frames");
    }
    DetectionMetrics m;
    m.tolerance_bins = tolerance_bins;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        m.counts += count_detections(results[i].mask, frames[i].truth_bins, tolerance_bins);
    }
    m.dr = m.counts.dr();
    m.far = m.counts.far();
    return m;
}

std::vector<double> noise_cell_scores(std::span<const double> scores, std::span<const int> truth_bins, int tolerance,
                                      bool circular) {
    const std::size_t n = scores.size();
    std::vector<bool> near(n, false);
    for (int t : truth_bins) {
        for (int d = -tolerance; d <= tolerance; ++d) {
            long long i = t + d;
            if (circular) {
                i = ((i % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n);
            } else if (i < 0 || i >= static_cast<long long>(n)) {
                continue;
            }
            near[static_cast<std::size_t>(i)] = true;
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!near[i]) out.push_back(scores[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// cascade

FrontKind parse_front(const std::string& name) {
    if (name == "classical_ft") return FrontKind::ClassicalFT;
    if (name == "lego_ft") return FrontKind::LegoFT;
    if (name == "classical_bf") return FrontKind::ClassicalBF;
    if (name == "lego_bf") return FrontKind::LegoBF;
    throw DataError("unknown front stage '" + name + "'");
}

BackKind parse_back(const std::string& name) {
    if (name == "classical_cfar") return BackKind::ClassicalCfar;
    if (name == "lego_det") return BackKind::LegoDet;
    throw DataError("unknown back stage '" + name + "'");
}

const char* front_name(FrontKind k) noexcept {
    switch (k) {
        case FrontKind::ClassicalFT: return "classical_ft";
        case FrontKind::LegoFT: return "lego_ft";
        case FrontKind::ClassicalBF: return "classical_bf";
        case FrontKind::LegoBF: return "lego_bf";
    }
    return "?";
}

const char* back_name(BackKind k) noexcept {
    return k == BackKind::ClassicalCfar ? "classical_cfar" : "lego_det";
}

namespace {

bool is_ft(FrontKind k) { return k == FrontKind::ClassicalFT || k == FrontKind::LegoFT; }

}  // namespace

CVector front_output(FrontKind front, const CascadeModels& m, const synth::LabeledFrame& frame) {
    switch (front) {
        case FrontKind::ClassicalFT:
        case FrontKind::LegoFT: {
            CVector y;
            if (front == FrontKind::ClassicalFT) {
                y = baselines::dft(frame.input_c);
            } else {
                if (m.ft == nullptr) throw DataError("cascade: lego_ft front needs FT params");
                y = ft::ft_forward(*m.ft, frame.input_c);
            }
            const double scale = 1.0 / std::sqrt(static_cast<double>(y.size()));
            for (auto& v : y) v *= scale;
            return y;
        }
        case FrontKind::ClassicalBF:
            if (m.dictionary == nullptr) throw DataError("cascade: beamformer front needs a dictionary");
            return baselines::admm_lasso(frame.input_c, *m.dictionary, m.admm);
        case FrontKind::LegoBF:
            if (m.dictionary == nullptr || m.bf == nullptr) {
                throw DataError("cascade: lego_bf front needs params and a dictionary");
            }
            return bf::bf_forward(*m.bf, *m.dictionary, frame.input_c);
    }
    throw CapabilityError("cascade: unknown front stage");
}

RVector back_scores(BackKind back, const CascadeModels& m, std::span<const double> magnitude) {
    if (back == BackKind::ClassicalCfar) {
        return baselines::cfar(magnitude, m.cfar).scores;
    }
    if (m.det == nullptr) throw DataError("cascade: lego_det back stage needs detector params");
    return det::det_scores(*m.det, magnitude);
}

CascadeResult calibrated_detection(std::span<const RVector> scores, std::span<const synth::LabeledFrame> frames,
                                   const CascadeOptions& opt, bool circular) {
    if (scores.size() != frames.size()) throw DimensionError("calibrated_detection: scores/frames count mismatch");
    const std::size_t n = frames.size();
    const auto n_cal = static_cast<std::size_t>(std::floor(opt.calibration_fraction * static_cast<double>(n)));
    if (n_cal == 0 || n_cal >= n) throw DataError("calibration split leaves no frames on one side");
    std::vector<double> cal;
    for (std::size_t i = 0; i < n_cal; ++i) {
        const auto s = noise_cell_scores(scores[i], frames[i].truth_bins, opt.tolerance_bins, circular);
        cal.insert(cal.end(), s.begin(), s.end());
    }
    CascadeResult res;
    res.calibration_frames = n_cal;
    res.evaluation_frames = n - n_cal;
    res.calibration_cells = cal.size();
    if (cal.size() < det::kMinCalibrationCells) {
        throw DataError("only " + std::to_string(cal.size()) + " calibration cells, need " +
                        std::to_string(det::kMinCalibrationCells));
    }
    res.threshold = det::calibrate_from_scores(std::move(cal), opt.target_far);
    DetectionCounts counts;
    for (std::size_t i = n_cal; i < n; ++i) {
        std::vector<std::uint8_t> mask(scores[i].size());
        for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = scores[i][k] > res.threshold ? 1 : 0;
        counts += count_detections(mask, frames[i].truth_bins, opt.tolerance_bins, circular);
    }
    res.metrics.counts = counts;
    res.metrics.dr = counts.dr();
    res.metrics.far = counts.far();
    res.metrics.tolerance_bins = opt.tolerance_bins;
    return res;
}

CascadeResult cascade_eval(FrontKind front, BackKind back, const CascadeModels& m, const synth::Dataset& data,
                           const CascadeOptions& opt) {
    const bool ft_front = is_ft(front);
    const bool ft_data = data.config.kind == synth::ModuleKind::FT;
    const bool bf_data = data.config.kind == synth::ModuleKind::BF;
    if ((ft_front && !ft_data) || (!ft_front && !bf_data)) {
        throw DimensionError(std::string("cascade: front stage ") + front_name(front) +
                             " does not accept a " + synth::module_name(data.config.kind) + " dataset");
    }
    const std::size_t n = data.frames.size();

    std::vector<RVector> scores(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            CVector y = front_output(front, m, data.frames[i]);
            if (opt.inject_snr_db) {
                double power = 0.0;
                for (const auto& v : y) power += std::norm(v);
                power /= static_cast<double>(y.size());
                const double sigma = std::sqrt(power / std::pow(10.0, *opt.inject_snr_db / 10.0) / 2.0);
                Rng rng(derive_seed(opt.noise_seed, 0xca5cade, i));
                std::normal_distribution<double> nd(0.0, sigma);
                for (auto& v : y) {
                    const double re = nd(rng);
                    const double im = nd(rng);
                    v += Complex{re, im};
                }
            }
            const RVector mag = numerics::magnitude(y);
            scores[i] = back_scores(back, m, mag);
        },
        opt.threads);

    return calibrated_detection(scores, data.frames, opt, ft_front);
}

// ---------------------------------------------------------------------------
// module evaluation

FtEval evaluate_ft_spectra(std::span<const RVector> magnitudes, std::span<const synth::LabeledFrame> frames) {
    if (magnitudes.size() != frames.size()) throw DimensionError("evaluate_ft: spectra/frames count mismatch");
    FtEval e;
    e.frames = frames.size();
    if (frames.empty()) return e;
    double pslr_sum = 0.0, papr_sum = 0.0, err_sum = 0.0;
    std::size_t truths = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const RVector& mag = magnitudes[i];
        const auto n = static_cast<double>(mag.size());
        const bool silent = std::all_of(mag.begin(), mag.end(), [](double v) { return v == 0.0; });
        pslr_sum += silent ? 0.0 : std::min(pslr_db(mag, 3, true), kPslrCeilingDb);
        papr_sum += silent ? 0.0 : papr_db(mag);
        const std::vector<double> truth(frames[i].truth_bins.begin(), frames[i].truth_bins.end());
        if (truth.empty()) continue;
        const auto peaks = pick_peaks(mag, truth.size(), 2, true);
        std::vector<double> est(peaks.begin(), peaks.end());
        err_sum += mae(est, truth, n / 2.0, n) * static_cast<double>(truth.size());
        truths += truth.size();
    }
    e.pslr_db = pslr_sum / static_cast<double>(frames.size());
    e.papr_db = papr_sum / static_cast<double>(frames.size());
    e.mae_bins = truths ? err_sum / static_cast<double>(truths) : 0.0;
    return e;
}

FtEval evaluate_ft_classical(std::span<const synth::LabeledFrame> frames, int threads) {
    std::vector<RVector> mags(frames.size());
    parallel_for(
        frames.size(), [&](std::size_t i) { mags[i] = numerics::magnitude(baselines::dft(frames[i].input_c)); },
        threads);
    return evaluate_ft_spectra(mags, frames);
}

FtEval evaluate_ft_lego(const ft::FTParams& p, std::span<const synth::LabeledFrame> frames, int threads) {
    std::vector<RVector> mags(frames.size());
    parallel_for(
        frames.size(), [&](std::size_t i) { mags[i] = numerics::magnitude(ft::ft_forward(p, frames[i].input_c)); },
        threads);
    return evaluate_ft_spectra(mags, frames);
}

BfEval evaluate_bf_spectra(std::span<const CVector> spectra, const SteeringDictionary& a,
                           std::span<const synth::LabeledFrame> frames) {
    if (spectra.size() != frames.size()) throw DimensionError("evaluate_bf: spectra/frames count mismatch");
    BfEval e;
    e.frames = frames.size();
    const double max_error = a.grid.back() - a.grid.front();
    double err_sum = 0.0;
    std::size_t truths = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& truth = frames[i].truth;
        if (truth.empty()) continue;
        const auto est = bf::bf_estimate_angles(spectra[i], a.grid, truth.size(), kBfMinSeparationBins);
        err_sum += mae(est, truth, max_error) * static_cast<double>(truth.size());
        truths += truth.size();
    }
    e.mae_deg = truths ? err_sum / static_cast<double>(truths) : 0.0;
    return e;
}

BfEval evaluate_bf_admm(const SteeringDictionary& a, const baselines::AdmmConfig& cfg,
                        std::span<const synth::LabeledFrame> frames, int threads) {
    const baselines::AdmmSolver solver(a, cfg);
    std::vector<CVector> spectra(frames.size());
    parallel_for(frames.size(), [&](std::size_t i) { spectra[i] = solver.solve(frames[i].input_c); }, threads);
    return evaluate_bf_spectra(spectra, a, frames);
}

BfEval evaluate_bf_lego(const bf::BFParams& p, const SteeringDictionary& a, std::span<const synth::LabeledFrame> frames,
                        int threads) {
    std::vector<CVector> spectra(frames.size());
    parallel_for(frames.size(), [&](std::size_t i) { spectra[i] = bf::bf_forward(p, a, frames[i].input_c); }, threads);
    return evaluate_bf_spectra(spectra, a, frames);
}

}  // namespace rflego::metrics
