#include "rflego/lego_detector.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "rflego/errors.hpp"

namespace rflego::det {

using ad::ParamBlock;
using ad::Reduction;
using ad::Tape;
using ad::Var;

namespace {

void check_direction(const Direction& d, std::size_t l, const char* name) {
    if (d.a.size() != l * l || d.b.size() != l || d.c.size() != l) {
        throw ValidationError(std::string("ssm params: ") + name + " direction has inconsistent shapes");
    }
    numerics::require_finite(d.a, "ssm A");
    numerics::require_finite(d.b, "ssm B");
    numerics::require_finite(d.c, "ssm C");
    if (!std::isfinite(d.d)) throw NumericError("ssm D is not finite");
}

RVector identity(std::size_t l) {
    RVector a(l * l, 0.0);
    for (std::size_t i = 0; i < l; ++i) a[i * l + i] = 1.0;
    return a;
}

}  // namespace

void SSMParams::validate() const {
    if (state < 1) throw ValidationError("ssm params: state size must be positive");
    check_direction(fwd, state, "forward");
    check_direction(bwd, state, "backward");
    if (!std::isfinite(beta_raw) || !std::isfinite(threshold)) {
        throw NumericError("ssm params: non-finite output parameters");
    }
}

double SSMParams::beta() const { return numerics::softplus(beta_raw); }

SSMParams det_init_from_cfar(const baselines::CfarConfig& cfg) {
    cfg.validate();
    if (cfg.variant != baselines::CfarVariant::CA) {
        throw CapabilityError(std::string("det_init_from_cfar: ") + baselines::cfar_variant_name(cfg.variant) +
                              "-CFAR has no exact linear state-space form; only CA is supported");
    }
    const auto g = static_cast<std::size_t>(cfg.guard_cells);
    const auto t = static_cast<std::size_t>(cfg.train_cells);
    const std::size_t l = g + t + 1;
    Direction dir;
    dir.a.assign(l * l, 0.0);
    for (std::size_t i = 1; i < l; ++i) dir.a[i * l + (i - 1)] = 1.0;
    dir.b.assign(l, 0.0);
    dir.b[0] = 1.0;
    dir.c.assign(l, 0.0);
    for (std::size_t i = g + 1; i <= g + t; ++i) dir.c[i] = -cfg.scale / (2.0 * static_cast<double>(t));

    SSMParams p;
    p.state = l;
    p.fwd = dir;
    p.fwd.d = 1.0;
    p.bwd = dir;
    p.bwd.d = 0.0;
    p.beta_raw = numerics::softplus_inverse(kInitBeta);
    p.threshold = 0.0;
    return p;
}

Ablation parse_ablation(const std::string& name) {
    if (name == "no_activation") return Ablation::NoActivation;
    if (name == "identity_state") return Ablation::IdentityState;
    throw DataError("unknown detector ablation '" + name + "' (expected no_activation or identity_state)");
}

SSMParams det_ablate(SSMParams params, Ablation which) {
    switch (which) {
        case Ablation::NoActivation:
            params.linear_output = true;
            break;
        case Ablation::IdentityState:
            params.freeze_state = true;
            params.fwd.a = identity(params.state);
            params.bwd.a = identity(params.state);
            break;
    }
    return params;
}

namespace {

ParamBlock block(const std::string& name, RVector v, std::size_t rows, std::size_t cols, bool trainable = true) {
    ParamBlock b;
    b.name = name;
    b.values = std::move(v);
    b.rows = rows;
    b.cols = cols;
    b.trainable = trainable;
    return b;
}

}  // namespace

std::vector<ParamBlock> to_blocks(const SSMParams& p) {
    const std::size_t l = p.state;
    std::vector<ParamBlock> blocks;
    blocks.push_back(block("a_fwd", p.fwd.a, l, l, !p.freeze_state));
    blocks.push_back(block("b_fwd", p.fwd.b, l, 1));
    blocks.push_back(block("c_fwd", p.fwd.c, l, 1));
    blocks.push_back(block("d_fwd", {p.fwd.d}, 1, 1));
    blocks.push_back(block("a_bwd", p.bwd.a, l, l, !p.freeze_state));
    blocks.push_back(block("b_bwd", p.bwd.b, l, 1));
    blocks.push_back(block("c_bwd", p.bwd.c, l, 1));
    blocks.push_back(block("d_bwd", {p.bwd.d}, 1, 1));
    blocks.push_back(block("beta_raw", {p.beta_raw}, 1, 1, !p.linear_output));
    blocks.push_back(block("threshold", {p.threshold}, 1, 1));
    return blocks;
}

SSMParams from_blocks(const SSMParams& like, std::span<const ParamBlock> blocks) {
    if (blocks.size() != 10) throw ValidationError("ssm params: expected 10 blocks");
    SSMParams p = like;
    p.fwd.a = blocks[0].values;
    p.fwd.b = blocks[1].values;
    p.fwd.c = blocks[2].values;
    p.fwd.d = blocks[3].values.at(0);
    p.bwd.a = blocks[4].values;
    p.bwd.b = blocks[5].values;
    p.bwd.c = blocks[6].values;
    p.bwd.d = blocks[7].values.at(0);
    p.beta_raw = blocks[8].values.at(0);
    p.threshold = blocks[9].values.at(0);
    p.validate();
    return p;
}

Kernels kernels_on_tape(Tape& t, const SSMParams& p, std::span<const Var> leaves, std::size_t length) {
    if (leaves.size() != 10) throw DimensionError("ssm: expected 10 parameter leaves");
    auto states = [&](Var a, Var b) {
        std::vector<Var> powers;
        powers.reserve(length);
        powers.push_back(b);
        for (std::size_t k = 1; k < length; ++k) powers.push_back(t.matvec(a, powers.back()));
        return t.concat(powers, p.state);
    };
    return {states(leaves[0], leaves[1]), states(leaves[4], leaves[5])};
}

Var scores_on_tape(Tape& t, const SSMParams& p, std::span<const Var> leaves, const Kernels& k,
                   std::span<const double> x, const TapeOptions& opt) {
    const std::size_t n = x.size();
    if (n <= 2 * p.state) {
        throw DimensionError("det_forward: input length " + std::to_string(n) + " must exceed 2L = " +
                             std::to_string(2 * p.state));
    }
    if (t.size(k.fwd_states) != n * p.state) {
        throw DimensionError("det_forward: kernels were built for a different length");
    }
    Var cf = leaves[2];
    Var cb = leaves[6];
    if (opt.dropout > 0.0 && opt.rng != nullptr) {
        cf = ad::dropout(t, cf, opt.dropout, *opt.rng);
        cb = ad::dropout(t, cb, opt.dropout, *opt.rng);
    }
    const Var hf = t.matvec(k.fwd_states, cf);
    const Var hb = t.matvec(k.bwd_states, cb);

    // Toeplitz data matrices: causal uses x[i - j], anti-causal uses x[i + j]
    RVector causal(n * n, 0.0), anti(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) causal[i * n + j] = x[i - j];
        for (std::size_t j = 0; i + j < n; ++j) anti[i * n + j] = x[i + j];
    }
    const Var xs = t.constant(x);
    const Var direct = t.mul(t.add(leaves[3], leaves[7]), xs);
    const Var sf = t.matvec(t.constant_matrix(std::span<const double>(causal), n, n), hf);
    const Var sb = t.matvec(t.constant_matrix(std::span<const double>(anti), n, n), hb);
    return t.add(t.add(sf, sb), direct);
}

Var logits_on_tape(Tape& t, const SSMParams& p, std::span<const Var> leaves, Var scores) {
    if (p.linear_output) throw CapabilityError("logits_on_tape: the linear-output ablation has no logits");
    return t.mul(t.softplus(leaves[8]), t.sub(scores, leaves[9]));
}

Var probabilities_on_tape(Tape& t, const SSMParams& p, std::span<const Var> leaves, Var scores) {
    if (p.linear_output) {
        return t.add(t.sub(scores, leaves[9]), t.constant(0.5));
    }
    return t.sigmoid(logits_on_tape(t, p, leaves, scores));
}

RVector det_scores(const SSMParams& p, std::span<const double> x) {
    const std::size_t n = x.size();
    const std::size_t l = p.state;
    if (n <= 2 * l) {
        throw DimensionError("det_forward: input length " + std::to_string(n) + " must exceed 2L = " +
                             std::to_string(2 * l));
    }
    RVector scores(n, 0.0);
    RVector z(l), next(l);
    auto scan = [&](const Direction& dir, bool reverse) {
        std::fill(z.begin(), z.end(), 0.0);
        for (std::size_t step = 0; step < n; ++step) {
            const std::size_t i = reverse ? n - 1 - step : step;
            for (std::size_t r = 0; r < l; ++r) {
                double acc = dir.b[r] * x[i];
                const double* row = dir.a.data() + r * l;
                for (std::size_t c = 0; c < l; ++c) acc += row[c] * z[c];
                next[r] = acc;
            }
            z.swap(next);
            double out = dir.d * x[i];
            for (std::size_t r = 0; r < l; ++r) out += dir.c[r] * z[r];
            scores[i] += out;
        }
    };
    scan(p.fwd, false);
    scan(p.bwd, true);
    return scores;
}

DetectionResult det_forward(const SSMParams& p, std::span<const double> x) {
    DetectionResult res;
    res.scores = det_scores(p, x);
    const std::size_t n = x.size();
    res.probabilities.resize(n);
    res.mask.resize(n);
    const double beta = p.beta();
    for (std::size_t i = 0; i < n; ++i) {
        const double c = res.scores[i] - p.threshold;
        res.probabilities[i] = p.linear_output ? std::clamp(c + 0.5, 0.0, 1.0) : numerics::sigmoid(beta * c);
        // strict inequality: a score exactly at the threshold is not a detection
        res.mask[i] = c > 0.0 ? 1 : 0;
    }
    return res;
}

void det_discretize(std::span<const double> cont_a, std::span<const double> cont_b, std::size_t n, double dt,
                    RVector& disc_a, RVector& disc_b) {
    if (cont_a.size() != n * n || cont_b.size() != n) {
        throw DimensionError("det_discretize: shapes do not match n");
    }
    const auto en = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd a(en, en);
    Eigen::VectorXd b(en);
    for (Eigen::Index i = 0; i < en; ++i) {
        b(i) = cont_b[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < en; ++j) a(i, j) = cont_a[static_cast<std::size_t>(i * en + j)];
    }
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(en, en);
    const Eigen::MatrixXd lhs = eye - 0.5 * dt * a;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
    if (!lu.isInvertible()) {
        throw NumericError("det_discretize: (I - dt/2 A) is singular");
    }
    const Eigen::MatrixXd ad = lu.solve(eye + 0.5 * dt * a);
    const Eigen::VectorXd bd = lu.solve(dt * b);
    disc_a.resize(n * n);
    disc_b.resize(n);
    for (Eigen::Index i = 0; i < en; ++i) {
        disc_b[static_cast<std::size_t>(i)] = bd(i);
        for (Eigen::Index j = 0; j < en; ++j) disc_a[static_cast<std::size_t>(i * en + j)] = ad(i, j);
    }
}

double calibrate_from_scores(std::vector<double> scores, double target_far) {
    if (!(target_far > 0.0 && target_far < 1.0)) {
        throw DataError("calibrate: target false alarm rate must lie in (0, 1)");
    }
    const std::size_t n = scores.size();
    const auto exceed = static_cast<std::size_t>(std::floor(target_far * static_cast<double>(n)));
    if (n == 0 || exceed >= n) {
        throw DataError("calibrate: not enough scores for the requested quantile");
    }
    const std::size_t idx = n - exceed - 1;
    std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(idx), scores.end());
    return scores[idx];
}

double det_calibrate_threshold(SSMParams& p, std::span<const RVector> noise_frames, double target_far) {
    if (!(target_far > 0.0 && target_far < 0.5 + 1e-12)) {
        throw DataError("det_calibrate_threshold: target_far must lie in (0, 0.5]");
    }
    std::vector<double> scores;
    for (const auto& f : noise_frames) {
        const RVector s = det_scores(p, f);
        scores.insert(scores.end(), s.begin(), s.end());
    }
    if (scores.size() < kMinCalibrationCells) {
        throw DataError("det_calibrate_threshold: " + std::to_string(scores.size()) +
                        " noise cells available, at least " + std::to_string(kMinCalibrationCells) + " required");
    }
    p.threshold = calibrate_from_scores(std::move(scores), target_far);
    return p.threshold;
}

double spectral_radius(std::span<const double> a, std::size_t n) {
    if (a.size() != n * n) throw DimensionError("spectral_radius: matrix is not n x n");
    const auto en = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd m(en, en);
    for (Eigen::Index i = 0; i < en; ++i) {
        for (Eigen::Index j = 0; j < en; ++j) m(i, j) = a[static_cast<std::size_t>(i * en + j)];
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw NumericError("spectral_radius: eigenvalue solver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace rflego::det
