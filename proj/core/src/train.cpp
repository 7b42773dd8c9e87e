#include "rflego/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "rflego/errors.hpp"
#include "rflego/metrics.hpp"
#include "rflego/parallel.hpp"
#include "rflego/random.hpp"

namespace rflego::train {

LossKind parse_loss(const std::string& name) {
    if (name == "cosine") return LossKind::Cosine;
    if (name == "bce") return LossKind::Bce;
    throw ValidationError("unknown loss '" + name + "' (expected cosine or bce)");
}

const char* loss_name(LossKind k) noexcept { return k == LossKind::Cosine ? "cosine" : "bce"; }

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(split > 0.0 && split < 1.0)) throw ValidationError("split must lie in (0, 1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
    if (chunk_size < 1) throw ValidationError("chunk_size must be >= 1");
}

TrainConfig TrainConfig::for_module(synth::ModuleKind kind) {
    TrainConfig c;
    c.loss = kind == synth::ModuleKind::DET ? LossKind::Bce : LossKind::Cosine;
    return c;
}

TrainConfig TrainConfig::from_keyvalues(const KeyValues& kv, synth::ModuleKind kind) {
    TrainConfig c = for_module(kind);
    c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
    c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
    const long long bs = kv.get_int("batch_size", static_cast<long long>(c.batch_size));
    const long long ep = kv.get_int("epochs", static_cast<long long>(c.epochs));
    const long long cs = kv.get_int("chunk_size", static_cast<long long>(c.chunk_size));
    if (bs < 1 || ep < 0 || cs < 1) throw ValidationError("batch_size, chunk_size >= 1 and epochs >= 0 required");
    c.batch_size = static_cast<std::size_t>(bs);
    c.epochs = static_cast<std::size_t>(ep);
    c.chunk_size = static_cast<std::size_t>(cs);
    c.split = kv.get_double("split", c.split);
    c.dropout = kv.get_double("dropout", c.dropout);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.loss = parse_loss(kv.get("loss", loss_name(c.loss)));
    c.validate();
    return c;
}

KeyValues TrainConfig::to_keyvalues() const {
    auto num = [](double v) {
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    };
    KeyValues kv;
    kv.set("version", std::to_string(KeyValues::kConfigVersion));
    kv.set("learning_rate", num(learning_rate));
    kv.set("weight_decay", num(weight_decay));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("split", num(split));
    kv.set("dropout", num(dropout));
    kv.set("epochs", std::to_string(epochs));
    kv.set("seed", std::to_string(seed));
    kv.set("loss", loss_name(loss));
    kv.set("chunk_size", std::to_string(chunk_size));
    return kv;
}

std::string TrainHistory::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "epoch,train_loss,val_loss," << (metric_name.empty() ? "val_metric" : metric_name) << "\n";
    os << 0 << ",," << initial_val_loss << "," << initial_val_metric << "\n";
    for (std::size_t e = 0; e < train_loss.size(); ++e) {
        os << e + 1 << "," << train_loss[e] << "," << val_loss[e] << "," << val_metric[e] << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// losses

double cosine_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw DimensionError("cosine_loss: length mismatch (" + std::to_string(pred.size()) + " vs " +
                             std::to_string(target.size()) + ")");
    }
    double dot = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::abs(pred[i]);
        const double t = std::abs(target[i]);
        dot += p * t;
        pp += p * p;
        tt += t * t;
    }
    if (tt == 0.0) throw DataError("cosine_loss: target is all zero");
    return 1.0 - dot / (std::max(std::sqrt(pp), 1e-12) * std::sqrt(tt));
}

double cosine_loss(std::span<const Complex> pred, std::span<const double> target) {
    const RVector mag = numerics::magnitude(pred);
    return cosine_loss(std::span<const double>(mag), target);
}

double bce_loss(std::span<const double> probabilities, std::span<const double> mask, double positive_weight) {
    if (probabilities.size() != mask.size()) throw DimensionError("bce_loss: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double p = std::clamp(probabilities[i], kProbabilityClip, 1.0 - kProbabilityClip);
        const double m = mask[i];
        const double w = m > 0.5 ? positive_weight : 1.0;
        num += w * -(m * std::log(p) + (1.0 - m) * std::log(1.0 - p));
        den += w;
    }
    return den > 0.0 ? num / den : 0.0;
}

double positive_weight(std::span<const synth::LabeledFrame> frames) {
    std::size_t pos = 0, total = 0;
    for (const auto& f : frames) {
        for (double m : f.target) pos += m > 0.5 ? 1 : 0;
        total += f.target.size();
    }
    return pos == 0 ? 1.0 : static_cast<double>(total - pos) / static_cast<double>(pos);
}

ad::Var cosine_loss_on_tape(ad::Tape& tape, ad::Var pred, std::span<const double> target) {
    if (tape.size(pred) != target.size()) throw DimensionError("cosine_loss: length mismatch");
    double tt = 0.0;
    RVector t(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        t[i] = std::abs(target[i]);
        tt += t[i] * t[i];
    }
    if (tt == 0.0) throw DataError("cosine_loss: target is all zero");
    const ad::Var mag = tape.magnitude(pred);
    const ad::Var dot = tape.reduce(ad::Reduction::Sum, mag * tape.constant(t));
    const ad::Var norm = tape.reduce(ad::Reduction::Norm, mag, 1e-12);
    return tape.constant(1.0) - dot / (norm * tape.constant(std::sqrt(tt)));
}

double bce_weight_total(std::span<const double> mask, double positive_weight) {
    double w = 0.0;
    for (double m : mask) w += m > 0.5 ? positive_weight : 1.0;
    return w;
}

ad::Var bce_sum_on_tape(ad::Tape& tape, ad::Var probabilities, std::span<const double> mask, double positive_weight) {
    if (tape.size(probabilities) != mask.size()) throw DimensionError("bce_loss: length mismatch");
    RVector wpos(mask.size()), wneg(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const bool positive = mask[i] > 0.5;
        wpos[i] = positive ? -positive_weight * mask[i] : 0.0;
        wneg[i] = positive ? 0.0 : -(1.0 - mask[i]);
    }
    const ad::Var p = tape.clip(probabilities, kProbabilityClip, 1.0 - kProbabilityClip);
    const ad::Var lp = tape.log(p);
    const ad::Var lq = tape.log(tape.constant(1.0) - p);
    return tape.reduce(ad::Reduction::Sum, tape.constant(wpos) * lp + tape.constant(wneg) * lq);
}

ad::Var bce_logits_sum_on_tape(ad::Tape& tape, ad::Var logits, std::span<const double> mask, double positive_weight) {
    if (tape.size(logits) != mask.size()) throw DimensionError("bce_loss: length mismatch");
    RVector wpos(mask.size()), wneg(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const bool positive = mask[i] > 0.5;
        wpos[i] = positive ? positive_weight * mask[i] : 0.0;
        wneg[i] = positive ? 0.0 : 1.0 - mask[i];
    }
    const double bound = std::log((1.0 - kProbabilityClip) / kProbabilityClip);
    const ad::Var z = tape.clip(logits, -bound, bound);
    // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
    const ad::Var pos = tape.softplus(tape.constant(0.0) - z);
    const ad::Var neg = tape.softplus(z);
    return tape.reduce(ad::Reduction::Sum, tape.constant(wpos) * pos + tape.constant(wneg) * neg);
}

// ---------------------------------------------------------------------------
// optimizer

AdamState AdamState::for_blocks(std::span<const ad::ParamBlock> blocks) {
    AdamState s;
    for (const auto& b : blocks) {
        s.m.emplace_back(b.values.size(), 0.0);
        s.v.emplace_back(b.values.size(), 0.0);
    }
    return s;
}

void optimizer_step(std::vector<ad::ParamBlock>& params, std::span<const RVector> grads, AdamState& state, double lr,
                    double weight_decay) {
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        throw DimensionError("optimizer_step: block count mismatch");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (grads[b].size() != params[b].values.size() || state.m[b].size() != params[b].values.size()) {
            throw DimensionError("optimizer_step: block '" + params[b].name + "' shape mismatch");
        }
        if (!params[b].trainable) continue;
        for (double g : grads[b]) {
            if (!std::isfinite(g)) throw NumericError("optimizer_step: non-finite gradient in '" + params[b].name + "'");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (!params[b].trainable) continue;
        auto& p = params[b].values;
        auto& m = state.m[b];
        auto& v = state.v[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = grads[b][i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            p[i] *= 1.0 - lr * weight_decay;
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
        }
    }
}

Split make_split(std::size_t n, double split, std::uint64_t seed) {
    if (n < 2) throw DataError("make_split: need at least 2 frames");
    if (!(split > 0.0 && split < 1.0)) throw ValidationError("split must lie in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x5917));
    std::shuffle(order.begin(), order.end(), rng);
    auto n_train = static_cast<std::size_t>(std::floor(split * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

// ---------------------------------------------------------------------------
// generic loop

namespace {

/// Unnormalized loss sum over frames; rng_for(frame) yields the dropout stream or nullptr.
using ChunkSum = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>, std::span<const std::size_t>, double,
                                       const std::function<Rng*(std::size_t)>&)>;

struct Problem {
    std::vector<ad::ParamBlock> blocks;
    ChunkSum chunk_sum;
    std::function<double(std::span<const std::size_t>)> batch_weight;                   // positive weight
    std::function<double(std::span<const std::size_t>, double)> denominator;            // normalizer
    std::function<double(const std::vector<ad::ParamBlock>&, std::span<const std::size_t>)> metric;
    std::string metric_name;
};

std::vector<std::span<const std::size_t>> chunks_of(std::span<const std::size_t> idx, std::size_t chunk) {
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t s = 0; s < idx.size(); s += chunk) out.push_back(idx.subspan(s, std::min(chunk, idx.size() - s)));
    return out;
}

double loss_value(const Problem& pr, const std::vector<ad::ParamBlock>& blocks, std::span<const std::size_t> idx,
                  const TrainConfig& cfg) {
    const double pw = pr.batch_weight(idx);
    const double den = pr.denominator(idx, pw);
    const auto chunks = chunks_of(idx, cfg.chunk_size);
    std::vector<double> sums(chunks.size(), 0.0);
    const std::function<Rng*(std::size_t)> none = [](std::size_t) -> Rng* { return nullptr; };
    parallel_for(
        chunks.size(),
        [&](std::size_t c) {
            sums[c] = ad::evaluate(
                [&](ad::Tape& t, std::span<const ad::Var> leaves) { return pr.chunk_sum(t, leaves, chunks[c], pw, none); },
                blocks);
        },
        cfg.threads);
    double total = 0.0;
    for (double s : sums) total += s;
    return total / den;
}

template <class P>
TrainResult<P> run(Problem pr, const synth::Dataset& data, const TrainConfig& cfg,
                   const std::function<P(const std::vector<ad::ParamBlock>&)>& rebuild) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    TrainHistory hist;
    hist.metric_name = pr.metric_name;
    if (cfg.epochs == 0) {
        return {rebuild(pr.blocks), hist};
    }
    const Split split = make_split(data.frames.size(), cfg.split, cfg.seed);
    hist.initial_val_loss = loss_value(pr, pr.blocks, split.validation, cfg);
    hist.initial_val_metric = pr.metric(pr.blocks, split.validation);
    if (!std::isfinite(hist.initial_val_loss)) throw NumericError("training: validation loss is not finite at init");

    std::vector<ad::ParamBlock> best = pr.blocks;
    double best_loss = hist.initial_val_loss;
    AdamState adam = AdamState::for_blocks(pr.blocks);
    std::vector<std::size_t> order = split.train;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x5a0ff1e, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::span<const std::size_t> batch(order.data() + start,
                                                     std::min(cfg.batch_size, order.size() - start));
            const double pw = pr.batch_weight(batch);
            const double den = pr.denominator(batch, pw);
            const auto chunks = chunks_of(batch, cfg.chunk_size);
            std::vector<ad::ValueAndGrad> parts(chunks.size());
            parallel_for(
                chunks.size(),
                [&](std::size_t c) {
                    std::vector<Rng> rngs;
                    rngs.reserve(chunks[c].size());
                    for (std::size_t f : chunks[c]) rngs.emplace_back(derive_seed(cfg.seed, mix64(epoch), f));
                    const std::function<Rng*(std::size_t)> rng_for = [&](std::size_t k) -> Rng* {
                        return cfg.dropout > 0.0 ? &rngs[k] : nullptr;
                    };
                    parts[c] = ad::value_and_grad(
                        [&](ad::Tape& t, std::span<const ad::Var> leaves) {
                            return pr.chunk_sum(t, leaves, chunks[c], pw, rng_for) / t.constant(den);
                        },
                        pr.blocks);
                },
                cfg.threads);
            double batch_loss = 0.0;
            std::vector<RVector> grads = std::move(parts[0].gradients);
            batch_loss += parts[0].value;
            for (std::size_t c = 1; c < parts.size(); ++c) {
                batch_loss += parts[c].value;
                for (std::size_t b = 0; b < grads.size(); ++b) {
                    for (std::size_t i = 0; i < grads[b].size(); ++i) grads[b][i] += parts[c].gradients[b][i];
                }
            }
            try {
                optimizer_step(pr.blocks, grads, adam, cfg.learning_rate, cfg.weight_decay);
            } catch (const NumericError& e) {
                ++hist.skipped_steps;
                hist.log.push_back("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(start / cfg.batch_size) + ": step skipped: " + e.what());
            }
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        const double vl = loss_value(pr, pr.blocks, split.validation, cfg);
        if (!std::isfinite(vl)) {
            throw NumericError("training diverged: validation loss is " + std::to_string(vl) + " after epoch " +
                               std::to_string(epoch));
        }
        hist.train_loss.push_back(epoch_loss / static_cast<double>(seen));
        hist.val_loss.push_back(vl);
        hist.val_metric.push_back(pr.metric(pr.blocks, split.validation));
        if (vl < best_loss) {
            best_loss = vl;
            best = pr.blocks;
            hist.best_epoch = epoch;
        }
    }
    hist.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {rebuild(best), hist};
}

void require_kind(const synth::Dataset& data, synth::ModuleKind kind) {
    if (data.config.kind != kind) {
        throw ValidationError(std::string("training a ") + synth::module_name(kind) + " module on a " +
                              synth::module_name(data.config.kind) + " dataset");
    }
}

std::vector<synth::LabeledFrame> pick(const std::vector<synth::LabeledFrame>& frames, std::span<const std::size_t> idx) {
    std::vector<synth::LabeledFrame> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(frames[i]);
    return out;
}

double frame_count(std::span<const std::size_t> idx, double) { return static_cast<double>(idx.size()); }
double unit_weight(std::span<const std::size_t>) { return 1.0; }

}  // namespace

// ---------------------------------------------------------------------------
// FT

namespace {

ad::Var ft_sum(ad::Tape& tape, const ft::FTParams& like, std::span<const ad::Var> leaves,
               std::span<const synth::LabeledFrame* const> frames, double dropout,
               const std::function<Rng*(std::size_t)>& rng_for) {
    std::vector<ad::Var> terms;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        ft::TapeOptions opt;
        opt.rng = rng_for ? rng_for(k) : nullptr;
        opt.dropout = opt.rng ? dropout : 0.0;
        const ad::Var x = tape.constant(std::span<const Complex>(frames[k]->input_c));
        const ad::Var y = ft::forward_on_tape(tape, like, leaves, x, opt);
        terms.push_back(cosine_loss_on_tape(tape, y, frames[k]->target));
    }
    return tape.reduce(ad::Reduction::Sum, tape.concat(terms));
}

}  // namespace

ad::TapedFunction ft_loss_function(const ft::FTParams& like, std::span<const synth::LabeledFrame> frames) {
    std::vector<const synth::LabeledFrame*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    const double n = static_cast<double>(frames.size());
    return [like, ptrs, n](ad::Tape& tape, std::span<const ad::Var> leaves) {
        return ft_sum(tape, like, leaves, ptrs, 0.0, {}) / tape.constant(n);
    };
}

TrainResult<ft::FTParams> train_ft(const ft::FTParams& init, const synth::Dataset& data, const TrainConfig& cfg) {
    require_kind(data, synth::ModuleKind::FT);
    if (cfg.loss != LossKind::Cosine) throw ValidationError("the FT module trains with the cosine loss");
    Problem pr;
    pr.blocks = ft::to_blocks(init);
    pr.metric_name = "val_mae_bins";
    const auto& frames = data.frames;
    pr.chunk_sum = [&](ad::Tape& t, std::span<const ad::Var> leaves, std::span<const std::size_t> idx, double,
                       const std::function<Rng*(std::size_t)>& rng_for) {
        std::vector<const synth::LabeledFrame*> ptrs;
        for (std::size_t i : idx) ptrs.push_back(&frames[i]);
        return ft_sum(t, init, leaves, ptrs, cfg.dropout, rng_for);
    };
    pr.batch_weight = unit_weight;
    pr.denominator = frame_count;
    pr.metric = [&](const std::vector<ad::ParamBlock>& blocks, std::span<const std::size_t> idx) {
        const auto p = ft::from_blocks(init, blocks);
        return metrics::evaluate_ft_lego(p, pick(frames, idx), cfg.threads).mae_bins;
    };
    return run<ft::FTParams>(std::move(pr), data, cfg,
                             [&](const std::vector<ad::ParamBlock>& b) { return ft::from_blocks(init, b); });
}

// ---------------------------------------------------------------------------
// BF

namespace {

ad::Var bf_sum(ad::Tape& tape, const bf::BFParams& like, std::span<const ad::Var> leaves,
               std::span<const CVector* const> ahr, std::span<const synth::LabeledFrame* const> frames, double dropout,
               const std::function<Rng*(std::size_t)>& rng_for) {
    std::vector<ad::Var> terms;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        bf::TapeOptions opt;
        opt.rng = rng_for ? rng_for(k) : nullptr;
        opt.dropout = opt.rng ? dropout : 0.0;
        const ad::Var h = tape.constant(std::span<const Complex>(*ahr[k]));
        const ad::Var z = bf::forward_on_tape(tape, like, leaves, h, opt);
        terms.push_back(cosine_loss_on_tape(tape, z, frames[k]->target));
    }
    return tape.reduce(ad::Reduction::Sum, tape.concat(terms));
}

}  // namespace

ad::TapedFunction bf_loss_function(const bf::BFParams& like, const SteeringDictionary& a,
                                   std::span<const synth::LabeledFrame> frames) {
    auto ahr = std::make_shared<std::vector<CVector>>();
    std::vector<const synth::LabeledFrame*> ptrs;
    for (const auto& f : frames) {
        ahr->push_back(a.adjoint_apply(f.input_c));
        ptrs.push_back(&f);
    }
    const double n = static_cast<double>(frames.size());
    return [like, ahr, ptrs, n](ad::Tape& tape, std::span<const ad::Var> leaves) {
        std::vector<const CVector*> h;
        for (const auto& v : *ahr) h.push_back(&v);
        return bf_sum(tape, like, leaves, h, ptrs, 0.0, {}) / tape.constant(n);
    };
}

TrainResult<bf::BFParams> train_bf(const bf::BFParams& init, const SteeringDictionary& a, const synth::Dataset& data,
                                   const TrainConfig& cfg) {
    require_kind(data, synth::ModuleKind::BF);
    if (cfg.loss != LossKind::Cosine) throw ValidationError("the beamformer module trains with the cosine loss");
    const auto& frames = data.frames;
    std::vector<CVector> ahr(frames.size());
    parallel_for(frames.size(), [&](std::size_t i) { ahr[i] = a.adjoint_apply(frames[i].input_c); }, cfg.threads);
    Problem pr;
    pr.blocks = bf::to_blocks(init);
    pr.metric_name = "val_mae_deg";
    pr.chunk_sum = [&](ad::Tape& t, std::span<const ad::Var> leaves, std::span<const std::size_t> idx, double,
                       const std::function<Rng*(std::size_t)>& rng_for) {
        std::vector<const synth::LabeledFrame*> ptrs;
        std::vector<const CVector*> h;
        for (std::size_t i : idx) {
            ptrs.push_back(&frames[i]);
            h.push_back(&ahr[i]);
        }
        return bf_sum(t, init, leaves, h, ptrs, cfg.dropout, rng_for);
    };
    pr.batch_weight = unit_weight;
    pr.denominator = frame_count;
    pr.metric = [&](const std::vector<ad::ParamBlock>& blocks, std::span<const std::size_t> idx) {
        const auto p = bf::from_blocks(init, blocks);
        return metrics::evaluate_bf_lego(p, a, pick(frames, idx), cfg.threads).mae_deg;
    };
    return run<bf::BFParams>(std::move(pr), data, cfg,
                             [&](const std::vector<ad::ParamBlock>& b) { return bf::from_blocks(init, b); });
}

// ---------------------------------------------------------------------------
// detector

namespace {

ad::Var det_sum(ad::Tape& tape, const det::SSMParams& like, std::span<const ad::Var> leaves,
                std::span<const synth::LabeledFrame* const> frames, double pw, double dropout,
                const std::function<Rng*(std::size_t)>& rng_for) {
    std::vector<ad::Var> terms;
    const std::size_t length = frames.empty() ? 0 : frames[0]->input_r.size();
    const det::Kernels kernels = det::kernels_on_tape(tape, like, leaves, length);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (frames[k]->input_r.size() != length) throw DimensionError("detector training: frames differ in length");
        det::TapeOptions opt;
        opt.rng = rng_for ? rng_for(k) : nullptr;
        opt.dropout = opt.rng ? dropout : 0.0;
        const ad::Var s = det::scores_on_tape(tape, like, leaves, kernels, frames[k]->input_r, opt);
        if (like.linear_output) {
            const ad::Var p = det::probabilities_on_tape(tape, like, leaves, s);
            terms.push_back(bce_sum_on_tape(tape, p, frames[k]->target, pw));
        } else {
            terms.push_back(bce_logits_sum_on_tape(tape, det::logits_on_tape(tape, like, leaves, s), frames[k]->target, pw));
        }
    }
    return tape.reduce(ad::Reduction::Sum, tape.concat(terms));
}

}  // namespace

ad::TapedFunction det_loss_function(const det::SSMParams& like, std::span<const synth::LabeledFrame> frames) {
    std::vector<const synth::LabeledFrame*> ptrs;
    double den = 0.0;
    const double pw = positive_weight(frames);
    for (const auto& f : frames) {
        ptrs.push_back(&f);
        den += bce_weight_total(f.target, pw);
    }
    return [like, ptrs, pw, den](ad::Tape& tape, std::span<const ad::Var> leaves) {
        return det_sum(tape, like, leaves, ptrs, pw, 0.0, {}) / tape.constant(den);
    };
}

TrainResult<det::SSMParams> train_det(const det::SSMParams& init, const synth::Dataset& data, const TrainConfig& cfg) {
    require_kind(data, synth::ModuleKind::DET);
    if (cfg.loss != LossKind::Bce) throw ValidationError("the detector module trains with the bce loss");
    const auto& frames = data.frames;
    Problem pr;
    pr.blocks = det::to_blocks(init);
    pr.metric_name = "val_dr_at_half";
    pr.chunk_sum = [&](ad::Tape& t, std::span<const ad::Var> leaves, std::span<const std::size_t> idx, double pw,
                       const std::function<Rng*(std::size_t)>& rng_for) {
        std::vector<const synth::LabeledFrame*> ptrs;
        for (std::size_t i : idx) ptrs.push_back(&frames[i]);
        return det_sum(t, init, leaves, ptrs, pw, cfg.dropout, rng_for);
    };
    pr.batch_weight = [&](std::span<const std::size_t> idx) {
        std::size_t pos = 0, total = 0;
        for (std::size_t i : idx) {
            for (double m : frames[i].target) pos += m > 0.5 ? 1 : 0;
            total += frames[i].target.size();
        }
        return pos == 0 ? 1.0 : static_cast<double>(total - pos) / static_cast<double>(pos);
    };
    pr.denominator = [&](std::span<const std::size_t> idx, double pw) {
        double w = 0.0;
        for (std::size_t i : idx) w += bce_weight_total(frames[i].target, pw);
        return w;
    };
    pr.metric = [&](const std::vector<ad::ParamBlock>& blocks, std::span<const std::size_t> idx) {
        const auto p = det::from_blocks(init, blocks);
        const auto val = pick(frames, idx);
        std::vector<det::DetectionResult> res(val.size());
        parallel_for(val.size(), [&](std::size_t i) { res[i] = det::det_forward(p, val[i].input_r); }, cfg.threads);
        return metrics::dr_far(res, val, 1).dr;
    };
    return run<det::SSMParams>(std::move(pr), data, cfg,
                               [&](const std::vector<ad::ParamBlock>& b) { return det::from_blocks(init, b); });
}

// ---------------------------------------------------------------------------
// gradient suite

namespace {

void perturb(std::vector<ad::ParamBlock>& blocks, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& b : blocks) {
        if (!b.trainable) continue;
        double scale = 0.0;
        for (double v : b.values) scale = std::max(scale, std::abs(v));
        scale = 0.1 * std::max(scale, 0.5);
        for (double& v : b.values) v += scale * nd(rng);
    }
}

std::size_t trainable_count(const std::vector<ad::ParamBlock>& blocks) {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.trainable ? b.values.size() : 0;
    return n;
}

}  // namespace

std::vector<GradcheckCase> gradient_suite(synth::ModuleKind kind, std::uint64_t seed, double step,
                                          std::size_t perturbations, std::size_t frames) {
    synth::SynthConfig sc = synth::SynthConfig::defaults(kind);
    sc.n_frames = std::max<std::size_t>(frames, 1);
    sc.seed = seed;
    sc.ft_n = 64;
    sc.bf_grid_low_deg = -60.0;
    sc.bf_grid_high_deg = 60.0;
    sc.bf_grid_step_deg = 3.0;
    sc.det_length = 48;
    sc.det_peaks_max = 2;
    const synth::Dataset data = synth::generate(sc);
    const SteeringDictionary a = synth::dictionary_for(sc);

    std::vector<GradcheckCase> out;
    Rng rng(derive_seed(seed, 0x9c4ec));
    for (std::size_t k = 0; k <= perturbations; ++k) {
        GradcheckCase c;
        c.module = kind;
        c.perturbation = k;
        switch (kind) {
            case synth::ModuleKind::FT: {
                const ft::FTParams p = ft::ft_init(sc.ft_n);
                auto blocks = ft::to_blocks(p);
                if (k > 0) perturb(blocks, rng);
                c.parameters = trainable_count(blocks);
                c.max_rel_error = ad::finite_diff_check(ft_loss_function(p, data.frames), blocks, step);
                break;
            }
            case synth::ModuleKind::BF: {
                const bf::BFParams p = bf::bf_init(a, 10);
                auto blocks = bf::to_blocks(p);
                if (k > 0) perturb(blocks, rng);
                c.parameters = trainable_count(blocks);
                c.max_rel_error = ad::finite_diff_check(bf_loss_function(p, a, data.frames), blocks, step);
                break;
            }
            case synth::ModuleKind::DET: {
                baselines::CfarConfig cc;
                cc.guard_cells = 1;
                cc.train_cells = 4;
                const det::SSMParams p = det::det_init_from_cfar(cc);
                auto blocks = det::to_blocks(p);
                if (k > 0) perturb(blocks, rng);
                c.parameters = trainable_count(blocks);
                c.max_rel_error = ad::finite_diff_check(det_loss_function(p, data.frames), blocks, step);
                break;
            }
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace rflego::train
