#include "rflego/lego_beamformer.hpp"

#include <algorithm>
#include <cmath>

#include "rflego/errors.hpp"

namespace rflego::bf {

using ad::ParamBlock;
using ad::Tape;
using ad::Var;

void BFParams::validate() const {
    const std::size_t gates = per_layer_gates ? layers : 1;
    if (layers < 1 || grid < 1 || w.size() != layers || eta_raw.size() != layers || theta_raw.size() != layers ||
        wg.size() != gates || ug.size() != gates || gate_bias.size() != grid) {
        throw ValidationError("bf params: inconsistent shapes");
    }
    for (std::size_t t = 0; t < layers; ++t) {
        if (w[t].size() != grid) throw ValidationError("bf params: preconditioner length mismatch");
        numerics::require_finite(w[t], "bf preconditioner");
    }
    for (std::size_t i = 0; i < gates; ++i) {
        if (wg[i].size() != grid * grid || ug[i].size() != grid * grid) {
            throw ValidationError("bf params: gate matrix shape mismatch");
        }
        numerics::require_finite(wg[i], "bf gate Wg");
        numerics::require_finite(ug[i], "bf gate Ug");
    }
    numerics::require_finite(eta_raw, "bf eta");
    numerics::require_finite(theta_raw, "bf theta");
    numerics::require_finite(gate_bias, "bf gate bias");
}

double BFParams::eta(std::size_t t) const { return numerics::softplus(eta_raw.at(t)); }
double BFParams::theta(std::size_t t) const { return numerics::softplus(theta_raw.at(t)); }

std::size_t BFParams::parameter_count() const {
    std::size_t count = 0;
    for (const auto& b : to_blocks(*this)) count += b.values.size();
    return count;
}

BFParams bf_init(const SteeringDictionary& a, std::size_t layers, bool per_layer_gates) {
    if (layers < 1) {
        throw DimensionError("bf_init: at least one layer is required");
    }
    BFParams p;
    p.layers = layers;
    p.grid = a.grid_size();
    p.per_layer_gates = per_layer_gates;
    const RVector diag = a.gram_diagonal();
    p.w.assign(layers, diag);
    p.eta_raw.assign(layers, numerics::softplus_inverse(kInitEta));
    p.theta_raw.assign(layers, numerics::softplus_inverse(kInitTheta));
    const std::size_t gates = per_layer_gates ? layers : 1;
    p.wg.assign(gates, RVector(p.grid * p.grid, 0.0));
    p.ug.assign(gates, RVector(p.grid * p.grid, 0.0));
    p.gate_bias.assign(p.grid, kInitGateBias);
    return p;
}

Ablation parse_ablation(const std::string& name) {
    if (name == "no_gate") return Ablation::NoGate;
    if (name == "no_iteration_connection") return Ablation::NoIterationConnection;
    throw DataError("unknown beamformer ablation '" + name + "' (expected no_gate or no_iteration_connection)");
}

BFParams bf_ablate(BFParams params, Ablation which) {
    params.mode = which == Ablation::NoGate ? GateMode::NoGate : GateMode::NoIterationLink;
    return params;
}

namespace {

ParamBlock block(const std::string& name, RVector v, std::size_t rows, std::size_t cols, bool trainable) {
    ParamBlock b;
    b.name = name;
    b.values = std::move(v);
    b.rows = rows;
    b.cols = cols;
    b.trainable = trainable;
    return b;
}

}  // namespace

std::vector<ParamBlock> to_blocks(const BFParams& p) {
    std::vector<ParamBlock> blocks;
    const bool gated = p.mode != GateMode::NoGate;
    for (std::size_t t = 0; t < p.layers; ++t) {
        const std::string s = std::to_string(t);
        blocks.push_back(block("w" + s, p.w[t], p.grid, 1, true));
        blocks.push_back(block("eta" + s, {p.eta_raw[t]}, 1, 1, true));
        blocks.push_back(block("theta" + s, {p.theta_raw[t]}, 1, 1, true));
    }
    for (std::size_t i = 0; i < p.wg.size(); ++i) {
        blocks.push_back(block("wg" + std::to_string(i), p.wg[i], p.grid, p.grid, gated));
    }
    for (std::size_t i = 0; i < p.ug.size(); ++i) {
        blocks.push_back(block("ug" + std::to_string(i), p.ug[i], p.grid, p.grid, gated));
    }
    blocks.push_back(block("gate_bias", p.gate_bias, p.grid, 1, gated));
    return blocks;
}

BFParams from_blocks(const BFParams& like, std::span<const ParamBlock> blocks) {
    const std::size_t gates = like.wg.size();
    if (blocks.size() != 3 * like.layers + 2 * gates + 1) {
        throw ValidationError("bf params: unexpected block count");
    }
    BFParams p = like;
    std::size_t k = 0;
    for (std::size_t t = 0; t < p.layers; ++t) {
        p.w[t] = blocks[k++].values;
        p.eta_raw[t] = blocks[k++].values.at(0);
        p.theta_raw[t] = blocks[k++].values.at(0);
    }
    for (std::size_t i = 0; i < gates; ++i) p.wg[i] = blocks[k++].values;
    for (std::size_t i = 0; i < gates; ++i) p.ug[i] = blocks[k++].values;
    p.gate_bias = blocks[k++].values;
    p.validate();
    return p;
}

Var forward_on_tape(Tape& t, const BFParams& p, std::span<const Var> leaves, Var ahr, const TapeOptions& opt,
                    std::vector<Var>* gate_nodes, std::vector<Var>* z_nodes) {
    if (t.size(ahr) != p.grid) {
        throw DimensionError("bf_forward: A^H r has length " + std::to_string(t.size(ahr)) + ", grid is " +
                             std::to_string(p.grid));
    }
    const std::size_t gates = p.wg.size();
    if (leaves.size() != 3 * p.layers + 2 * gates + 1) {
        throw DimensionError("bf_forward: unexpected number of parameter leaves");
    }
    const CVector zeros(p.grid, Complex{});
    Var z = t.constant(std::span<const Complex>(zeros));
    Var v = z;
    const Var one = t.constant(1.0);
    const Var bias = leaves[3 * p.layers + 2 * gates];

    for (std::size_t layer = 0; layer < p.layers; ++layer) {
        const Var w = leaves[3 * layer];
        const Var eta = t.softplus(leaves[3 * layer + 1]);
        const Var level = t.softplus(leaves[3 * layer + 2]);

        const Var x = t.solve(t.add(ahr, t.mul(eta, t.sub(z, v))), t.add(w, eta));
        const Var cand = t.soft_threshold(t.add(x, v), level);

        Var z_next;
        if (p.mode == GateMode::NoGate) {
            z_next = cand;
        } else {
            const std::size_t gi = p.per_layer_gates ? layer : 0;
            const Var wg = leaves[3 * p.layers + gi];
            const Var ug = leaves[3 * p.layers + gates + gi];
            Var pre = t.add(t.add(t.matvec(wg, t.magnitude(z)), t.matvec(ug, t.magnitude(v))), bias);
            if (opt.dropout > 0.0 && opt.rng != nullptr) {
                pre = ad::dropout(t, pre, opt.dropout, *opt.rng);
            }
            const Var g = t.sigmoid(pre);
            if (gate_nodes != nullptr) gate_nodes->push_back(g);
            if (p.mode == GateMode::Gated) {
                z_next = t.add(t.mul(g, cand), t.mul(t.sub(one, g), z));
            } else {
                z_next = t.mul(g, cand);
            }
        }
        v = t.sub(t.add(v, x), z_next);
        z = z_next;
        if (z_nodes != nullptr) z_nodes->push_back(z);
    }
    return z;
}

CVector bf_forward(const BFParams& p, const SteeringDictionary& a, std::span<const Complex> r,
                   std::vector<LayerTrace>* trace) {
    if (r.size() != a.antennas) {
        throw DimensionError("bf_forward: snapshot length " + std::to_string(r.size()) + " != array size " +
                             std::to_string(a.antennas));
    }
    if (a.grid_size() != p.grid) {
        throw DimensionError("bf_forward: dictionary grid does not match params");
    }
    Tape t;
    std::vector<Var> leaves;
    for (const auto& b : to_blocks(p)) {
        if (b.cols > 1) {
            leaves.push_back(t.constant_matrix(std::span<const double>(b.values), b.rows, b.cols));
        } else {
            leaves.push_back(t.constant(std::span<const double>(b.values)));
        }
    }
    const CVector ahr = a.adjoint_apply(r);
    std::vector<Var> gate_nodes, z_nodes;
    const Var out = forward_on_tape(t, p, leaves, t.constant(std::span<const Complex>(ahr)), {},
                                    trace ? &gate_nodes : nullptr, trace ? &z_nodes : nullptr);
    if (trace != nullptr) {
        trace->clear();
        for (std::size_t layer = 0; layer < z_nodes.size(); ++layer) {
            LayerTrace lt;
            if (layer < gate_nodes.size()) {
                const auto g = t.real_value(gate_nodes[layer]);
                lt.gate.assign(g.begin(), g.end());
            }
            const auto zv = t.complex_value(z_nodes[layer]);
            lt.z.assign(zv.begin(), zv.end());
            trace->push_back(std::move(lt));
        }
    }
    const auto v = t.complex_value(out);
    return {v.begin(), v.end()};
}

std::vector<double> bf_estimate_angles(std::span<const Complex> spectrum, std::span<const double> grid,
                                       std::size_t max_k, std::size_t min_separation_bins) {
    if (max_k < 1) {
        throw DataError("bf_estimate_angles: max_k must be at least 1");
    }
    if (spectrum.size() != grid.size()) {
        throw DimensionError("bf_estimate_angles: spectrum and grid lengths differ");
    }
    const std::size_t g = spectrum.size();
    const RVector mag = numerics::magnitude(spectrum);
    const double global = g ? *std::max_element(mag.begin(), mag.end()) : 0.0;
    std::vector<double> angles;
    if (!(global > 0.0)) return angles;

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < g; ++i) {
        const bool left = i == 0 || mag[i] >= mag[i - 1];
        const bool right = i + 1 == g || mag[i] >= mag[i + 1];
        if (left && right && mag[i] > 0.0) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });
    std::vector<std::size_t> chosen;
    for (std::size_t c : candidates) {
        if (chosen.size() >= max_k) break;
        if (mag[c] < 0.1 * global) break;
        const bool clear = std::all_of(chosen.begin(), chosen.end(), [&](std::size_t q) {
            return (c > q ? c - q : q - c) > min_separation_bins;
        });
        if (clear) chosen.push_back(c);
    }
    for (std::size_t c : chosen) angles.push_back(grid[c]);
    return angles;
}

}  // namespace rflego::bf
