#include "rflego/params_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rflego/errors.hpp"

namespace rflego::io {

using nlohmann::json;

namespace {

json blocks_json(const std::vector<ad::ParamBlock>& blocks) {
    json arr = json::array();
    for (const auto& b : blocks) {
        arr.push_back({{"name", b.name},
                       {"complex", b.complex},
                       {"rows", b.rows},
                       {"cols", b.cols},
                       {"trainable", b.trainable},
                       {"values", b.values}});
    }
    return arr;
}

std::vector<ad::ParamBlock> parse_blocks(const json& arr, const std::vector<ad::ParamBlock>& like) {
    if (!arr.is_array() || arr.size() != like.size()) {
        throw ValidationError("params: block list does not match the module layout");
    }
    std::vector<ad::ParamBlock> out = like;
    for (std::size_t i = 0; i < like.size(); ++i) {
        const json& j = arr[i];
        if (j.at("name").get<std::string>() != like[i].name) {
            throw ValidationError("params: expected block '" + like[i].name + "', found '" +
                                  j.at("name").get<std::string>() + "'");
        }
        out[i].values = j.at("values").get<RVector>();
        if (out[i].values.size() != like[i].values.size()) {
            throw ValidationError("params: block '" + like[i].name + "' has " + std::to_string(out[i].values.size()) +
                                  " values, expected " + std::to_string(like[i].values.size()));
        }
    }
    return out;
}

json wrap(const std::string& module, json meta, const std::vector<ad::ParamBlock>& blocks) {
    return {{"format", "rflego-params"},
            {"version", kParamsVersion},
            {"module", module},
            {"meta", std::move(meta)},
            {"blocks", blocks_json(blocks)}};
}

json unwrap(const std::string& text, const std::string& module) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("params file is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != "rflego-params") throw ValidationError("not an rflego params file");
    if (j.value("version", 0) != kParamsVersion) throw ValidationError("unsupported params version");
    if (j.value("module", "") != module) {
        throw ValidationError("params file is for module '" + j.value("module", "") + "', expected '" + module + "'");
    }
    return j;
}

template <class F>
auto guarded(F f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("params file is malformed: ") + e.what());
    }
}

}  // namespace

std::string encode_ft_params(const ft::FTParams& p) {
    json meta = {{"n", p.n}, {"nulling_enabled", p.nulling_enabled}, {"activation_enabled", p.activation_enabled}};
    return wrap("ft", meta, ft::to_blocks(p)).dump(1);
}

ft::FTParams decode_ft_params(const std::string& text) {
    return guarded([&] {
        const json j = unwrap(text, "ft");
        const json& meta = j.at("meta");
        ft::FTParams like = ft::ft_init(meta.at("n").get<std::size_t>(), meta.at("nulling_enabled").get<bool>());
        if (!meta.at("activation_enabled").get<bool>()) like = ft::ft_ablate(like, ft::Ablation::NoActivation);
        const auto blocks = parse_blocks(j.at("blocks"), ft::to_blocks(like));
        return ft::from_blocks(like, blocks);
    });
}

std::string encode_bf_params(const bf::BFParams& p, const SteeringDictionary& a) {
    const double step = a.grid.size() > 1 ? a.grid[1] - a.grid[0] : 1.0;
    json meta = {{"layers", p.layers},
                 {"grid", p.grid},
                 {"per_layer_gates", p.per_layer_gates},
                 {"mode", static_cast<int>(p.mode)},
                 {"antennas", a.antennas},
                 {"grid_low_deg", a.grid.front()},
                 {"grid_high_deg", a.grid.back()},
                 {"grid_step_deg", step},
                 {"spacing", a.spacing}};
    return wrap("beamformer", meta, bf::to_blocks(p)).dump(1);
}

std::pair<bf::BFParams, SteeringDictionary> decode_bf_params(const std::string& text) {
    return guarded([&] {
        const json j = unwrap(text, "beamformer");
        const json& meta = j.at("meta");
        SteeringDictionary a = make_steering_dictionary(
            meta.at("antennas").get<std::size_t>(), meta.at("grid_low_deg").get<double>(),
            meta.at("grid_high_deg").get<double>(), meta.at("grid_step_deg").get<double>(),
            meta.at("spacing").get<double>());
        if (a.grid_size() != meta.at("grid").get<std::size_t>()) {
            throw ValidationError("params: rebuilt steering grid does not match the stored size");
        }
        bf::BFParams like = bf::bf_init(a, meta.at("layers").get<std::size_t>(), meta.at("per_layer_gates").get<bool>());
        const int mode = meta.at("mode").get<int>();
        if (mode < 0 || mode > 2) throw ValidationError("params: unknown gate mode");
        like.mode = static_cast<bf::GateMode>(mode);
        const auto blocks = parse_blocks(j.at("blocks"), bf::to_blocks(like));
        return std::make_pair(bf::from_blocks(like, blocks), std::move(a));
    });
}

std::string encode_det_params(const det::SSMParams& p) {
    json meta = {{"state", p.state}, {"freeze_state", p.freeze_state}, {"linear_output", p.linear_output}};
    return wrap("detector", meta, det::to_blocks(p)).dump(1);
}

det::SSMParams decode_det_params(const std::string& text) {
    return guarded([&] {
        const json j = unwrap(text, "detector");
        const json& meta = j.at("meta");
        det::SSMParams like;
        like.state = meta.at("state").get<std::size_t>();
        const std::size_t l = like.state;
        if (l < 1 || l > 4096) throw ValidationError("params: implausible detector state size");
        for (det::Direction* d : {&like.fwd, &like.bwd}) {
            d->a.assign(l * l, 0.0);
            d->b.assign(l, 0.0);
            d->c.assign(l, 0.0);
        }
        like.freeze_state = meta.at("freeze_state").get<bool>();
        like.linear_output = meta.at("linear_output").get<bool>();
        const auto blocks = parse_blocks(j.at("blocks"), det::to_blocks(like));
        return det::from_blocks(like, blocks);
    });
}

std::string params_module(const std::string& text) {
    return guarded([&] {
        const json j = json::parse(text);
        return j.at("module").get<std::string>();
    });
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rflego::io
