#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "manifest.hpp"
#include "rflego/dataset_io.hpp"
#include "rflego/errors.hpp"
#include "rflego/metrics.hpp"
#include "rflego/parallel.hpp"
#include "rflego/params_io.hpp"
#include "rflego/train.hpp"

namespace rflego::cli {

using nlohmann::json;
using synth::ModuleKind;

namespace {

ModuleKind module_arg(const std::string& name) {
    try {
        return synth::parse_module(name);
    } catch (const Error& e) {
        throw ValidationError(e.what());
    }
}

void require_module(const synth::Dataset& ds, ModuleKind kind, const std::string& path) {
    if (ds.config.kind != kind) {
        throw ValidationError("dataset '" + path + "' holds " + synth::module_name(ds.config.kind) +
                              " frames, expected " + synth::module_name(kind));
    }
}

void reject_unused(const KeyValues& kv, const std::string& path) {
    const std::string key = kv.first_unused_key();
    if (!key.empty()) throw ValidationError("config '" + path + "': unknown key '" + key + "'");
}

std::string params_text(const std::string& path, ModuleKind kind) {
    std::string text = io::read_text(path);
    const std::string stored = io::params_module(text);
    if (module_arg(stored) != kind) {
        throw ValidationError("params '" + path + "' belong to module " + stored + ", expected " +
                              synth::module_name(kind));
    }
    return text;
}

json config_json(const synth::Dataset& ds) { return ds.config.to_keyvalues().entries(); }

json counts_json(const metrics::DetectionMetrics& m) {
    return {{"dr", m.dr},
            {"far", m.far},
            {"tolerance_bins", m.tolerance_bins},
            {"hits", m.counts.hits},
            {"targets", m.counts.targets},
            {"false_cells", m.counts.false_cells},
            {"noise_cells", m.counts.noise_cells}};
}

json calibrated_json(const metrics::CascadeResult& r) {
    json j = counts_json(r.metrics);
    j["threshold"] = r.threshold;
    j["calibration_frames"] = r.calibration_frames;
    j["evaluation_frames"] = r.evaluation_frames;
    j["calibration_cells"] = r.calibration_cells;
    return j;
}

void write_report(const std::string& path, const json& report, RunManifest& manifest) {
    io::write_text(path, report.dump(2) + "\n");
    manifest.add_output(path);
    manifest.write();
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

struct ModelShape {
    std::size_t layers = 10;
    bool per_layer_gates = false;
    bool nulling = true;
    baselines::CfarConfig cfar;
};

ModelShape read_shape(const KeyValues& kv) {
    ModelShape s;
    const long long layers = kv.get_int("layers", static_cast<long long>(s.layers));
    if (layers < 1) throw ValidationError("layers must be >= 1");
    s.layers = static_cast<std::size_t>(layers);
    s.per_layer_gates = kv.get_bool("per_layer_gates", s.per_layer_gates);
    s.nulling = kv.get_bool("nulling", s.nulling);
    s.cfar.guard_cells = static_cast<int>(kv.get_int("guard_cells", s.cfar.guard_cells));
    s.cfar.train_cells = static_cast<int>(kv.get_int("train_cells", s.cfar.train_cells));
    s.cfar.scale = kv.get_double("cfar_scale", s.cfar.scale);
    s.cfar.validate();
    return s;
}

std::vector<RVector> det_scores_all(const det::SSMParams& p, const synth::Dataset& ds, int threads) {
    std::vector<RVector> s(ds.frames.size());
    parallel_for(ds.frames.size(), [&](std::size_t i) { s[i] = det::det_scores(p, ds.frames[i].input_r); }, threads);
    return s;
}

std::vector<RVector> cfar_scores_all(const baselines::CfarConfig& cfg, const synth::Dataset& ds, int threads) {
    std::vector<RVector> s(ds.frames.size());
    parallel_for(
        ds.frames.size(), [&](std::size_t i) { s[i] = baselines::cfar(ds.frames[i].input_r, cfg).scores; }, threads);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_synth(const SynthArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    KeyValues kv = KeyValues::load(a.config);
    if (kv.has("module") && module_arg(kv.get("module", "")) != kind) {
        throw ValidationError("config '" + a.config + "' is for module " + kv.get("module", "") + ", not " + a.module);
    }
    kv.set("module", synth::module_name(kind));
    synth::SynthConfig cfg = synth::SynthConfig::from_keyvalues(kv);
    reject_unused(kv, a.config);
    if (c.seed_override) cfg.seed = *c.seed_override;
    const synth::Dataset ds = synth::generate(cfg);
    io::write_dataset(a.out, ds);

    RunManifest m("synth", c.argv);
    m.set_config(cfg.to_keyvalues().entries());
    m.add_seed("synth", cfg.seed);
    m.add_input(a.config);
    m.add_output(a.out);
    m.write();
    std::cout << "wrote " << ds.frames.size() << " " << synth::module_name(kind) << " frames to " << a.out << "\n";
    return 0;
}

int run_train(const TrainArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    KeyValues kv = KeyValues::load(a.config);
    train::TrainConfig cfg = train::TrainConfig::from_keyvalues(kv, kind);
    const ModelShape shape = read_shape(kv);
    reject_unused(kv, a.config);
    if (c.seed_override) cfg.seed = *c.seed_override;
    cfg.threads = c.threads;

    const synth::Dataset ds = io::read_dataset(a.data);
    require_module(ds, kind, a.data);
    RunManifest m("train", c.argv);
    m.add_input(a.config);
    m.add_input(a.data);
    if (!a.init.empty()) m.add_input(a.init);

    std::string encoded;
    train::TrainHistory hist;
    switch (kind) {
        case ModuleKind::FT: {
            const ft::FTParams init = a.init.empty() ? ft::ft_init(ds.config.ft_n, shape.nulling)
                                                     : io::decode_ft_params(params_text(a.init, kind));
            auto r = train::train_ft(init, ds, cfg);
            encoded = io::encode_ft_params(r.params);
            hist = std::move(r.history);
            break;
        }
        case ModuleKind::BF: {
            SteeringDictionary dict = synth::dictionary_for(ds.config);
            bf::BFParams init;
            if (a.init.empty()) {
                init = bf::bf_init(dict, shape.layers, shape.per_layer_gates);
            } else {
                auto [p, d] = io::decode_bf_params(params_text(a.init, kind));
                if (d.antennas != dict.antennas || d.grid != dict.grid) {
                    throw ValidationError("init params and dataset use different array geometries");
                }
                init = std::move(p);
            }
            auto r = train::train_bf(init, dict, ds, cfg);
            encoded = io::encode_bf_params(r.params, dict);
            hist = std::move(r.history);
            break;
        }
        case ModuleKind::DET: {
            const det::SSMParams init = a.init.empty() ? det::det_init_from_cfar(shape.cfar)
                                                       : io::decode_det_params(params_text(a.init, kind));
            auto r = train::train_det(init, ds, cfg);
            encoded = io::encode_det_params(r.params);
            hist = std::move(r.history);
            break;
        }
    }
    for (const auto& line : hist.log) std::cerr << line << "\n";
    io::write_text(a.out, encoded);
    const std::string history_path = a.history.empty() ? a.out + ".history.csv" : a.history;
    io::write_text(history_path, hist.to_csv());

    auto echo = cfg.to_keyvalues().entries();
    for (const auto& [k, v] : kv.entries()) echo.emplace(k, v);
    m.set_config(echo);
    m.add_seed("train", cfg.seed);
    m.add_seed("dataset", ds.config.seed);
    m.add_output(a.out);
    m.add_output(history_path);
    m.write();
    std::cout << "epochs " << hist.epochs() << ", best epoch " << hist.best_epoch << ", init val loss "
              << num(hist.initial_val_loss) << ", final val loss "
              << (hist.val_loss.empty() ? std::string("-") : num(hist.val_loss.back())) << ", skipped steps "
              << hist.skipped_steps << "\n";
    return 0;
}

int run_eval(const EvalArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    const synth::Dataset ds = io::read_dataset(a.data);
    require_module(ds, kind, a.data);
    RunManifest m("eval", c.argv);
    m.add_input(a.params);
    m.add_input(a.data);
    m.set_config(ds.config.to_keyvalues().entries());
    m.add_seed("dataset", ds.config.seed);
    json r;
    r["module"] = synth::module_name(kind);
    r["frames"] = ds.frames.size();
    r["dataset_config"] = config_json(ds);
    switch (kind) {
        case ModuleKind::FT: {
            const auto p = io::decode_ft_params(params_text(a.params, kind));
            const auto e = metrics::evaluate_ft_lego(p, ds.frames, c.threads);
            r["pslr_db"] = e.pslr_db;
            r["papr_db"] = e.papr_db;
            r["mae_bins"] = e.mae_bins;
            break;
        }
        case ModuleKind::BF: {
            const auto [p, dict] = io::decode_bf_params(params_text(a.params, kind));
            r["mae_deg"] = metrics::evaluate_bf_lego(p, dict, ds.frames, c.threads).mae_deg;
            break;
        }
        case ModuleKind::DET: {
            const auto p = io::decode_det_params(params_text(a.params, kind));
            std::vector<det::DetectionResult> res(ds.frames.size());
            parallel_for(
                ds.frames.size(), [&](std::size_t i) { res[i] = det::det_forward(p, ds.frames[i].input_r); },
                c.threads);
            r["stored_threshold"] = counts_json(metrics::dr_far(res, ds.frames, 1));
            if (a.target_far) {
                metrics::CascadeOptions opt;
                opt.target_far = *a.target_far;
                r["calibrated"] = calibrated_json(
                    metrics::calibrated_detection(det_scores_all(p, ds, c.threads), ds.frames, opt, false));
            }
            break;
        }
    }
    std::cout << r.dump(2) << "\n";
    write_report(a.report, r, m);
    return 0;
}

int run_compare(const CompareArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    const synth::Dataset ds = io::read_dataset(a.data);
    require_module(ds, kind, a.data);
    RunManifest m("compare", c.argv);
    m.add_input(a.data);
    if (!a.params.empty()) m.add_input(a.params);
    m.set_config(ds.config.to_keyvalues().entries());
    m.add_seed("dataset", ds.config.seed);
    json r;
    r["module"] = synth::module_name(kind);
    r["frames"] = ds.frames.size();
    r["dataset_config"] = config_json(ds);
    r["lego_params"] = a.params.empty() ? "init" : a.params;
    std::ostringstream table;
    switch (kind) {
        case ModuleKind::FT: {
            const ft::FTParams p = a.params.empty() ? ft::ft_init(ds.config.ft_n)
                                                    : io::decode_ft_params(params_text(a.params, kind));
            const auto cl = metrics::evaluate_ft_classical(ds.frames, c.threads);
            const auto lg = metrics::evaluate_ft_lego(p, ds.frames, c.threads);
            r["classical"] = {{"pslr_db", cl.pslr_db}, {"papr_db", cl.papr_db}, {"mae_bins", cl.mae_bins}};
            r["lego"] = {{"pslr_db", lg.pslr_db}, {"papr_db", lg.papr_db}, {"mae_bins", lg.mae_bins}};
            table << "metric,classical,lego\n"
                  << "pslr_db," << num(cl.pslr_db) << "," << num(lg.pslr_db) << "\n"
                  << "papr_db," << num(cl.papr_db) << "," << num(lg.papr_db) << "\n"
                  << "mae_bins," << num(cl.mae_bins) << "," << num(lg.mae_bins) << "\n";
            break;
        }
        case ModuleKind::BF: {
            SteeringDictionary dict = synth::dictionary_for(ds.config);
            bf::BFParams p;
            if (a.params.empty()) {
                p = bf::bf_init(dict, static_cast<std::size_t>(a.admm_iterations));
            } else {
                auto decoded = io::decode_bf_params(params_text(a.params, kind));
                p = std::move(decoded.first);
                dict = std::move(decoded.second);
            }
            baselines::AdmmConfig ac{a.admm_tau, a.admm_rho, a.admm_iterations};
            const auto cl = metrics::evaluate_bf_admm(dict, ac, ds.frames, c.threads);
            const auto lg = metrics::evaluate_bf_lego(p, dict, ds.frames, c.threads);
            r["classical"] = {{"mae_deg", cl.mae_deg}, {"admm_iterations", a.admm_iterations}, {"tau", a.admm_tau},
                              {"rho", a.admm_rho}};
            r["lego"] = {{"mae_deg", lg.mae_deg}, {"layers", p.layers}};
            table << "metric,classical,lego\nmae_deg," << num(cl.mae_deg) << "," << num(lg.mae_deg) << "\n";
            break;
        }
        case ModuleKind::DET: {
            baselines::CfarConfig cc;
            const det::SSMParams p = a.params.empty() ? det::det_init_from_cfar(cc)
                                                      : io::decode_det_params(params_text(a.params, kind));
            metrics::CascadeOptions opt;
            opt.target_far = a.target_far;
            const auto cl = metrics::calibrated_detection(cfar_scores_all(cc, ds, c.threads), ds.frames, opt, false);
            const auto lg = metrics::calibrated_detection(det_scores_all(p, ds, c.threads), ds.frames, opt, false);
            r["target_far"] = a.target_far;
            r["classical"] = calibrated_json(cl);
            r["lego"] = calibrated_json(lg);
            table << "metric,classical,lego\n"
                  << "dr," << num(cl.metrics.dr) << "," << num(lg.metrics.dr) << "\n"
                  << "far," << num(cl.metrics.far) << "," << num(lg.metrics.far) << "\n";
            break;
        }
    }
    std::cout << table.str();
    if (!a.report.empty()) write_report(a.report, r, m);
    return 0;
}

int run_cascade(const CascadeArgs& a, const Common& c) {
    metrics::FrontKind front;
    metrics::BackKind back;
    try {
        front = metrics::parse_front(a.front);
        back = metrics::parse_back(a.back);
    } catch (const Error& e) {
        throw ValidationError(e.what());
    }
    const synth::Dataset ds = io::read_dataset(a.data);
    RunManifest m("cascade", c.argv);
    m.add_input(a.data);
    m.set_config(ds.config.to_keyvalues().entries());
    m.add_seed("dataset", ds.config.seed);

    metrics::CascadeModels models;
    std::optional<ft::FTParams> ftp;
    std::optional<bf::BFParams> bfp;
    std::optional<det::SSMParams> detp;
    SteeringDictionary dict;
    if (ds.config.kind == ModuleKind::BF) dict = synth::dictionary_for(ds.config);
    if (front == metrics::FrontKind::LegoFT) {
        if (a.ft_params.empty()) throw ValidationError("--ft-params is required for the lego_ft front stage");
        ftp = io::decode_ft_params(params_text(a.ft_params, ModuleKind::FT));
        m.add_input(a.ft_params);
        models.ft = &*ftp;
    }
    if (front == metrics::FrontKind::LegoBF) {
        if (a.bf_params.empty()) throw ValidationError("--bf-params is required for the lego_bf front stage");
        auto decoded = io::decode_bf_params(params_text(a.bf_params, ModuleKind::BF));
        bfp = std::move(decoded.first);
        dict = std::move(decoded.second);
        m.add_input(a.bf_params);
        models.bf = &*bfp;
    }
    models.dictionary = &dict;
    if (back == metrics::BackKind::LegoDet) {
        if (a.det_params.empty()) throw ValidationError("--det-params is required for the lego_det back stage");
        detp = io::decode_det_params(params_text(a.det_params, ModuleKind::DET));
        m.add_input(a.det_params);
        models.det = &*detp;
    }
    metrics::CascadeOptions opt;
    opt.target_far = a.target_far;
    opt.tolerance_bins = a.tolerance;
    opt.inject_snr_db = a.inject_snr;
    opt.threads = c.threads;
    if (c.seed_override) opt.noise_seed = *c.seed_override;
    m.add_seed("interface_noise", opt.noise_seed);
    const auto res = metrics::cascade_eval(front, back, models, ds, opt);

    json r = calibrated_json(res);
    r["front"] = metrics::front_name(front);
    r["back"] = metrics::back_name(back);
    r["target_far"] = a.target_far;
    r["inject_snr_db"] = a.inject_snr ? json(*a.inject_snr) : json(nullptr);
    r["noise_seed"] = opt.noise_seed;
    r["dataset_config"] = config_json(ds);
    std::cout << "front,back,inject_snr_db,dr,far,threshold\n"
              << r["front"].get<std::string>() << "," << r["back"].get<std::string>() << ","
              << (a.inject_snr ? num(*a.inject_snr) : std::string("none")) << "," << num(res.metrics.dr) << ","
              << num(res.metrics.far) << "," << num(res.threshold) << "\n";
    if (!a.report.empty()) write_report(a.report, r, m);
    return 0;
}

int run_gradcheck(const GradcheckArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    if (!(a.step > 0.0)) throw ValidationError("--step must be positive");
    const std::uint64_t seed = c.seed_override.value_or(1);
    const auto cases = train::gradient_suite(kind, seed, a.step, static_cast<std::size_t>(a.perturbations));
    double worst = 0.0;
    std::cout << "module,perturbation,parameters,max_rel_error\n";
    for (const auto& g : cases) {
        std::cout << synth::module_name(kind) << "," << g.perturbation << "," << g.parameters << ","
                  << std::scientific << std::setprecision(3) << g.max_rel_error << std::defaultfloat << "\n";
        worst = std::max(worst, g.max_rel_error);
    }
    std::cout << "max relative error " << std::scientific << std::setprecision(3) << worst << std::defaultfloat
              << "\n";
    if (!(worst <= a.tolerance)) {
        throw ValidationError("gradient check failed: max relative error " + num(worst) + " exceeds " +
                              num(a.tolerance));
    }
    return 0;
}

int run_export(const ExportArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    RunManifest m("export-behavior", c.argv);
    m.add_input(a.params);
    std::ostringstream csv;
    csv << std::setprecision(12);
    switch (kind) {
        case ModuleKind::FT: {
            const auto p = io::decode_ft_params(params_text(a.params, kind));
            const auto init = ft::ft_init(p.n);
            csv << "bin,k1_mag,k2_mag,k1_init_mag,null_level_rel\n";
            for (std::size_t i = 0; i < p.n; ++i) {
                csv << i << "," << std::abs(p.k1[i]) << "," << std::abs(p.k2[i]) << "," << std::abs(init.k1[i]) << ","
                    << numerics::softplus(p.null_raw[i]) << "\n";
            }
            break;
        }
        case ModuleKind::BF: {
            if (a.data.empty()) throw ValidationError("--data is required to export beamformer gate traces");
            const auto [p, dict] = io::decode_bf_params(params_text(a.params, kind));
            const synth::Dataset ds = io::read_dataset(a.data);
            require_module(ds, kind, a.data);
            m.add_input(a.data);
            if (a.frame < 0 || static_cast<std::size_t>(a.frame) >= ds.frames.size()) {
                throw ValidationError("--frame outside the dataset");
            }
            std::vector<bf::LayerTrace> trace;
            bf::bf_forward(p, dict, ds.frames[static_cast<std::size_t>(a.frame)].input_c, &trace);
            csv << "layer,bin,angle_deg,gate,z_mag\n";
            for (std::size_t t = 0; t < trace.size(); ++t) {
                for (std::size_t g = 0; g < dict.grid.size(); ++g) {
                    csv << t << "," << g << "," << dict.grid[g] << ","
                        << (trace[t].gate.empty() ? std::string("") : num(trace[t].gate[g])) << ","
                        << std::abs(trace[t].z[g]) << "\n";
                }
            }
            break;
        }
        case ModuleKind::DET: {
            const auto p = io::decode_det_params(params_text(a.params, kind));
            csv << "direction,kind,row,col,value\n";
            auto dump = [&](const char* dir, const det::Direction& d) {
                for (std::size_t r = 0; r < p.state; ++r) {
                    for (std::size_t k = 0; k < p.state; ++k) {
                        csv << dir << ",A," << r << "," << k << "," << d.a[r * p.state + k] << "\n";
                    }
                }
                for (std::size_t r = 0; r < p.state; ++r) csv << dir << ",B," << r << ",0," << d.b[r] << "\n";
                for (std::size_t r = 0; r < p.state; ++r) csv << dir << ",C,0," << r << "," << d.c[r] << "\n";
                csv << dir << ",D,0,0," << d.d << "\n";
                csv << dir << ",spectral_radius,0,0," << det::spectral_radius(d.a, p.state) << "\n";
            };
            dump("forward", p.fwd);
            dump("backward", p.bwd);
            csv << "shared,beta,0,0," << p.beta() << "\nshared,threshold,0,0," << p.threshold << "\n";
            break;
        }
    }
    io::write_text(a.out, csv.str());
    m.add_output(a.out);
    m.write();
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

int run_ablate(const AblateArgs& a, const Common& c) {
    const ModuleKind kind = module_arg(a.module);
    RunManifest m("ablate", c.argv);
    if (!a.params.empty()) m.add_input(a.params);
    std::string encoded;
    try {
        switch (kind) {
            case ModuleKind::FT: {
                if (a.n < 2) throw ValidationError("--n must be >= 2");
                const ft::FTParams p = a.params.empty() ? ft::ft_init(static_cast<std::size_t>(a.n))
                                                        : io::decode_ft_params(params_text(a.params, kind));
                encoded = io::encode_ft_params(ft::ft_ablate(p, ft::parse_ablation(a.which)));
                break;
            }
            case ModuleKind::BF: {
                bf::BFParams p;
                SteeringDictionary dict;
                if (!a.params.empty()) {
                    auto decoded = io::decode_bf_params(params_text(a.params, kind));
                    p = std::move(decoded.first);
                    dict = std::move(decoded.second);
                } else {
                    synth::SynthConfig sc = synth::SynthConfig::defaults(kind);
                    if (!a.data.empty()) {
                        const synth::Dataset ds = io::read_dataset(a.data);
                        require_module(ds, kind, a.data);
                        m.add_input(a.data);
                        sc = ds.config;
                    }
                    dict = synth::dictionary_for(sc);
                    p = bf::bf_init(dict);
                }
                encoded = io::encode_bf_params(bf::bf_ablate(p, bf::parse_ablation(a.which)), dict);
                break;
            }
            case ModuleKind::DET: {
                const det::SSMParams p = a.params.empty() ? det::det_init_from_cfar(baselines::CfarConfig{})
                                                          : io::decode_det_params(params_text(a.params, kind));
                encoded = io::encode_det_params(det::det_ablate(p, det::parse_ablation(a.which)));
                break;
            }
        }
    } catch (const DataError& e) {
        throw ValidationError(e.what());
    }
    io::write_text(a.out, encoded);
    m.set_config({{"module", synth::module_name(kind)}, {"which", a.which}});
    m.add_output(a.out);
    m.write();
    std::cout << "wrote " << a.which << " " << synth::module_name(kind) << " params to " << a.out << "\n";
    return 0;
}

}  // namespace rflego::cli
