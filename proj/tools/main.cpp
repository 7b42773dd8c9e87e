#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>

#include "commands.hpp"
#include "rflego/errors.hpp"
#include "rflego/parallel.hpp"

namespace {

void emit_error(const std::string& kind, const std::string& message) {
    nlohmann::json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    using namespace rflego::cli;
    CLI::App app{"rflego: unrolled RF sensing modules and their classical baselines"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Common common;
    for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
    int threads = 0;
    unsigned long long seed = 0;
    app.add_option("--threads", threads, "Worker threads (0 = RFLEGO_THREADS or all cores)")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "Override every seed (also RFLEGO_SEED)");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    synth->add_option("module", sa.module, "ft | beamformer | detector")->required();
    synth->add_option("--config", sa.config, "Key-value config file")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", sa.out, "Output dataset path")->required();

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "Train an unrolled module (AdamW lr 1e-3, wd 0.01, batch 512, split 0.8, dropout 0.2)");
    trn->add_option("module", ta.module, "ft | beamformer | detector")->required();
    trn->add_option("--data", ta.data, "Training dataset")->required()->check(CLI::ExistingFile);
    trn->add_option("--config", ta.config, "Key-value training config")->required()->check(CLI::ExistingFile);
    trn->add_option("--out", ta.out, "Output params path")->required();
    trn->add_option("--init", ta.init, "Start from these params (for example an ablated init)")->check(CLI::ExistingFile);
    trn->add_option("--history", ta.history, "History CSV path (default <out>.history.csv)");

    EvalArgs ea;
    double eval_far = 0.0;
    auto* ev = app.add_subcommand("eval", "Evaluate trained params on a dataset");
    ev->add_option("module", ea.module, "ft | beamformer | detector")->required();
    ev->add_option("--params", ea.params, "Params file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", ea.data, "Dataset")->required()->check(CLI::ExistingFile);
    ev->add_option("--report", ea.report, "JSON report path")->required();
    auto* far_opt = ev->add_option("--target-far", eval_far, "Detector: also report DR at a calibrated FAR");

    CompareArgs ca;
    auto* cmp = app.add_subcommand("compare", "Classical baseline and unrolled module side by side");
    cmp->add_option("module", ca.module, "ft | beamformer | detector")->required();
    cmp->add_option("--data", ca.data, "Dataset")->required()->check(CLI::ExistingFile);
    cmp->add_option("--params", ca.params, "Unrolled params (default: init)")->check(CLI::ExistingFile);
    cmp->add_option("--report", ca.report, "JSON report path");
    cmp->add_option("--target-far", ca.target_far, "Detector operating point")->capture_default_str();
    cmp->add_option("--admm-iterations", ca.admm_iterations, "Classical ADMM iterations")->capture_default_str();
    cmp->add_option("--admm-tau", ca.admm_tau, "Classical ADMM sparsity weight")->capture_default_str();
    cmp->add_option("--admm-rho", ca.admm_rho, "Classical ADMM penalty")->capture_default_str();

    CascadeArgs cs;
    double inject = 0.0;
    auto* cas = app.add_subcommand("cascade", "Front stage into detector back stage, DR at calibrated FAR");
    cas->add_option("--front", cs.front, "classical_ft | lego_ft | classical_bf | lego_bf")->required();
    cas->add_option("--back", cs.back, "classical_cfar | lego_det")->required();
    cas->add_option("--data", cs.data, "FT or beamformer dataset")->required()->check(CLI::ExistingFile);
    cas->add_option("--ft-params", cs.ft_params, "Params for lego_ft")->check(CLI::ExistingFile);
    cas->add_option("--bf-params", cs.bf_params, "Params for lego_bf")->check(CLI::ExistingFile);
    cas->add_option("--det-params", cs.det_params, "Params for lego_det")->check(CLI::ExistingFile);
    auto* inject_opt = cas->add_option("--inject-snr", inject, "White noise between stages at this SNR (dB)");
    cas->add_option("--target-far", cs.target_far, "Calibrated false alarm rate")->capture_default_str();
    cas->add_option("--tolerance", cs.tolerance, "Detection tolerance in bins")->capture_default_str();
    cas->add_option("--report", cs.report, "JSON report path");

    GradcheckArgs ga;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of a module's training loss");
    gc->add_option("module", ga.module, "ft | beamformer | detector")->required();
    gc->add_option("--step", ga.step, "Finite-difference step")->capture_default_str();
    gc->add_option("--perturbations", ga.perturbations, "Random parameter perturbations besides init")
        ->capture_default_str();
    gc->add_option("--tolerance", ga.tolerance, "Maximum accepted relative error")->capture_default_str();

    ExportArgs xa;
    auto* ex = app.add_subcommand("export-behavior", "Kernel magnitudes, gate traces or state matrices as CSV");
    ex->add_option("module", xa.module, "ft | beamformer | detector")->required();
    ex->add_option("--params", xa.params, "Params file")->required()->check(CLI::ExistingFile);
    ex->add_option("--data", xa.data, "Beamformer: dataset to trace")->check(CLI::ExistingFile);
    ex->add_option("--frame", xa.frame, "Beamformer: frame index")->capture_default_str();
    ex->add_option("--out", xa.out, "CSV path")->required();

    AblateArgs aa;
    auto* ab = app.add_subcommand("ablate", "Apply an ablation switch to init or given params");
    ab->add_option("module", aa.module, "ft | beamformer | detector")->required();
    ab->add_option("--which", aa.which,
                   "ft: no_activation | no_nulling; beamformer: no_gate | no_iteration_connection; "
                   "detector: no_activation | identity_state")
        ->required();
    ab->add_option("--params", aa.params, "Params to ablate (default: init)")->check(CLI::ExistingFile);
    ab->add_option("--data", aa.data, "Beamformer: dataset whose array geometry sets the init")
        ->check(CLI::ExistingFile);
    ab->add_option("--n", aa.n, "FT: transform length for the init")->capture_default_str();
    ab->add_option("--out", aa.out, "Output params path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        emit_error("usage", e.what());
        return 2;
    }

    try {
        if (const char* env = std::getenv("RFLEGO_SEED")) common.seed_override = std::stoull(env);
    } catch (const std::exception&) {
        emit_error("usage", "RFLEGO_SEED is not an unsigned integer");
        return 2;
    }
    if (*seed_opt) common.seed_override = seed;
    if (threads < 0) {
        emit_error("usage", "--threads must be >= 0");
        return 2;
    }
    if (threads > 0) rflego::set_default_threads(threads);
    common.threads = threads;
    if (*far_opt) ea.target_far = eval_far;
    if (*inject_opt) cs.inject_snr = inject;

    try {
        if (*synth) return run_synth(sa, common);
        if (*trn) return run_train(ta, common);
        if (*ev) return run_eval(ea, common);
        if (*cmp) return run_compare(ca, common);
        if (*cas) return run_cascade(cs, common);
        if (*gc) return run_gradcheck(ga, common);
        if (*ex) return run_export(xa, common);
        if (*ab) return run_ablate(aa, common);
    } catch (const rflego::ValidationError& e) {
        emit_error(e.kind(), e.what());
        return 3;
    } catch (const rflego::Error& e) {
        emit_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    return 2;
}
