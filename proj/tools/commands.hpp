#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rflego::cli {

struct Common {
    std::vector<std::string> argv;
    int threads = 0;
    std::optional<unsigned long long> seed_override;  // --seed or RFLEGO_SEED
};

struct SynthArgs {
    std::string module, config, out;
};
struct TrainArgs {
    std::string module, data, config, out, init, history;
};
struct EvalArgs {
    std::string module, params, data, report;
    std::optional<double> target_far;
};
struct CompareArgs {
    std::string module, data, params, report;
    double target_far = 1e-3;
    int admm_iterations = 10;
    double admm_tau = 0.1;
    double admm_rho = 1.0;
};
struct CascadeArgs {
    std::string front, back, data, ft_params, bf_params, det_params, report;
    std::optional<double> inject_snr;
    double target_far = 1e-3;
    int tolerance = 1;
};
struct GradcheckArgs {
    std::string module;
    double step = 1e-4;
    int perturbations = 0;
    double tolerance = 1e-4;
};
struct ExportArgs {
    std::string module, params, data, out;
    int frame = 0;
};
struct AblateArgs {
    std::string module, which, params, data, out;
    int n = 256;
};

int run_synth(const SynthArgs& a, const Common& c);
int run_train(const TrainArgs& a, const Common& c);
int run_eval(const EvalArgs& a, const Common& c);
int run_compare(const CompareArgs& a, const Common& c);
int run_cascade(const CascadeArgs& a, const Common& c);
int run_gradcheck(const GradcheckArgs& a, const Common& c);
int run_export(const ExportArgs& a, const Common& c);
int run_ablate(const AblateArgs& a, const Common& c);

}  // namespace rflego::cli
