#include "rflego/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rflego/errors.hpp"

namespace rflego::baselines {

CVector dft(std::span<const Complex> x) {
    const std::size_t n = x.size();
    CVector out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc{};
        for (std::size_t m = 0; m < n; ++m) {
            // reduce k*m mod N first so the phase stays small and exact
            const std::size_t km = (k * m) % n;
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(km) / static_cast<double>(n);
            acc += x[m] * Complex{std::cos(angle), std::sin(angle)};
        }
        out[k] = acc;
    }
    return out;
}

namespace {

// e^{j sign pi m^2 / N}, with m^2 reduced mod 2N
Complex chirp(std::size_t m, std::size_t n, double sign) {
    const std::size_t sq = (m * m) % (2 * n);
    const double angle = sign * std::numbers::pi * static_cast<double>(sq) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

}  // namespace

ChirpPair make_chirps(std::size_t n) {
    if (n == 0) {
        throw DimensionError("make_chirps: N must be positive");
    }
    ChirpPair c;
    c.n = n;
    c.pre.resize(n);
    c.conv.resize(n);
    c.post.resize(n);
    const bool odd = (n % 2) == 1;
    for (std::size_t m = 0; m < n; ++m) {
        const double alt = (odd && (m % 2) == 1) ? -1.0 : 1.0;
        c.pre[m] = alt * chirp(m, n, -1.0);
        c.conv[m] = alt * chirp(m, n, 1.0);
        c.post[m] = alt * chirp(m, n, -1.0);
    }
    return c;
}

CVector bluestein_ft(std::span<const Complex> x, const ChirpPair& chirps) {
    if (x.size() != chirps.n) {
        throw DimensionError("bluestein_ft: input length " + std::to_string(x.size()) + " does not match chirp length " +
                             std::to_string(chirps.n));
    }
    const std::size_t n = x.size();
    CVector a(n);
    for (std::size_t m = 0; m < n; ++m) {
        a[m] = x[m] * chirps.pre[m];
    }
    CVector y = numerics::convolve_circular_fast(a, chirps.conv);
    for (std::size_t k = 0; k < n; ++k) {
        y[k] *= chirps.post[k];
    }
    return y;
}

void AdmmConfig::validate() const {
    if (!(tau > 0.0) || !(rho > 0.0) || iterations < 1) {
        throw DataError("admm config requires tau > 0, rho > 0, iterations >= 1");
    }
}

double lasso_objective(std::span<const Complex> r, const SteeringDictionary& a, std::span<const Complex> z,
                       double tau) {
    const CVector az = a.apply(z);
    double fit = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        fit += std::norm(r[i] - az[i]);
    }
    double l1 = 0.0;
    for (const auto& v : z) {
        l1 += std::abs(v);
    }
    return 0.5 * fit + tau * l1;
}

struct AdmmSolver::Impl {
    Eigen::LLT<Eigen::MatrixXcd> llt;
};

AdmmSolver::AdmmSolver(const SteeringDictionary& a, AdmmConfig cfg) : a_(&a), cfg_(cfg), impl_(std::make_unique<Impl>()) {
    cfg_.validate();
    const auto m = static_cast<Eigen::Index>(a.antennas);
    const auto g = static_cast<Eigen::Index>(a.grid_size());
    Eigen::MatrixXcd am(m, g);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < g; ++j) {
            am(i, j) = a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    Eigen::MatrixXcd sys = am.adjoint() * am;
    sys.diagonal().array() += cfg_.rho;
    impl_->llt.compute(sys);
    if (impl_->llt.info() != Eigen::Success) {
        throw NumericError("admm: (A^H A + rho I) factorization failed");
    }
}

AdmmSolver::~AdmmSolver() = default;
AdmmSolver::AdmmSolver(AdmmSolver&&) noexcept = default;
AdmmSolver& AdmmSolver::operator=(AdmmSolver&&) noexcept = default;

CVector AdmmSolver::solve(std::span<const Complex> r, std::vector<CVector>* z_trace) const {
    if (r.size() != a_->antennas) {
        throw DimensionError("admm: snapshot length " + std::to_string(r.size()) + " != array size " +
                             std::to_string(a_->antennas));
    }
    const std::size_t g = a_->grid_size();
    const CVector ahr = a_->adjoint_apply(r);
    const double level = cfg_.tau / cfg_.rho;
    Eigen::VectorXcd rhs(static_cast<Eigen::Index>(g));
    CVector x(g), z(g, Complex{}), v(g, Complex{});
    for (int it = 0; it < cfg_.iterations; ++it) {
        for (std::size_t i = 0; i < g; ++i) {
            rhs(static_cast<Eigen::Index>(i)) = ahr[i] + cfg_.rho * (z[i] - v[i]);
        }
        const Eigen::VectorXcd sol = impl_->llt.solve(rhs);
        for (std::size_t i = 0; i < g; ++i) {
            x[i] = sol(static_cast<Eigen::Index>(i));
            z[i] = numerics::soft_threshold(x[i] + v[i], level);
            v[i] += x[i] - z[i];
        }
        if (z_trace != nullptr) {
            z_trace->push_back(z);
        }
    }
    numerics::require_finite(z, "admm iterate");
    return z;
}

CVector admm_lasso(std::span<const Complex> r, const SteeringDictionary& a, const AdmmConfig& cfg) {
    return AdmmSolver(a, cfg).solve(r);
}

std::vector<CVector> admm_diagonal(std::span<const Complex> r, const SteeringDictionary& a,
                                   std::span<const DiagonalAdmmLayer> layers) {
    if (r.size() != a.antennas) {
        throw DimensionError("admm_diagonal: snapshot length does not match array size");
    }
    const std::size_t g = a.grid_size();
    const CVector ahr = a.adjoint_apply(r);
    CVector z(g, Complex{}), v(g, Complex{});
    std::vector<CVector> trace;
    trace.reserve(layers.size());
    for (const auto& layer : layers) {
        if (layer.w.size() != g) {
            throw DimensionError("admm_diagonal: preconditioner length does not match grid");
        }
        for (std::size_t i = 0; i < g; ++i) {
            const Complex x = (ahr[i] + layer.eta * (z[i] - v[i])) / (layer.w[i] + layer.eta);
            const Complex u = x + v[i];
            z[i] = numerics::soft_threshold(u, layer.level);
            v[i] = v[i] + x - z[i];
        }
        trace.push_back(z);
    }
    return trace;
}

CfarVariant parse_cfar_variant(const std::string& name) {
    if (name == "CA" || name == "ca") return CfarVariant::CA;
    if (name == "OS" || name == "os") return CfarVariant::OS;
    if (name == "GO" || name == "go") return CfarVariant::GO;
    if (name == "SO" || name == "so") return CfarVariant::SO;
    throw DataError("unknown CFAR variant '" + name + "'");
}

const char* cfar_variant_name(CfarVariant v) noexcept {
    switch (v) {
        case CfarVariant::CA: return "CA";
        case CfarVariant::OS: return "OS";
        case CfarVariant::GO: return "GO";
        case CfarVariant::SO: return "SO";
    }
    return "?";
}

void CfarConfig::validate() const {
    if (guard_cells < 0 || train_cells < 1 || !(scale > 0.0)) {
        throw DataError("cfar config requires guard >= 0, train >= 1, scale > 0");
    }
    if (variant == CfarVariant::OS && (os_rank < 1 || os_rank > 2 * train_cells)) {
        throw DataError("cfar config: os_rank must lie in [1, 2*train_cells]");
    }
}

CfarResult cfar(std::span<const double> x, const CfarConfig& cfg) {
    cfg.validate();
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t g = cfg.guard_cells;
    const std::ptrdiff_t t = cfg.train_cells;
    if (n <= 2 * (g + t)) {
        throw DimensionError("cfar: signal length " + std::to_string(n) + " must exceed 2*(guard+train) = " +
                             std::to_string(2 * (g + t)));
    }
    CfarResult res;
    res.scores.resize(x.size());
    res.estimate.resize(x.size());
    res.mask.resize(x.size());
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(2 * t));

    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double lead_sum = 0.0, lag_sum = 0.0;
        int lead_count = 0, lag_count = 0;
        window.clear();
        for (std::ptrdiff_t d = g + 1; d <= g + t; ++d) {
            if (i - d >= 0) {
                lead_sum += x[static_cast<std::size_t>(i - d)];
                ++lead_count;
                window.push_back(x[static_cast<std::size_t>(i - d)]);
            }
            if (i + d < n) {
                lag_sum += x[static_cast<std::size_t>(i + d)];
                ++lag_count;
                window.push_back(x[static_cast<std::size_t>(i + d)]);
            }
        }
        double est = 0.0;
        switch (cfg.variant) {
            case CfarVariant::CA:
                est = (lead_sum + lag_sum) / static_cast<double>(lead_count + lag_count);
                break;
            case CfarVariant::OS: {
                const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.os_rank), window.size()) - 1;
                std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(k), window.end());
                est = window[k];
                break;
            }
            case CfarVariant::GO:
            case CfarVariant::SO: {
                if (lead_count == 0) {
                    est = lag_sum / lag_count;
                } else if (lag_count == 0) {
                    est = lead_sum / lead_count;
                } else {
                    const double a = lead_sum / lead_count;
                    const double b = lag_sum / lag_count;
                    est = cfg.variant == CfarVariant::GO ? std::max(a, b) : std::min(a, b);
                }
                break;
            }
        }
        const auto idx = static_cast<std::size_t>(i);
        res.estimate[idx] = est;
        res.scores[idx] = x[idx] - cfg.scale * est;
        res.mask[idx] = res.scores[idx] > 0.0 ? 1 : 0;
    }
    return res;
}

}  // namespace rflego::baselines
