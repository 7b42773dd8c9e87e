#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rflego/numerics.hpp"
#include "rflego/steering.hpp"

namespace rflego::baselines {

/// Direct O(N^2) DFT, X[k] = sum_n x[n] e^{-j 2 pi k n / N}.
CVector dft(std::span<const Complex> x);

/// Chirp factors of the chirp-z factorization. For odd N the three chirps carry an
/// extra (-1)^n sign so that the length-N circular convolution stays exact.
struct ChirpPair {
    std::size_t n = 0;
    CVector pre;   // e^{-j pi n^2 / N}
    CVector conv;  // e^{+j pi n^2 / N}
    CVector post;  // e^{-j pi k^2 / N}
};

ChirpPair make_chirps(std::size_t n);

/// post[k] * (circular convolution of x*pre with conv)[k].
CVector bluestein_ft(std::span<const Complex> x, const ChirpPair& chirps);

struct AdmmConfig {
    double tau = 0.1;
    double rho = 1.0;
    int iterations = 100;

    void validate() const;
};

/// 0.5 ||r - A z||^2 + tau ||z||_1
double lasso_objective(std::span<const Complex> r, const SteeringDictionary& a, std::span<const Complex> z, double tau);

/// Classical ADMM for the complex LASSO with a cached factorization of (A^H A + rho I).
class AdmmSolver {
public:
    AdmmSolver(const SteeringDictionary& a, AdmmConfig cfg);
    ~AdmmSolver();
    AdmmSolver(AdmmSolver&&) noexcept;
    AdmmSolver& operator=(AdmmSolver&&) noexcept;

    /// Runs cfg.iterations steps from x = z = v = 0 and returns z.
    /// If z_trace is given, the z iterate after each step is appended.
    CVector solve(std::span<const Complex> r, std::vector<CVector>* z_trace = nullptr) const;

    const AdmmConfig& config() const noexcept { return cfg_; }

private:
    struct Impl;
    const SteeringDictionary* a_;
    AdmmConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

CVector admm_lasso(std::span<const Complex> r, const SteeringDictionary& a, const AdmmConfig& cfg);

/// One iteration of ADMM with a diagonal preconditioner: x = (A^H r + eta (z - v)) / (w + eta),
/// z = soft_threshold(x + v, level), v += x - z.
struct DiagonalAdmmLayer {
    RVector w;
    double eta = 1.0;
    double level = 0.1;
};

/// Returns the z iterate after every layer.
std::vector<CVector> admm_diagonal(std::span<const Complex> r, const SteeringDictionary& a,
                                   std::span<const DiagonalAdmmLayer> layers);

enum class CfarVariant { CA, OS, GO, SO };

CfarVariant parse_cfar_variant(const std::string& name);
const char* cfar_variant_name(CfarVariant v) noexcept;

struct CfarConfig {
    CfarVariant variant = CfarVariant::CA;
    int guard_cells = 2;
    int train_cells = 8;
    double scale = 3.0;
    int os_rank = 8;

    void validate() const;
};

struct CfarResult {
    RVector scores;
    RVector estimate;
    std::vector<std::uint8_t> mask;
};

/// score[n] = x[n] - scale * estimate[n], mask[n] = score[n] > 0.
/// Cells near the edges use whichever training side is available.
CfarResult cfar(std::span<const double> x, const CfarConfig& cfg);

}  // namespace rflego::baselines
