#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace rflego {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;
using RVector = std::vector<double>;

namespace numerics {

/// Boundary handling for `correlate`.
///  - Full:     every overlap, output length Nx + Nk - 1; output[j] pairs x[j + n - (Nk - 1)] with kernel[n].
///  - Same:     output length Nx, output[k] = sum_n x[k + n] * kernel[n], zero beyond the end of x.
///  - Circular: output length Nx, indices into x wrap modulo Nx.
enum class CorrelationMode { Full, Same, Circular };

/// Cross-correlation in the deep-learning convention: no kernel flip, no conjugation.
/// Direct summation; this is the reference path.
CVector correlate(std::span<const Complex> x, std::span<const Complex> kernel, CorrelationMode mode);

/// Circular convolution in the signal-processing convention,
/// output[k] = sum_n x[(k - n) mod N] * kernel[n]. Direct summation.
CVector convolve_sp(std::span<const Complex> x, std::span<const Complex> kernel);

/// FFT-accelerated circular correlation; agrees with the direct path to ~1e-12 relative.
/// Falls back to direct summation when N is not a power of two.
CVector correlate_circular_fast(std::span<const Complex> x, std::span<const Complex> kernel);

/// FFT-accelerated circular convolution; same fallback rule as above.
CVector convolve_circular_fast(std::span<const Complex> x, std::span<const Complex> kernel);

/// Circular index flip k'[m] = k[(-m) mod N]. correlate(x, k) == convolve_sp(x, flip_circular(k)).
CVector flip_circular(std::span<const Complex> kernel);

/// In-place radix-2 FFT; size must be a power of two. Unnormalized in both directions.
void fft_radix2(std::span<Complex> data, bool inverse);

bool is_power_of_two(std::size_t n) noexcept;

/// Throws NumericError if any component is NaN or infinite.
void require_finite(std::span<const Complex> x, const char* what);
void require_finite(std::span<const double> x, const char* what);

/// Element-wise helpers used across modules.
RVector magnitude(std::span<const Complex> x);
double max_abs(std::span<const Complex> x);
double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b);

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;
/// Inverse of softplus for y > 0.
double softplus_inverse(double y);

/// Phase-preserving shrinkage u/|u| * max(0, |u| - level), with R(0) = 0.
Complex soft_threshold(Complex u, double level) noexcept;

}  // namespace numerics
}  // namespace rflego
