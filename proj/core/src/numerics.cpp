#include "rflego/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rflego/errors.hpp"

namespace rflego::numerics {

namespace {

void check_nonempty(std::span<const Complex> x, std::span<const Complex> kernel) {
    if (x.empty() || kernel.empty()) {
        throw DimensionError("correlation operands must be non-empty");
    }
}

}  // namespace

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

CVector correlate(std::span<const Complex> x, std::span<const Complex> kernel, CorrelationMode mode) {
    check_nonempty(x, kernel);
    const std::size_t nx = x.size();
    const std::size_t nk = kernel.size();

    switch (mode) {
        case CorrelationMode::Circular: {
            if (nk > nx) {
                throw DimensionError("circular correlation: kernel longer than signal (" + std::to_string(nk) +
                                     " > " + std::to_string(nx) + ")");
            }
            CVector out(nx);
            for (std::size_t k = 0; k < nx; ++k) {
                Complex acc{};
                for (std::size_t n = 0; n < nk; ++n) {
                    acc += x[(k + n) % nx] * kernel[n];
                }
                out[k] = acc;
            }
            return out;
        }
        case CorrelationMode::Same: {
            if (nk > nx) {
                throw DimensionError("same-mode correlation: kernel longer than signal");
            }
            CVector out(nx);
            for (std::size_t k = 0; k < nx; ++k) {
                Complex acc{};
                const std::size_t limit = std::min(nk, nx - k);
                for (std::size_t n = 0; n < limit; ++n) {
                    acc += x[k + n] * kernel[n];
                }
                out[k] = acc;
            }
            return out;
        }
        case CorrelationMode::Full: {
            const std::size_t len = nx + nk - 1;
            CVector out(len);
            for (std::size_t j = 0; j < len; ++j) {
                Complex acc{};
                for (std::size_t n = 0; n < nk; ++n) {
                    // x index j + n - (nk - 1), kept in signed arithmetic
                    const auto idx = static_cast<std::ptrdiff_t>(j + n) - static_cast<std::ptrdiff_t>(nk - 1);
                    if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(nx)) {
                        acc += x[static_cast<std::size_t>(idx)] * kernel[n];
                    }
                }
                out[j] = acc;
            }
            return out;
        }
    }
    throw CapabilityError("unknown correlation mode");
}

CVector convolve_sp(std::span<const Complex> x, std::span<const Complex> kernel) {
    check_nonempty(x, kernel);
    if (x.size() != kernel.size()) {
        throw DimensionError("convolve_sp: length mismatch (" + std::to_string(x.size()) + " vs " +
                             std::to_string(kernel.size()) + ")");
    }
    const std::size_t n = x.size();
    CVector out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc{};
        for (std::size_t m = 0; m < n; ++m) {
            acc += x[(k + n - m) % n] * kernel[m];
        }
        out[k] = acc;
    }
    return out;
}

CVector flip_circular(std::span<const Complex> kernel) {
    const std::size_t n = kernel.size();
    CVector out(n);
    for (std::size_t m = 0; m < n; ++m) {
        out[m] = kernel[(n - m) % n];
    }
    return out;
}

void fft_radix2(std::span<Complex> data, bool inverse) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) {
        throw DimensionError("fft_radix2 requires a power-of-two length, got " + std::to_string(n));
    }
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(data[i], data[j]);
        }
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        // Twiddles evaluated directly per index keep the error at O(eps log n).
        for (std::size_t k = 0; k < half; ++k) {
            const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const Complex w{std::cos(angle), std::sin(angle)};
            for (std::size_t i = 0; i < n; i += len) {
                const Complex u = data[i + k];
                const Complex v = data[i + k + half] * w;
                data[i + k] = u + v;
                data[i + k + half] = u - v;
            }
        }
    }
}

CVector correlate_circular_fast(std::span<const Complex> x, std::span<const Complex> kernel) {
    check_nonempty(x, kernel);
    const std::size_t n = x.size();
    if (kernel.size() != n) {
        throw DimensionError("fast circular correlation expects equal lengths");
    }
    if (!is_power_of_two(n)) {
        return correlate(x, kernel, CorrelationMode::Circular);
    }
    // corr(x, k) = IFFT( FFT(x) * conj(FFT(conj(k))) ) / n
    CVector fx(x.begin(), x.end());
    CVector fk(n);
    for (std::size_t i = 0; i < n; ++i) {
        fk[i] = std::conj(kernel[i]);
    }
    fft_radix2(fx, false);
    fft_radix2(fk, false);
    for (std::size_t i = 0; i < n; ++i) {
        fx[i] *= std::conj(fk[i]);
    }
    fft_radix2(fx, true);
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : fx) {
        v *= scale;
    }
    return fx;
}

CVector convolve_circular_fast(std::span<const Complex> x, std::span<const Complex> kernel) {
    check_nonempty(x, kernel);
    const std::size_t n = x.size();
    if (kernel.size() != n) {
        throw DimensionError("fast circular convolution expects equal lengths");
    }
    if (!is_power_of_two(n)) {
        return convolve_sp(x, kernel);
    }
    CVector fx(x.begin(), x.end());
    CVector fk(kernel.begin(), kernel.end());
    fft_radix2(fx, false);
    fft_radix2(fk, false);
    for (std::size_t i = 0; i < n; ++i) {
        fx[i] *= fk[i];
    }
    fft_radix2(fx, true);
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : fx) {
        v *= scale;
    }
    return fx;
}

void require_finite(std::span<const Complex> x, const char* what) {
    for (const auto& v : x) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            throw NumericError(std::string(what) + ": non-finite component");
        }
    }
}

void require_finite(std::span<const double> x, const char* what) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(what) + ": non-finite component");
        }
    }
}

RVector magnitude(std::span<const Complex> x) {
    RVector out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [](const Complex& v) { return std::abs(v); });
    return out;
}

double max_abs(std::span<const Complex> x) {
    double m = 0.0;
    for (const auto& v : x) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) {
        throw DimensionError("max_abs_diff: length mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

double softplus(double x) noexcept {
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_inverse(double y) {
    if (!(y > 0.0)) {
        throw NumericError("softplus_inverse requires a positive argument");
    }
    // log(e^y - 1), stable for large y
    return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

Complex soft_threshold(Complex u, double level) noexcept {
    const double mag = std::abs(u);
    if (mag <= level || mag == 0.0) {
        return {0.0, 0.0};
    }
    return u * ((mag - level) / mag);
}

}  // namespace rflego::numerics
