#include "rflego/steering.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rflego/errors.hpp"

namespace rflego {

CVector SteeringDictionary::steering(double theta_deg) const {
    CVector out(antennas);
    const double s = std::sin(theta_deg * std::numbers::pi / 180.0);
    for (std::size_t i = 0; i < antennas; ++i) {
        const double phase = -2.0 * std::numbers::pi * spacing * static_cast<double>(i) * s;
        out[i] = {std::cos(phase), std::sin(phase)};
    }
    return out;
}

CVector SteeringDictionary::column(std::size_t g) const {
    CVector out(antennas);
    for (std::size_t i = 0; i < antennas; ++i) out[i] = at(i, g);
    return out;
}

CVector SteeringDictionary::adjoint_apply(std::span<const Complex> r) const {
    if (r.size() != antennas) {
        throw DimensionError("adjoint_apply: expected " + std::to_string(antennas) + " samples, got " +
                             std::to_string(r.size()));
    }
    const std::size_t g = grid.size();
    CVector out(g, Complex{});
    for (std::size_t i = 0; i < antennas; ++i) {
        const Complex* row = matrix.data() + i * g;
        for (std::size_t k = 0; k < g; ++k) out[k] += std::conj(row[k]) * r[i];
    }
    return out;
}

CVector SteeringDictionary::apply(std::span<const Complex> x) const {
    const std::size_t g = grid.size();
    if (x.size() != g) {
        throw DimensionError("apply: expected " + std::to_string(g) + " grid values, got " + std::to_string(x.size()));
    }
    CVector out(antennas, Complex{});
    for (std::size_t i = 0; i < antennas; ++i) {
        const Complex* row = matrix.data() + i * g;
        Complex acc{};
        for (std::size_t k = 0; k < g; ++k) acc += row[k] * x[k];
        out[i] = acc;
    }
    return out;
}

RVector SteeringDictionary::gram_diagonal() const {
    const std::size_t g = grid.size();
    RVector d(g, 0.0);
    for (std::size_t i = 0; i < antennas; ++i) {
        for (std::size_t k = 0; k < g; ++k) d[k] += std::norm(matrix[i * g + k]);
    }
    return d;
}

std::size_t SteeringDictionary::nearest_bin(double theta_deg) const {
    std::size_t best = 0;
    double best_d = std::abs(grid[0] - theta_deg);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double d = std::abs(grid[k] - theta_deg);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

SteeringDictionary make_steering_dictionary(std::size_t antennas, double grid_low_deg, double grid_high_deg,
                                            double grid_step_deg, double spacing) {
    if (antennas < 2) {
        throw DimensionError("steering dictionary needs at least 2 antennas");
    }
    if (!(grid_step_deg > 0.0)) {
        throw DimensionError("steering dictionary grid step must be positive");
    }
    SteeringDictionary a;
    a.antennas = antennas;
    a.spacing = spacing;
    const double span = grid_high_deg - grid_low_deg;
    if (span < 0.0) {
        throw DimensionError("steering dictionary grid is empty");
    }
    const auto count = static_cast<std::size_t>(std::floor(span / grid_step_deg + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k) {
        a.grid.push_back(grid_low_deg + static_cast<double>(k) * grid_step_deg);
    }
    const std::size_t g = a.grid.size();
    a.matrix.resize(antennas * g);
    for (std::size_t k = 0; k < g; ++k) {
        const CVector col = a.steering(a.grid[k]);
        for (std::size_t i = 0; i < antennas; ++i) a.matrix[i * g + k] = col[i];
    }
    return a;
}

}  // namespace rflego
