#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rflego/numerics.hpp"

namespace rflego {

/// Uniform linear array dictionary. Column g is the steering vector
/// a(theta_g)[i] = exp(-j 2 pi (d/lambda) i sin(theta_g)), i = 0..M-1.
struct SteeringDictionary {
    std::size_t antennas = 0;   // M
    std::vector<double> grid;   // degrees, length G
    double spacing = 0.5;       // d / lambda
    CVector matrix;             // row-major M x G

    std::size_t grid_size() const noexcept { return grid.size(); }
    Complex at(std::size_t i, std::size_t g) const { return matrix[i * grid.size() + g]; }
    CVector column(std::size_t g) const;
    CVector steering(double theta_deg) const;

    /// A^H r, length G.
    CVector adjoint_apply(std::span<const Complex> r) const;
    /// A x, length M.
    CVector apply(std::span<const Complex> x) const;
    /// Diagonal of A^H A.
    RVector gram_diagonal() const;
    /// Index of the grid angle closest to theta_deg.
    std::size_t nearest_bin(double theta_deg) const;
};

SteeringDictionary make_steering_dictionary(std::size_t antennas, double grid_low_deg, double grid_high_deg,
                                            double grid_step_deg, double spacing = 0.5);

}  // namespace rflego
