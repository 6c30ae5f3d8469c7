#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fbx {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using MultiIndex = std::array<int, Dim>;

/// Raised for malformed inputs: bad domains, spacings, matrices, configs.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a radius is below the reliable floor or a ball/sphere leaves the grid.
class RadiusError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Raised for numerical breakdown (non-convergence, NaN, singular solves).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Area of the unit sphere S^{n-1} in R^n.
inline double unit_sphere_area(int n)
{
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n)
{
    return unit_sphere_area(n) / n;
}

/// Contact threshold for extracting {u = 0} from a discrete solution.
inline double contact_threshold(double h)
{
    return 0.1 * h * h;
}

} // namespace fbx
