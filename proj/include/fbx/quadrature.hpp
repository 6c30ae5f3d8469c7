#pragma once

#include "fbx/grid.hpp"

#include <type_traits>
#include <vector>

namespace fbx {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
    std::vector<double> x(n), w(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15)
                break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return {x, w};
}

/// Directions and weights of a quadrature rule on the unit sphere S^{Dim-1}.
template <int Dim>
struct SphereSampleSet {
    std::vector<Vec<Dim>> directions;
    std::vector<double> weights;

    double weight_sum() const
    {
        double s = 0.0;
        for (double w : weights)
            s += w;
        return s;
    }
};

/// Equispaced angles on the circle.
inline SphereSampleSet<2> circle_samples(int n_theta = 256)
{
    SphereSampleSet<2> s;
    const double dt = 2.0 * std::numbers::pi / n_theta;
    for (int i = 0; i < n_theta; ++i) {
        const double t = (i + 0.5) * dt;
        s.directions.push_back(Vec<2>(std::cos(t), std::sin(t)));
        s.weights.push_back(dt);
    }
    return s;
}

/// Latitude-longitude product rule: Gauss-Legendre in cos(colatitude), equispaced longitudes.
inline SphereSampleSet<3> latlong_samples(int n_lat = 64, int n_lon = 128)
{
    SphereSampleSet<3> s;
    const auto [x, w] = gauss_legendre(n_lat);
    const double dphi = 2.0 * std::numbers::pi / n_lon;
    for (int i = 0; i < n_lat; ++i) {
        const double ct = x[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < n_lon; ++j) {
            const double phi = (j + 0.5) * dphi;
            s.directions.push_back(Vec<3>(st * std::cos(phi), st * std::sin(phi), ct));
            s.weights.push_back(w[i] * dphi);
        }
    }
    return s;
}

template <int Dim>
SphereSampleSet<Dim> default_sphere_samples()
{
    if constexpr (Dim == 2)
        return circle_samples();
    else
        return latlong_samples();
}

/// Radii below this multiple of h are rejected by every integral operation.
inline constexpr double kReliableRadiusCells = 4.0;

template <int Dim>
void check_reliable_radius(const GridField<Dim>& g, double rho)
{
    if (!(rho >= kReliableRadiusCells * g.h() * (1.0 - 1e-12)))
        throw RadiusError("radius below the reliable floor 4h");
}

template <int Dim>
void check_ball_inside(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x0, double rho)
{
    const double h = g.h();
    for (int d = 0; d < Dim; ++d)
        if (x0[d] - rho < g.domain().lower[d] + h - 1e-12 * h || x0[d] + rho > g.domain().upper[d] - h + 1e-12 * h)
            throw RadiusError("sphere or ball leaves the valid region of the grid");
}

/// rho^{Dim-1} * sum_k w_k * transform(x_k, field(x_k)) over x_k = x0 + rho * direction_k.
template <int Dim, class Transform>
double sphere_integral(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x0, double rho, const SphereSampleSet<Dim>& samples,
                       Transform&& transform)
{
    check_reliable_radius(g, rho);
    check_ball_inside(g, x0, rho);
    double s = 0.0;
    for (std::size_t k = 0; k < samples.directions.size(); ++k) {
        const Vec<Dim> x = x0 + rho * samples.directions[k];
        s += samples.weights[k] * transform(x, detail::interpolate_unchecked(g, x));
    }
    return std::pow(rho, Dim - 1) * s;
}

template <int Dim>
double sphere_integral(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x0, double rho, const SphereSampleSet<Dim>& samples)
{
    return sphere_integral(g, x0, rho, samples, [](const Vec<Dim>&, double v) { return v; });
}

enum class BallRule {
    midpoint, ///< cell-center sum over centers inside the ball
    subcell,  ///< midpoint inside, sub-sampled partial cells on the boundary layer
};

/// Visits the quadrature points of a ball: visit_node(linear index, weight) for whole cells and
/// visit_point(position, weight) for sub-samples of cells cut by the sphere (subcell rule only).
template <int Dim, class NodeVisit, class PointVisit>
void for_each_ball_sample(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x0, double rho, BallRule rule, int sub,
                          NodeVisit&& visit_node, PointVisit&& visit_point)
{
    const double h = g.h();
    const double cell_vol = std::pow(h, Dim);
    const double half_diag = 0.5 * h * std::sqrt(static_cast<double>(Dim));
    MultiIndex<Dim> lo{}, hi{};
    for (int d = 0; d < Dim; ++d) {
        lo[d] = std::max(0, static_cast<int>(std::floor((x0[d] - rho - g.domain().lower[d]) / h)) - 1);
        hi[d] = std::min(g.extents()[d] - 1, static_cast<int>(std::ceil((x0[d] + rho - g.domain().lower[d]) / h)) + 1);
    }
    MultiIndex<Dim> idx = lo;
    const int nsub = (Dim == 2) ? sub * sub : sub * sub * sub;
    const double sub_vol = cell_vol / nsub;
    while (true) {
        const Vec<Dim> c = g.position(idx);
        const double dist = (c - x0).norm();
        if (rule == BallRule::midpoint || dist <= rho - half_diag || dist >= rho + half_diag) {
            if (dist < rho)
                visit_node(g.linear(idx), cell_vol);
        } else {
            for (int s = 0; s < nsub; ++s) {
                Vec<Dim> x = c;
                int rem = s;
                for (int d = 0; d < Dim; ++d) {
                    x[d] += ((rem % sub) + 0.5) * h / sub - 0.5 * h;
                    rem /= sub;
                }
                if ((x - x0).norm() < rho)
                    visit_point(x, sub_vol);
            }
        }
        int d = Dim - 1;
        while (d >= 0 && ++idx[d] > hi[d]) {
            idx[d] = lo[d];
            --d;
        }
        if (d < 0)
            break;
    }
}

/// Sum of field values times cell volume over cells whose centers lie in B_rho(x0).
template <int Dim>
double ball_integral(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x0, double rho, BallRule rule = BallRule::midpoint,
                     int sub = 8)
{
    check_reliable_radius(g, rho);
    check_ball_inside(g, x0, rho);
    double s = 0.0;
    for_each_ball_sample(
        g, x0, rho, rule, sub, [&](std::size_t l, double w) { s += w * g[l]; },
        [&](const Vec<Dim>& x, double w) { s += w * detail::interpolate_unchecked(g, x); });
    return s;
}

} // namespace fbx
