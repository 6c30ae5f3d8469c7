#pragma once

#include "fbx/common.hpp"
#include "fbx/quadrature.hpp"

#include <vector>

namespace fbx {

enum class RayleighBoundary {
    one_sided, ///< Theta(delta) = 0, natural condition at pi/2
    two_sided, ///< Theta(delta) = Theta(pi/2 - delta) = 0
};

struct RayleighResult {
    double a = 1.0;
    double delta = 0.0;
    RayleighBoundary boundary = RayleighBoundary::one_sided;
    double mu = 0.0;
    std::vector<double> theta;  ///< nodes, ascending
    std::vector<double> values; ///< eigenfunction, max normalized to 1
    int iterations = 0;
};

namespace detail {

// Nodes in t = pi/2 - theta on [t0, t1]: geometric near t0 (where the weight sin(t)^a is small),
// uniform beyond t_switch.
inline std::vector<double> rayleigh_mesh(double t0, double t1, int n)
{
    std::vector<double> t;
    const double t_switch = std::min(0.05, 0.5 * (t0 + t1));
    if (t0 > 0.25 * t_switch) {
        for (int i = 0; i <= n; ++i)
            t.push_back(t0 + (t1 - t0) * i / n);
        return t;
    }
    const int n_geo = n / 2;
    const int n_uni = n - n_geo;
    if (t0 == 0.0) {
        // geometric from t_switch * 1e-8 down, plus the endpoint 0
        const double lo = t_switch * 1e-8;
        t.push_back(0.0);
        for (int i = 0; i < n_geo; ++i)
            t.push_back(lo * std::pow(t_switch / lo, static_cast<double>(i) / n_geo));
    } else {
        for (int i = 0; i < n_geo; ++i)
            t.push_back(t0 * std::pow(t_switch / t0, static_cast<double>(i) / n_geo));
    }
    for (int i = 0; i <= n_uni; ++i)
        t.push_back(t_switch + (t1 - t_switch) * i / n_uni);
    return t;
}

// Thomas algorithm; a = sub, b = diag, c = super.
inline std::vector<double> solve_tridiagonal(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                                             std::vector<double> d)
{
    const std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    return x;
}

} // namespace detail

/// Smallest eigenvalue of -((cos t)^a Theta')' = mu (cos t)^a Theta by piecewise linear finite
/// elements on `elements` cells and inverse iteration. The computation runs in t = pi/2 - theta so
/// that a truncation delta near pi/2 is represented exactly.
inline RayleighResult rayleigh_min(double a, double delta, RayleighBoundary boundary, int elements = 2000)
{
    if (!(a > 0.0))
        throw DomainError("rayleigh_min: weight exponent must be positive");
    if (!(delta >= 0.0 && delta < 0.5))
        throw DomainError("rayleigh_min: delta must lie in [0, 0.5)");
    const double half_pi = 0.5 * std::numbers::pi;
    // theta in [delta, pi/2 - delta'] maps to t in [delta', pi/2 - delta]
    const double t0 = boundary == RayleighBoundary::two_sided ? delta : 0.0;
    const double t1 = half_pi - delta;
    const bool dirichlet_t0 = boundary == RayleighBoundary::two_sided;
    const auto t = detail::rayleigh_mesh(t0, t1, elements);
    const std::size_t nn = t.size();

    // assemble tridiagonal stiffness K and mass M with 4-point Gauss per element
    const auto [gx, gw] = gauss_legendre(4);
    std::vector<double> Kd(nn, 0.0), Ko(nn, 0.0), Md(nn, 0.0), Mo(nn, 0.0);
    for (std::size_t e = 0; e + 1 < nn; ++e) {
        const double len = t[e + 1] - t[e];
        double k = 0.0, m00 = 0.0, m01 = 0.0, m11 = 0.0;
        for (std::size_t q = 0; q < gx.size(); ++q) {
            const double s = 0.5 * (gx[q] + 1.0);
            const double w = 0.5 * gw[q] * len * std::pow(std::sin(t[e] + s * len), a);
            k += w;
            m00 += w * (1 - s) * (1 - s);
            m01 += w * (1 - s) * s;
            m11 += w * s * s;
        }
        k /= len * len;
        Kd[e] += k;
        Kd[e + 1] += k;
        Ko[e] -= k;
        Md[e] += m00;
        Md[e + 1] += m11;
        Mo[e] += m01;
    }
    // free unknowns: drop Dirichlet ends (t1 always; t0 when two-sided)
    const std::size_t first = dirichlet_t0 ? 1 : 0;
    const std::size_t last = nn - 2;
    const std::size_t n = last - first + 1;
    std::vector<double> sub(n, 0.0), dia(n), sup(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        dia[i] = Kd[first + i];
        if (i > 0)
            sub[i] = Ko[first + i - 1];
        if (i + 1 < n)
            sup[i] = Ko[first + i];
    }
    auto mass = [&](const std::vector<double>& x) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = Md[first + i] * x[i];
            if (i > 0)
                v += Mo[first + i - 1] * x[i - 1];
            if (i + 1 < n)
                v += Mo[first + i] * x[i + 1];
            y[i] = v;
        }
        return y;
    };
    auto stiff = [&](const std::vector<double>& x) {
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = dia[i] * x[i];
            if (i > 0)
                v += sub[i] * x[i - 1];
            if (i + 1 < n)
                v += sup[i] * x[i + 1];
            y[i] = v;
        }
        return y;
    };
    auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += x[i] * y[i];
        return s;
    };

    RayleighResult res;
    res.a = a;
    res.delta = delta;
    res.boundary = boundary;
    std::vector<double> x(n, 1.0);
    double mu = 0.0;
    for (int it = 1; it <= 200; ++it) {
        x = detail::solve_tridiagonal(sub, dia, sup, mass(x));
        const double nrm = std::sqrt(dot(x, mass(x)));
        for (double& v : x)
            v /= nrm;
        const double next = dot(x, stiff(x));
        res.iterations = it;
        if (std::abs(next - mu) <= 1e-15 * next) {
            mu = next;
            break;
        }
        mu = next;
    }
    res.mu = mu;

    std::vector<double> full(nn, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        full[first + i] = x[i];
    double mx = 0.0;
    for (double v : full)
        if (std::abs(v) > std::abs(mx))
            mx = v;
    // back to theta, ascending
    for (std::size_t i = nn; i-- > 0;) {
        res.theta.push_back(half_pi - t[i]);
        res.values.push_back(full[i] / mx);
    }
    return res;
}

/// Perturbed target (n - m + alpha/4)(1 + alpha/4) for the weight exponent a = n - m - 1.
inline double rayleigh_target(double a, double alpha)
{
    return (a + 1.0 + 0.25 * alpha) * (1.0 + 0.25 * alpha);
}

struct DeltaSearch {
    double delta = 0.0;
    double mu = 0.0;
    int bisections = 0;
};

/// Two-sided truncation delta with mu(delta) = target, by bisection in log(delta).
inline DeltaSearch find_delta_for(double a, double target, double log_lo = std::log(1e-30), double log_hi = std::log(0.45))
{
    auto mu = [&](double ld) { return rayleigh_min(a, std::exp(ld), RayleighBoundary::two_sided).mu; };
    if (!(mu(log_lo) < target && mu(log_hi) > target))
        throw DomainError("find_delta_for: target not bracketed");
    DeltaSearch ds;
    while (log_hi - log_lo > 1e-6) {
        const double mid = 0.5 * (log_lo + log_hi);
        if (mu(mid) < target)
            log_lo = mid;
        else
            log_hi = mid;
        ++ds.bisections;
    }
    ds.delta = std::exp(0.5 * (log_lo + log_hi));
    ds.mu = rayleigh_min(a, ds.delta, RayleighBoundary::two_sided).mu;
    return ds;
}

} // namespace fbx
