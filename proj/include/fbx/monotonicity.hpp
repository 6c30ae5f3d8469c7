#pragma once

#include "fbx/space.hpp"

#include <iomanip>
#include <sstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fbx {

/// Energy densities at one radius, scaled to the dimension n of the space.
struct RadialQuantities {
    double r = 0.0;
    double H = 0.0;   ///< r^{1-n} int_{dB_r} w^2
    double D = 0.0;   ///< r^{2-n} int_{B_r} |grad w|^2
    double phi = std::numeric_limits<double>::quiet_NaN();
    double W = 0.0;   ///< Weiss energy of u itself
    double density = 0.0;
    bool phi_defined = false;
    bool valid = true;  ///< false when the radius could not be evaluated
    std::string error;

    double H_lambda(double lambda) const { return H / std::pow(r, 2.0 * lambda); }
    double W_lambda(double lambda) const { return (D - lambda * H) / std::pow(r, 2.0 * lambda); }
};

namespace detail {

inline RadialQuantities radial_quantities(int n, double r, const RadiusIntegrals& I, double sup_norm)
{
    RadialQuantities q;
    q.r = r;
    q.H = std::pow(r, 1 - n) * I.sphere_w2;
    q.D = std::pow(r, 2 - n) * I.ball_grad_w2;
    q.W = std::pow(r, -n - 2) * (I.ball_grad_u2 + 2.0 * I.ball_u) - 2.0 * std::pow(r, -n - 3) * I.sphere_u2;
    q.density = I.ball_volume > 0.0 ? I.contact_volume / I.ball_volume : 0.0;
    const double floor = 1e-14 * sup_norm * sup_norm;
    if (q.H > floor) {
        q.phi = q.D / q.H;
        q.phi_defined = true;
    }
    return q;
}

} // namespace detail

template <class Space>
RadialQuantities radial_quantities(const Space& space, const Eigen::VectorXd& x0, double r, const Polynomial& P)
{
    return detail::radial_quantities(space.dim(), r, space.integrals(x0, r, P), space.sup_norm());
}

/// Weiss energy r^{-n-2} int_B (|grad u|^2 + 2u) - 2 r^{-n-3} int_dB u^2.
template <class Space>
double weiss(const Space& space, const Eigen::VectorXd& x0, double r)
{
    return radial_quantities(space, x0, r, space.zero_polynomial()).W;
}

/// Almgren frequency of w = u - P at radius r. Throws NumericalError when H is below its floor.
template <class Space>
double frequency(const Space& space, const Polynomial& P, const Eigen::VectorXd& x0, double r)
{
    const auto q = radial_quantities(space, x0, r, P);
    if (!q.phi_defined)
        throw NumericalError("frequency: H(r) below the floor, frequency undefined");
    return q.phi;
}

template <class Space>
double h_lambda(const Space& space, const Polynomial& P, const Eigen::VectorXd& x0, double r, double lambda)
{
    return radial_quantities(space, x0, r, P).H_lambda(lambda);
}

template <class Space>
double modified_weiss(const Space& space, const Polynomial& P, const Eigen::VectorXd& x0, double r, double lambda)
{
    return radial_quantities(space, x0, r, P).W_lambda(lambda);
}

inline const std::vector<double>& default_weiss_lambdas()
{
    static const std::vector<double> l{2.0, 2.5, 3.0, 4.0};
    return l;
}

struct RadialProfile {
    std::vector<RadialQuantities> rows; ///< descending in r
    std::vector<double> lambdas = default_weiss_lambdas();
};

/// Geometric radii r_max * theta^j, j = 0..count-1, descending, stopping at the reliable floor 4h.
inline std::vector<double> geometric_radii(double r_max, double theta, int count, double h)
{
    if (!(theta > 0.0 && theta < 1.0) || count < 1 || !(r_max > 0.0))
        throw DomainError("geometric_radii: need 0 < theta < 1, count >= 1, r_max > 0");
    std::vector<double> out;
    for (int j = 0; j < count; ++j) {
        const double r = r_max * std::pow(theta, j);
        if (r < kReliableRadiusCells * h * (1.0 - 1e-12))
            break;
        out.push_back(r);
    }
    return out;
}

template <class Space>
RadialProfile radial_profile(const Space& space, const Polynomial& P, const Eigen::VectorXd& x0,
                             const std::vector<double>& radii)
{
    RadialProfile p;
    for (double r : radii) {
        try {
            p.rows.push_back(radial_quantities(space, x0, r, P));
        } catch (const std::exception& e) {
            RadialQuantities q;
            q.r = r;
            q.valid = false;
            q.error = e.what();
            q.H = q.D = q.W = q.density = std::numeric_limits<double>::quiet_NaN();
            p.rows.push_back(q);
        }
    }
    return p;
}

inline void write_profile_csv(const RadialProfile& p, std::ostream& os)
{
    const auto old = os.precision(17);
    os << "r,H,D,phi,W,H2,W2,W25,W3,W4,density\n";
    for (const auto& q : p.rows) {
        os << q.r << ',' << q.H << ',' << q.D << ',';
        if (q.phi_defined)
            os << q.phi;
        else
            os << "nan";
        os << ',' << q.W << ',' << q.H_lambda(2.0) << ',' << q.W_lambda(2.0) << ',' << q.W_lambda(2.5) << ','
           << q.W_lambda(3.0) << ',' << q.W_lambda(4.0) << ',' << q.density << '\n';
    }
    os.precision(old);
}

struct MonotonicityColumn {
    std::string name;
    double worst_violation = 0.0; ///< largest relative decrease between adjacent radii
    double r_small = 0.0;         ///< radii of the worst pair
    double r_big = 0.0;
    bool pass = true;
};

struct MonotonicityReport {
    std::vector<MonotonicityColumn> columns;
    double tol_rel = 0.05;

    bool pass() const
    {
        return std::all_of(columns.begin(), columns.end(), [](const auto& c) { return c.pass; });
    }
    const MonotonicityColumn& column(const std::string& name) const
    {
        for (const auto& c : columns)
            if (c.name == name)
                return c;
        throw DomainError("MonotonicityReport: no column " + name);
    }
};

namespace detail {

// `magnitude` bounds the size of the terms that make up each value; by default |v| itself.
inline MonotonicityColumn check_nondecreasing(const std::string& name, const std::vector<double>& r,
                                              const std::vector<double>& v, double tol_rel,
                                              const std::vector<double>* magnitude = nullptr)
{
    MonotonicityColumn c;
    c.name = name;
    double scale = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = magnitude ? (*magnitude)[i] : v[i];
        if (std::isfinite(x))
            scale = std::max(scale, std::abs(x));
    }
    // rows run from the largest radius down
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        if (!std::isfinite(v[i]) || !std::isfinite(v[i + 1]))
            continue;
        const double rise = scale > 0.0 ? (v[i + 1] - v[i]) / scale : 0.0;
        if (rise > c.worst_violation) {
            c.worst_violation = rise;
            c.r_small = r[i + 1];
            c.r_big = r[i];
        }
    }
    c.pass = c.worst_violation <= tol_rel;
    return c;
}

} // namespace detail

/// Checks phi, H_2, W and W_lambda for nondecreasing behaviour in r.
inline MonotonicityReport monotonicity_report(const RadialProfile& p, double tol_rel = 0.05)
{
    MonotonicityReport rep;
    rep.tol_rel = tol_rel;
    std::vector<double> r, phi, h2, w;
    for (const auto& q : p.rows) {
        r.push_back(q.r);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        phi.push_back(q.valid && q.phi_defined ? q.phi : nan);
        // below the H floor w is numerically zero and so are H_2 and W_lambda
        h2.push_back(!q.valid ? nan : q.phi_defined ? q.H_lambda(2.0) : 0.0);
        w.push_back(q.valid ? q.W : nan);
    }
    rep.columns.push_back(detail::check_nondecreasing("phi", r, phi, tol_rel));
    rep.columns.push_back(detail::check_nondecreasing("H2", r, h2, tol_rel));
    rep.columns.push_back(detail::check_nondecreasing("W", r, w, tol_rel));
    for (double lam : p.lambdas) {
        // W_lambda = D_lambda - lambda H_lambda nearly cancels when phi is close to lambda, so its
        // violations are measured against the size of the two terms
        std::vector<double> wl, mag;
        for (const auto& q : p.rows) {
            const bool live = q.valid && q.phi_defined;
            wl.push_back(!q.valid ? std::numeric_limits<double>::quiet_NaN() : live ? q.W_lambda(lam) : 0.0);
            mag.push_back(live ? (std::abs(q.D) + lam * q.H) / std::pow(q.r, 2.0 * lam) : 0.0);
        }
        std::ostringstream name;
        name << "W_" << lam;
        rep.columns.push_back(detail::check_nondecreasing(name.str(), r, wl, tol_rel, &mag));
    }
    return rep;
}

} // namespace fbx
