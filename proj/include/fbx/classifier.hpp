#pragma once

#include "fbx/monotonicity.hpp"
#include "fbx/vi_solver.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fbx {

inline constexpr double kAnomalousSlack = 0.1;

/// Midpoints of the faces separating marked from unmarked cells.
template <int Dim>
std::vector<Vec<Dim>> free_boundary_points(const GridField<Dim>& geometry, const std::vector<std::uint8_t>& mask)
{
    if (mask.size() != geometry.size())
        throw DomainError("free_boundary_points: mask size does not match the grid");
    std::vector<Vec<Dim>> out;
    for (std::size_t l = 0; l < mask.size(); ++l) {
        const auto idx = geometry.multi(l);
        for (int d = 0; d < Dim; ++d) {
            if (idx[d] + 1 >= geometry.extents()[d])
                continue;
            const std::size_t n = l + geometry.strides()[d];
            if (mask[l] != mask[n]) {
                Vec<Dim> x = geometry.position(l);
                x[d] += 0.5 * geometry.h();
                out.push_back(x);
            }
        }
    }
    return out;
}

enum class PointKind { regular, singular, unresolved };

inline const char* to_string(PointKind k)
{
    switch (k) {
    case PointKind::regular:
        return "regular";
    case PointKind::singular:
        return "singular";
    default:
        return "unresolved";
    }
}

struct BlowupFit {
    Eigen::VectorXd e;                        ///< half-space direction
    double offset = 0.0;                      ///< c in 1/2 max(e.(x - x0) + c, 0)^2
    double halfspace_residual = 0.0;          ///< RMS over samples
    std::optional<QuadraticBlowup> A;         ///< quadratic fit, tr A = 1
    Eigen::MatrixXd A_raw;                    ///< unprojected fitted matrix
    double quadratic_residual = 0.0;
    double data_norm = 0.0;                   ///< RMS of the normalized samples
    PointKind winner = PointKind::unresolved;
    std::string reason;
};

namespace detail {

inline std::vector<Eigen::VectorXd> search_directions(int n)
{
    std::vector<Eigen::VectorXd> dirs;
    if (n == 2) {
        for (int j = 0; j < 720; ++j) {
            const double t = 2.0 * std::numbers::pi * j / 720;
            Eigen::VectorXd d(2);
            d << std::cos(t), std::sin(t);
            dirs.push_back(d);
        }
        return dirs;
    }
    if (n != 3)
        throw DomainError("fit_blowup: direction search implemented for n = 2, 3");
    // Fibonacci spiral
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < 1024; ++j) {
        const double z = 1.0 - (j + 0.5) * 2.0 / 1024;
        const double rr = std::sqrt(1.0 - z * z);
        Eigen::VectorXd d(3);
        d << rr * std::cos(golden * j), rr * std::sin(golden * j), z;
        dirs.push_back(d);
    }
    return dirs;
}

inline double halfspace_sse(const std::vector<Eigen::VectorXd>& om, const std::vector<double>& rho,
                            const std::vector<double>& d, const Eigen::VectorXd& e, double c)
{
    double s = 0.0;
    for (std::size_t i = 0; i < om.size(); ++i) {
        const double t = std::max(e.dot(om[i]) + c / rho[i], 0.0);
        const double r = d[i] - 0.5 * t * t;
        s += r * r;
    }
    return s;
}

} // namespace detail

/// Fits the two blow-up models to samples (x_i, u_i) taken near radius r_fit, each normalized
/// as u_i / |x_i|^2 at the direction x_i / |x_i|.
inline BlowupFit fit_blowup_samples(const std::vector<FitSample>& samples, int n)
{
    if (samples.size() < 6)
        throw DomainError("fit_blowup: too few samples");
    std::vector<Eigen::VectorXd> om;
    std::vector<double> d, radius;
    for (const auto& s : samples) {
        const double rho = s.x.norm();
        om.push_back(s.x / rho);
        radius.push_back(rho);
        d.push_back(s.value / (rho * rho));
    }
    const double rho_min = *std::min_element(radius.begin(), radius.end());
    const double N = static_cast<double>(d.size());
    BlowupFit fit;
    double dn = 0.0;
    for (double v : d)
        dn += v * v;
    fit.data_norm = std::sqrt(dn / N);

    // half-space 1/2 max(e.x + c, 0)^2: coarse search over e with c = 0, then Gauss-Newton in
    // (e on the sphere, c). The offset c absorbs a center that is off the interface by a
    // fraction of a cell, as face midpoints are.
    const auto dirs = detail::search_directions(n);
    Eigen::VectorXd e = dirs.front();
    double c_off = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : dirs) {
        const double s = detail::halfspace_sse(om, radius, d, c, 0.0);
        if (s < best) {
            best = s;
            e = c;
        }
    }
    for (int it = 0; it < 20; ++it) {
        // tangent basis at e
        Eigen::MatrixXd T(n, n - 1);
        {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(e);
            const Eigen::MatrixXd Q = qr.householderQ();
            T = Q.rightCols(n - 1);
        }
        Eigen::MatrixXd J(om.size(), n);
        Eigen::VectorXd res(om.size());
        for (std::size_t i = 0; i < om.size(); ++i) {
            const double t = std::max(e.dot(om[i]) + c_off / radius[i], 0.0);
            res[i] = d[i] - 0.5 * t * t;
            J.block(i, 0, 1, n - 1) = (t * om[i]).transpose() * T;
            J(i, n - 1) = t / radius[i];
        }
        const Eigen::VectorXd step = J.colPivHouseholderQr().solve(res);
        if (!step.allFinite())
            break;
        const Eigen::VectorXd cand = (e + T * step.head(n - 1)).normalized();
        const double c_cand = std::clamp(c_off + step[n - 1], -0.5 * rho_min, 0.5 * rho_min);
        const double s = detail::halfspace_sse(om, radius, d, cand, c_cand);
        if (s <= best) {
            const bool done = best - s <= 1e-14 * best;
            best = s;
            e = cand;
            c_off = c_cand;
            if (done)
                break;
        } else {
            break;
        }
    }
    fit.e = e;
    fit.offset = c_off;
    fit.halfspace_residual = std::sqrt(best / N);

    // quadratic with tr A = 1 eliminated: A_{n-1,n-1} = 1 - sum of the other diagonal entries
    std::vector<std::pair<int, int>> params;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            if (!(i == n - 1 && j == n - 1))
                params.push_back({i, j});
    Eigen::MatrixXd M(om.size(), params.size());
    Eigen::VectorXd rhs(om.size());
    for (std::size_t s = 0; s < om.size(); ++s) {
        const auto& w = om[s];
        const double last = 0.5 * w[n - 1] * w[n - 1];
        rhs[s] = d[s] - last;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const auto [i, j] = params[k];
            if (i == j)
                M(s, k) = 0.5 * w[i] * w[i] - last;
            else
                M(s, k) = w[i] * w[j];
        }
    }
    const Eigen::VectorXd coef = M.colPivHouseholderQr().solve(rhs);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    double tr = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto [i, j] = params[k];
        A(i, j) = A(j, i) = coef[k];
        if (i == j)
            tr += coef[k];
    }
    A(n - 1, n - 1) = 1.0 - tr;
    fit.A_raw = A;
    fit.quadratic_residual = std::sqrt((M * coef - rhs).squaredNorm() / N);
    fit.A = QuadraticBlowup::unchecked(A);

    const double lo = std::min(fit.halfspace_residual, fit.quadratic_residual);
    if (lo > 0.2 * fit.data_norm) {
        fit.winner = PointKind::unresolved;
        fit.reason = "both blow-up residuals exceed 0.2 of the data norm";
    } else {
        fit.winner = fit.halfspace_residual < fit.quadratic_residual ? PointKind::regular : PointKind::singular;
    }
    return fit;
}

/// Blow-up fit from the grid nodes in the shell r_fit - h <= |x - x0| <= r_fit + h.
template <class Space>
BlowupFit fit_blowup(const Space& space, const Eigen::VectorXd& x0, double r_fit)
{
    if (!(r_fit >= kReliableRadiusCells * space.h() * (1.0 - 1e-12)))
        throw RadiusError("fit_blowup: radius below the reliable floor 4h");
    const double h = space.h();
    return fit_blowup_samples(space.annulus_samples(x0, r_fit - h, r_fit + h), space.dim());
}

enum class FrequencyMethod { slope, plateau, combined };

struct FrequencyEstimate {
    double value = std::numeric_limits<double>::quiet_NaN();
    FrequencyMethod method = FrequencyMethod::combined;
    double slope_value = std::numeric_limits<double>::quiet_NaN();
    double plateau_value = std::numeric_limits<double>::quiet_NaN();
    double r_lo = 0.0, r_hi = 0.0;
    double residual = 0.0;     ///< RMS residual of the log H fit
    double disagreement = 0.0; ///< |slope - plateau|
    bool resolved = false;
    std::string reason;
};

inline const char* to_string(FrequencyMethod m)
{
    switch (m) {
    case FrequencyMethod::slope:
        return "slope";
    case FrequencyMethod::plateau:
        return "plateau";
    default:
        return "combined";
    }
}

namespace detail {

struct LineFit {
    double slope = 0.0, intercept = 0.0, residual = 0.0;
};

inline LineFit line_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LineFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

} // namespace detail

/// lambda_* from the rows of a profile with r in [r_lo, r_hi]. Without an explicit window the
/// smallest reliable decade of the profile is used.
inline FrequencyEstimate estimate_frequency(const RadialProfile& profile, std::optional<std::pair<double, double>> window = {})
{
    FrequencyEstimate est;
    double r_min = std::numeric_limits<double>::infinity();
    // smallest radius where the frequency is defined
    for (const auto& q : profile.rows)
        if (q.valid && q.phi_defined)
            r_min = std::min(r_min, q.r);
    est.r_lo = window ? window->first : r_min;
    est.r_hi = window ? window->second : 10.0 * r_min;
    std::vector<double> lr, lh, phi;
    for (const auto& q : profile.rows) {
        if (!q.valid || q.r < est.r_lo * (1 - 1e-12) || q.r > est.r_hi * (1 + 1e-12))
            continue;
        if (!q.phi_defined) {
            est.reason = "H(r) below the floor inside the window";
            return est;
        }
        lr.push_back(std::log(q.r));
        lh.push_back(std::log(q.H));
        phi.push_back(q.phi);
    }
    if (lr.size() < 8) {
        est.reason = "frequency window too short (fewer than 8 valid radii)";
        return est;
    }
    const auto fit = detail::line_fit(lr, lh);
    est.slope_value = 0.5 * fit.slope;
    est.residual = fit.residual;
    double s = 0.0;
    for (double p : phi)
        s += p;
    est.plateau_value = s / phi.size();
    est.disagreement = std::abs(est.slope_value - est.plateau_value);
    if (est.disagreement <= 0.2) {
        est.value = est.plateau_value;
        est.method = FrequencyMethod::combined;
        est.resolved = true;
    } else {
        est.reason = "slope and plateau estimators disagree by more than 0.2";
    }
    return est;
}

/// Log-log slope of contact density against r. +infinity when fewer than three rows carry
/// contact.
inline double density_exponent(const RadialProfile& profile, std::optional<std::pair<double, double>> window = {})
{
    std::vector<double> lr, ld;
    for (const auto& q : profile.rows) {
        if (!q.valid || !(q.density > 0.0))
            continue;
        if (window && (q.r < window->first * (1 - 1e-12) || q.r > window->second * (1 + 1e-12)))
            continue;
        lr.push_back(std::log(q.r));
        ld.push_back(std::log(q.density));
    }
    if (lr.size() < 3)
        return std::numeric_limits<double>::infinity();
    return detail::line_fit(lr, ld).slope;
}

struct ClassifierConfig {
    double tau_eig = kKernelEigenThreshold;
    double tau_a = kAnomalousSlack;
    std::optional<double> r_fit;                       ///< default: 4h
    double r_max = 0.4;                                ///< largest profile radius
    double theta = std::pow(2.0, -0.25);
    std::optional<std::pair<double, double>> window;   ///< frequency window
    std::optional<Polynomial> p_override;              ///< use instead of the fitted blow-up
};

struct PointClassification {
    Eigen::VectorXd x0;
    PointKind kind = PointKind::unresolved;
    BlowupFit fit;
    std::optional<KernelStratum> stratum;
    int m = -1;                       ///< stratum dimension in the ambient space
    FrequencyEstimate lambda_star;
    bool anomalous = false;
    double tie_density = std::numeric_limits<double>::quiet_NaN();
    RadialProfile profile;
    std::string reason;

    std::string label() const
    {
        if (kind != PointKind::singular)
            return "";
        return anomalous ? "anomalous" : "generic";
    }
};

template <class Space>
PointClassification classify_point(const Space& space, const Eigen::VectorXd& x0, const ClassifierConfig& cfg = {})
{
    PointClassification pc;
    pc.x0 = x0;
    const double r_fit = cfg.r_fit.value_or(kReliableRadiusCells * space.h());
    pc.fit = fit_blowup(space, x0, r_fit);
    PointKind kind = pc.fit.winner;
    if (kind == PointKind::unresolved) {
        pc.reason = pc.fit.reason;
        return pc;
    }
    const double a = pc.fit.halfspace_residual, b = pc.fit.quadratic_residual;
    if (std::abs(a - b) <= 0.1 * std::max(a, b)) {
        pc.tie_density = space.contact_density(x0, r_fit);
        if (pc.tie_density >= 0.3 && pc.tie_density <= 0.7)
            kind = PointKind::regular;
        else if (pc.tie_density < 0.1)
            kind = PointKind::singular;
        else {
            pc.reason = "residuals tie and contact density is inconclusive";
            return pc;
        }
    }
    if (kind == PointKind::regular) {
        pc.kind = kind;
        return pc;
    }
    pc.stratum = pc.fit.A->stratum(cfg.tau_eig);
    pc.m = pc.stratum->m + (space.ambient_dim() - space.dim());
    const Polynomial P = cfg.p_override ? *cfg.p_override : space.blowup_polynomial(*pc.fit.A);
    pc.profile = radial_profile(space, P, x0, geometric_radii(cfg.r_max, cfg.theta, 200, space.h()));
    pc.lambda_star = estimate_frequency(pc.profile, cfg.window);
    if (!pc.lambda_star.resolved) {
        pc.reason = pc.lambda_star.reason;
        return pc;
    }
    pc.kind = PointKind::singular;
    pc.anomalous = pc.lambda_star.value < 3.0 - cfg.tau_a;
    return pc;
}

struct ThirdOrderFit {
    Eigen::Vector2d normal;       ///< unit normal of L
    double coefficient = 0.0;     ///< q = c Re((nu.x + i t.x)^3)
    Eigen::Vector2d basis_coefficients = Eigen::Vector2d::Zero(); ///< in {rho^3 cos 3t, rho^3 sin 3t}
    Polynomial q{2};
    double residual = 0.0;
    double data_norm = 0.0;
    bool rejected = false;        ///< fit residual above 0.5 of the data norm, q set to 0
    RadialProfile profile;        ///< of v = u - p_* - q
    std::vector<double> h3;       ///< H_3(r, v), rows as in profile
    double worst_negative_slope = 0.0;
};

/// The cubic harmonic Re((s + i t)^3) = s^3 - 3 s t^2, s = nu.x, t = (L direction).x, which
/// vanishes on L = {s = 0}.
inline Polynomial constrained_cubic(const Eigen::Vector2d& nu)
{
    const Eigen::Vector2d tl(-nu[1], nu[0]);
    const Polynomial s(2, {Monomial{nu[0], {1, 0, 0}}, Monomial{nu[1], {0, 1, 0}}});
    const Polynomial t(2, {Monomial{tl[0], {1, 0, 0}}, Monomial{tl[1], {0, 1, 0}}});
    return s * s * s - 3.0 * (s * t * t);
}

template <class Space>
ThirdOrderFit third_order_fit(const Space& space, const QuadraticBlowup& p_star, const Eigen::VectorXd& x0,
                              const std::vector<double>& radii, std::optional<double> r_fit = {})
{
    static_assert(std::is_same_v<Space, GridSpace<2>>, "third_order_fit is two-dimensional");
    const auto st = p_star.stratum();
    if (st.m != 1)
        throw DomainError("third_order_fit: needs a singular point with m = 1");
    ThirdOrderFit out;
    out.normal = st.complement.front();
    const Polynomial P = to_polynomial(p_star);
    const Polynomial basis = constrained_cubic(out.normal);
    const double h = space.h();
    const double rf = r_fit.value_or(kReliableRadiusCells * h);
    const auto samples = space.annulus_samples(x0, rf - h, rf + h);
    double sdd = 0.0, sbb = 0.0, sbd = 0.0;
    std::vector<std::pair<double, double>> db;
    for (const auto& s : samples) {
        const Vec<2> x = s.x;
        const double r3 = std::pow(x.norm(), 3);
        const double dv = (s.value - P(x)) / r3;
        const double bv = basis(x) / r3;
        db.push_back({dv, bv});
        sdd += dv * dv;
        sbb += bv * bv;
        sbd += bv * dv;
    }
    const double N = static_cast<double>(samples.size());
    out.coefficient = sbd / sbb;
    double ss = 0.0;
    for (auto [dv, bv] : db)
        ss += (dv - out.coefficient * bv) * (dv - out.coefficient * bv);
    out.residual = std::sqrt(ss / N);
    out.data_norm = std::sqrt(sdd / N);
    if (out.residual > 0.5 * out.data_norm) {
        out.rejected = true;
        out.coefficient = 0.0;
    }
    out.q = out.coefficient * basis;
    const double alpha = std::atan2(out.normal[1], out.normal[0]);
    out.basis_coefficients = out.coefficient * Eigen::Vector2d(std::cos(3 * alpha), std::sin(3 * alpha));

    out.profile = radial_profile(space, P + out.q, x0, radii);
    for (const auto& row : out.profile.rows)
        out.h3.push_back(row.valid ? row.H_lambda(3.0) : std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i + 1 < out.h3.size(); ++i) {
        if (!std::isfinite(out.h3[i]) || !std::isfinite(out.h3[i + 1]))
            continue;
        const double slope = (out.h3[i] - out.h3[i + 1]) / (out.profile.rows[i].r - out.profile.rows[i + 1].r);
        out.worst_negative_slope = std::min(out.worst_negative_slope, slope);
    }
    return out;
}

/// Largest distance from L of the contact nodes in B_r(x0), for an (n-1)-dimensional L given by
/// its unit normal.
template <class Space>
double contact_distance_from_plane(const Space& space, const Eigen::VectorXd& x0, const Eigen::VectorXd& normal, double r)
{
    double worst = 0.0;
    for (const auto& x : space.contact_points(x0, r))
        worst = std::max(worst, std::abs(normal.dot(x)));
    return worst;
}

struct TubeCheck {
    double lambda = 0.0;
    std::vector<double> radii;    ///< dyadic, descending
    std::vector<double> distance; ///< max distance of contact points in B_r from the plane
    std::vector<double> constant; ///< (distance - h)^+ / r^{lambda - 1}
    double growth = 0.0;          ///< largest C(r/2) / C(r) over consecutive radii with C(r) > 0
    bool stable = false;
};

/// Contact points in B_r(x0) lie within C r^{lambda-1} + h of the plane normal to `normal`, with C
/// stable under halving r. The h allowance absorbs contact nodes a grid cell off the plane.
template <class Space>
TubeCheck tube_check(const Space& space, const Eigen::VectorXd& x0, const Eigen::VectorXd& normal, double lambda,
                     double r_max = 0.4, double max_growth = 1.5)
{
    TubeCheck t;
    t.lambda = lambda;
    const double h = space.h();
    bool ok = true;
    for (double r = r_max; r >= 8.0 * h; r *= 0.5) {
        const double d = contact_distance_from_plane(space, x0, normal, r);
        const double c = std::max(d - h, 0.0) / std::pow(r, lambda - 1.0);
        if (!t.constant.empty()) {
            const double prev = t.constant.back();
            if (prev > 0.0)
                t.growth = std::max(t.growth, c / prev);
            else if (c > 0.0)
                ok = false;
        }
        t.radii.push_back(r);
        t.distance.push_back(d);
        t.constant.push_back(c);
    }
    t.stable = ok && t.growth <= max_growth && t.radii.size() >= 2;
    return t;
}

} // namespace fbx
