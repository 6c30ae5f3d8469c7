#pragma once

#include "fbx/fixtures.hpp"
#include "fbx/polynomial.hpp"
#include "fbx/quadrature.hpp"

#include <vector>

namespace fbx {

namespace detail {

// Lagrange weights of the nodes 0, 1, 2, 3 evaluated at t.
inline std::array<double, 4> lagrange4(double t)
{
    return {-(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0, t * (t - 2.0) * (t - 3.0) / 2.0,
            -t * (t - 1.0) * (t - 3.0) / 2.0, t * (t - 1.0) * (t - 2.0) / 6.0};
}

struct CubicStencil {
    int base;
    std::array<double, 4> w;
};

// Four nodes around grid coordinate s (node units), shifted inward near the ends.
inline CubicStencil cubic_stencil(double s, int n, bool clamp_below = true)
{
    int b = static_cast<int>(std::floor(s)) - 1;
    b = std::min(b, n - 4);
    if (clamp_below)
        b = std::max(b, 0);
    return {b, lagrange4(s - b)};
}

/// Tensor-product cubic Lagrange interpolation; exact for polynomials of degree 3 per axis.
template <int Dim>
double interpolate_cubic(const GridField<Dim>& g, const Vec<Dim>& x)
{
    std::array<CubicStencil, Dim> st;
    for (int d = 0; d < Dim; ++d)
        st[d] = cubic_stencil((x[d] - g.domain().lower[d]) / g.h() - 0.5, g.extents()[d]);
    double v = 0.0;
    constexpr int corners = Dim == 2 ? 16 : 64;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t l = 0;
        int rem = c;
        for (int d = 0; d < Dim; ++d) {
            const int k = rem & 3;
            rem >>= 2;
            w *= st[d].w[k];
            l += static_cast<std::size_t>(st[d].base + k) * g.strides()[d];
        }
        v += w * g[l];
    }
    return v;
}

// Fourth-order first difference along one axis from values f(i), i in [0, n).
template <class F>
double diff4(F&& f, int i, int n, double h)
{
    if (i >= 2 && i <= n - 3)
        return (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / (12.0 * h);
    if (i == 0)
        return (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) / (12.0 * h);
    if (i == 1)
        return (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) / (12.0 * h);
    if (i == n - 1)
        return (25.0 * f(n - 1) - 48.0 * f(n - 2) + 36.0 * f(n - 3) - 16.0 * f(n - 4) + 3.0 * f(n - 5)) / (12.0 * h);
    return (3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5)) / (12.0 * h);
}

/// Fourth-order gradient; exact on polynomials of degree 4 per axis.
template <int Dim>
VectorField<Dim> gradient4(const GridField<Dim>& g)
{
    VectorField<Dim> out = gradient(g);
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto idx = g.multi(l);
        for (int d = 0; d < Dim; ++d) {
            const std::size_t s = g.strides()[d];
            const std::size_t l0 = l - static_cast<std::size_t>(idx[d]) * s;
            out[d][l] = diff4([&](int i) { return g[l0 + static_cast<std::size_t>(i) * s]; }, idx[d],
                              g.extents()[d], g.h());
        }
    }
    return out;
}

} // namespace detail

/// Raw integrals over B_r(x0) and its boundary for one radius. w = u - P where P is a
/// polynomial in coordinates relative to x0.
struct RadiusIntegrals {
    double sphere_w2 = 0.0;
    double sphere_u2 = 0.0;
    double ball_grad_w2 = 0.0;
    double ball_grad_u2 = 0.0;
    double ball_u = 0.0;
    double contact_volume = 0.0; ///< midpoint cells with u <= eps_c
    double ball_volume = 0.0;    ///< midpoint cells inside the ball
};

/// A node sample for blow-up fitting: position relative to x0 and the field value.
struct FitSample {
    Eigen::VectorXd x;
    double value = 0.0;
};

inline Polynomial to_polynomial(const QuadraticBlowup& A)
{
    std::vector<Monomial> t;
    const int n = A.dim();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Monomial m{0.5 * A.matrix()(i, j), {0, 0, 0}};
            m.exps[i] += 1;
            m.exps[j] += 1;
            t.push_back(m);
        }
    return Polynomial(n, std::move(t));
}

/// Diagnostics on a Cartesian grid in R^Dim.
template <int Dim>
class GridSpace {
public:
    explicit GridSpace(GridField<Dim> u, BallRule rule = BallRule::subcell)
        : u_(std::move(u)), grad_(detail::gradient4(u_)), rule_(rule), samples_(default_sphere_samples<Dim>()),
          eps_c_(contact_threshold(u_.h()))
    {
    }

    int dim() const { return Dim; }
    double h() const { return u_.h(); }
    double sup_norm() const { return u_.max_abs(); }
    const GridField<Dim>& field() const { return u_; }
    double contact_eps() const { return eps_c_; }
    void set_contact_eps(double e) { eps_c_ = e; }

    RadiusIntegrals integrals(const Eigen::VectorXd& x0v, double r, const Polynomial& P) const
    {
        const Vec<Dim> x0 = x0v;
        RadiusIntegrals out;
        check_reliable_radius(u_, r);
        check_ball_inside(u_, x0, r);
        for (std::size_t k = 0; k < samples_.directions.size(); ++k) {
            const Vec<Dim> d = samples_.directions[k];
            const Vec<Dim> x = x0 + r * d;
            const double uv = detail::interpolate_cubic(u_, x);
            const double wv = uv - P(Vec<Dim>(r * d));
            out.sphere_u2 += samples_.weights[k] * uv * uv;
            out.sphere_w2 += samples_.weights[k] * wv * wv;
        }
        out.sphere_u2 *= std::pow(r, Dim - 1);
        out.sphere_w2 *= std::pow(r, Dim - 1);

        auto add_point = [&](const Vec<Dim>& x, double wt, double uv, const Vec<Dim>& gu) {
            const Vec<Dim> rel = x - x0;
            double gw2 = 0.0;
            for (int d = 0; d < Dim; ++d) {
                const double gw = gu[d] - P.derivative(rel, d);
                gw2 += gw * gw;
            }
            out.ball_grad_u2 += wt * gu.squaredNorm();
            out.ball_grad_w2 += wt * gw2;
            out.ball_u += wt * uv;
        };
        for_each_ball_sample(
            u_, x0, r, rule_, Dim == 2 ? 16 : 6,
            [&](std::size_t l, double wt) {
                // 2-point Gauss rule per axis on whole cells
                const Vec<Dim> c = u_.position(l);
                const double off = 0.5 * u_.h() / std::sqrt(3.0);
                constexpr int npts = 1 << Dim;
                for (int g = 0; g < npts; ++g) {
                    Vec<Dim> x = c;
                    for (int d = 0; d < Dim; ++d)
                        x[d] += ((g >> d) & 1) ? off : -off;
                    Vec<Dim> gu;
                    for (int d = 0; d < Dim; ++d)
                        gu[d] = detail::interpolate_cubic(grad_[d], x);
                    add_point(x, wt / npts, detail::interpolate_cubic(u_, x), gu);
                }
            },
            [&](const Vec<Dim>& x, double wt) {
                Vec<Dim> gu;
                for (int d = 0; d < Dim; ++d)
                    gu[d] = detail::interpolate_cubic(grad_[d], x);
                add_point(x, wt, detail::interpolate_cubic(u_, x), gu);
            });
        for_each_ball_sample(
            u_, x0, r, BallRule::midpoint, 1,
            [&](std::size_t l, double wt) {
                out.ball_volume += wt;
                if (u_[l] <= eps_c_)
                    out.contact_volume += wt;
            },
            [](const Vec<Dim>&, double) {});
        return out;
    }

    /// Midpoint-rule fraction of B_r(x0) occupied by contact cells.
    double contact_density(const Eigen::VectorXd& x0v, double r) const
    {
        const Vec<Dim> x0 = x0v;
        double vol = 0.0, con = 0.0;
        for_each_ball_sample(
            u_, x0, r, BallRule::midpoint, 1,
            [&](std::size_t l, double wt) {
                vol += wt;
                if (u_[l] <= eps_c_)
                    con += wt;
            },
            [](const Vec<Dim>&, double) {});
        return vol > 0.0 ? con / vol : 0.0;
    }

    Polynomial blowup_polynomial(const QuadraticBlowup& A) const { return to_polynomial(A); }
    Polynomial zero_polynomial() const { return Polynomial(Dim); }
    int ambient_dim() const { return Dim; }

    /// Grid nodes with r_lo <= |x - x0| <= r_hi.
    std::vector<FitSample> annulus_samples(const Eigen::VectorXd& x0v, double r_lo, double r_hi) const
    {
        const Vec<Dim> x0 = x0v;
        check_ball_inside(u_, x0, r_hi);
        std::vector<FitSample> out;
        for_each_ball_sample(
            u_, x0, r_hi + 1e-12, BallRule::midpoint, 1,
            [&](std::size_t l, double) {
                const Vec<Dim> rel = u_.position(l) - x0;
                const double rho = rel.norm();
                if (rho >= r_lo)
                    out.push_back({Eigen::VectorXd(rel), u_[l]});
            },
            [](const Vec<Dim>&, double) {});
        return out;
    }

    /// Contact nodes {u <= eps_c} inside B_r(x0), as positions relative to x0.
    std::vector<Eigen::VectorXd> contact_points(const Eigen::VectorXd& x0v, double r) const
    {
        const Vec<Dim> x0 = x0v;
        std::vector<Eigen::VectorXd> out;
        for (std::size_t l = 0; l < u_.size(); ++l) {
            const Vec<Dim> rel = u_.position(l) - x0;
            if (rel.norm() < r && u_[l] <= eps_c_)
                out.emplace_back(rel);
        }
        return out;
    }

private:
    GridField<Dim> u_;
    VectorField<Dim> grad_;
    BallRule rule_;
    SphereSampleSet<Dim> samples_;
    double eps_c_;
};

/// Diagnostics for an axially symmetric function U(x) = u(x_z, |x'|) on R^N, stored on the
/// (z, r) half-plane grid with r the last coordinate. Centers lie on the axis r = 0.
/// Surface and volume integrals reduce to one- and two-dimensional weighted integrals:
///   int_{dB_rho} F = |S^{N-2}| rho^{N-1} int_{-pi/2}^{pi/2} F(rho sin t, rho cos t) cos^{N-2} t dt
///   int_{B_rho} F = |S^{N-2}| int int F(z, r) r^{N-2} dz dr.
class AxisymSpace {
public:
    /// trivial_dims counts the extra coordinates of the ambient space on which U does not depend.
    AxisymSpace(GridField<2> u, int effective_dim, double scale = 1.0, BallRule rule = BallRule::subcell,
                int trivial_dims = 0)
        : u_(std::move(u)), N_(effective_dim), trivial_(trivial_dims), rule_(rule),
          eps_c_(contact_threshold(u_.h()))
    {
        if (N_ < 3)
            throw DomainError("AxisymSpace: effective dimension must be at least 3");
        if (std::abs(u_.domain().lower[1]) > 1e-14)
            throw DomainError("AxisymSpace: the r-axis must start at 0");
        for (auto& v : u_.values())
            v /= scale;
        // eps_c is a threshold on the stored (unscaled) values
        eps_c_ /= scale;
        build_gradient();
        auto [x, w] = gauss_legendre(256);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = 0.5 * std::numbers::pi * x[i];
            theta_.push_back(t);
            theta_w_.push_back(0.5 * std::numbers::pi * w[i] * std::pow(std::cos(t), N_ - 2));
        }
        sigma_ = unit_sphere_area(N_ - 1);
    }

    int dim() const { return N_; }
    double h() const { return u_.h(); }
    double sup_norm() const { return u_.max_abs(); }
    const GridField<2>& field() const { return u_; }
    double contact_eps() const { return eps_c_; }

    int ambient_dim() const { return N_ + trivial_; }
    Polynomial zero_polynomial() const { return Polynomial(2); }

    /// The (z, r) form of an axially symmetric blow-up in R^N: 1/2 (A_zz z^2 + b r^2), with b the
    /// mean of the transverse diagonal.
    Polynomial blowup_polynomial(const QuadraticBlowup& A) const
    {
        const double azz = A.matrix()(0, 0);
        const double b = (A.matrix().trace() - azz) / (N_ - 1);
        return Polynomial(2, {Monomial{0.5 * azz, {2, 0, 0}}, Monomial{0.5 * b, {0, 2, 0}}});
    }

    double contact_density(const Eigen::VectorXd& x0, double rho) const
    {
        double vol = 0.0, con = 0.0;
        const double h = u_.h();
        for (std::size_t l = 0; l < u_.size(); ++l) {
            const auto p = u_.position(l);
            if (std::hypot(p[0] - x0[0], p[1]) >= rho)
                continue;
            const double ww = h * h * std::pow(p[1], N_ - 2);
            vol += ww;
            if (u_[l] <= eps_c_)
                con += ww;
        }
        return vol > 0.0 ? con / vol : 0.0;
    }

    /// Value with even reflection across r = 0.
    double value(double z, double r) const { return interp(u_, z, std::abs(r), false); }

    RadiusIntegrals integrals(const Eigen::VectorXd& x0, double rho, const Polynomial& P) const
    {
        check(x0, rho);
        const double z0 = x0[0];
        RadiusIntegrals out;
        for (std::size_t k = 0; k < theta_.size(); ++k) {
            const double z = rho * std::sin(theta_[k]);
            const double r = rho * std::cos(theta_[k]);
            const double uv = value(z0 + z, r);
            const double wv = uv - P(Eigen::Vector2d(z, r));
            out.sphere_u2 += theta_w_[k] * uv * uv;
            out.sphere_w2 += theta_w_[k] * wv * wv;
        }
        out.sphere_u2 *= sigma_ * std::pow(rho, N_ - 1);
        out.sphere_w2 *= sigma_ * std::pow(rho, N_ - 1);

        const double h = u_.h();
        const int sub = rule_ == BallRule::subcell ? 16 : 1;
        const double off = 0.5 * h / std::sqrt(3.0);
        const double half_diag = 0.5 * h * std::sqrt(2.0);
        const int i_lo = std::max(0, static_cast<int>(std::floor((z0 - rho - u_.domain().lower[0]) / h)) - 1);
        const int i_hi = std::min(u_.extents()[0] - 1, static_cast<int>(std::ceil((z0 + rho - u_.domain().lower[0]) / h)) + 1);
        const int j_hi = std::min(u_.extents()[1] - 1, static_cast<int>(std::ceil(rho / h)) + 1);
        auto add_point = [&](double z, double r, double wt, double uv, double gz, double gr) {
            const double wz = gz - P.derivative(Eigen::Vector2d(z - z0, r), 0);
            const double wr = gr - P.derivative(Eigen::Vector2d(z - z0, r), 1);
            const double ww = wt * std::pow(r, N_ - 2);
            out.ball_grad_u2 += ww * (gz * gz + gr * gr);
            out.ball_grad_w2 += ww * (wz * wz + wr * wr);
            out.ball_u += ww * uv;
        };
        for (int i = i_lo; i <= i_hi; ++i) {
            for (int j = 0; j <= j_hi; ++j) {
                const double zc = u_.coord(0, i), rc = u_.coord(1, j);
                const double dist = std::hypot(zc - z0, rc);
                const std::size_t l = u_.linear({i, j});
                if (dist < rho) {
                    const double ww = h * h * std::pow(rc, N_ - 2);
                    out.ball_volume += ww;
                    if (u_[l] <= eps_c_)
                        out.contact_volume += ww;
                }
                if (sub == 1 || dist <= rho - half_diag || dist >= rho + half_diag) {
                    if (dist >= rho)
                        continue;
                    if (sub == 1) {
                        add_point(zc, rc, h * h, u_[l], gz_[l], gr_[l]);
                        continue;
                    }
                    for (int g = 0; g < 4; ++g) {
                        const double z = zc + ((g & 1) ? off : -off);
                        const double r = rc + ((g & 2) ? off : -off);
                        add_point(z, r, 0.25 * h * h, value(z, r), interp(gz_, z, r, false), interp(gr_, z, r, true));
                    }
                    continue;
                }
                for (int a = 0; a < sub; ++a)
                    for (int b = 0; b < sub; ++b) {
                        const double z = zc + (a + 0.5) * h / sub - 0.5 * h;
                        const double r = rc + (b + 0.5) * h / sub - 0.5 * h;
                        if (std::hypot(z - z0, r) >= rho)
                            continue;
                        add_point(z, r, h * h / (sub * sub), value(z, r), interp(gz_, z, r, false),
                                  interp(gr_, z, r, true));
                    }
            }
        }
        out.ball_u *= sigma_;
        out.ball_grad_u2 *= sigma_;
        out.ball_grad_w2 *= sigma_;
        out.ball_volume *= sigma_;
        out.contact_volume *= sigma_;
        return out;
    }

    /// Node samples in the annulus, lifted to R^N: each (z, r) node becomes the points
    /// (z, r * omega_j) for a fixed set of unit directions omega_j in R^{N-1}.
    std::vector<FitSample> annulus_samples(const Eigen::VectorXd& x0, double r_lo, double r_hi) const
    {
        check(x0, r_hi);
        const auto dirs = lift_directions();
        std::vector<FitSample> out;
        for (std::size_t l = 0; l < u_.size(); ++l) {
            const auto p = u_.position(l);
            const double z = p[0] - x0[0], r = p[1];
            const double rho = std::hypot(z, r);
            if (rho < r_lo || rho > r_hi)
                continue;
            for (const auto& om : dirs) {
                Eigen::VectorXd x(N_);
                x[0] = z;
                x.tail(N_ - 1) = r * om;
                out.push_back({x, u_[l]});
            }
        }
        return out;
    }

    /// Contact nodes in the half-plane ball, as (z - z0, r).
    std::vector<Eigen::VectorXd> contact_points(const Eigen::VectorXd& x0, double rho) const
    {
        std::vector<Eigen::VectorXd> out;
        for (std::size_t l = 0; l < u_.size(); ++l) {
            const auto p = u_.position(l);
            Eigen::Vector2d rel(p[0] - x0[0], p[1]);
            if (rel.norm() < rho && u_[l] <= eps_c_)
                out.emplace_back(rel);
        }
        return out;
    }

private:
    void check(const Eigen::VectorXd& x0, double rho) const
    {
        const double h = u_.h();
        if (!(rho >= kReliableRadiusCells * h * (1.0 - 1e-12)))
            throw RadiusError("radius below the reliable floor 4h");
        if (x0[0] - rho < u_.domain().lower[0] + h || x0[0] + rho > u_.domain().upper[0] - h ||
            rho > u_.domain().upper[1] - h)
            throw RadiusError("sphere or ball leaves the valid region of the grid");
    }

    // Row j of g, continued below r = 0 by even (sign = 1) or odd (sign = -1) reflection.
    static double reflected(const GridField<2>& g, int i, int j, double sign)
    {
        return j >= 0 ? g.at({i, j}) : sign * g.at({i, -j - 1});
    }

    // Cubic interpolation on the half plane, using the reflected rows near the axis.
    static double interp(const GridField<2>& g, double z, double r, bool odd_in_r)
    {
        const double sign = odd_in_r ? -1.0 : 1.0;
        if (r < 0.0) {
            r = -r;
            return sign * interp(g, z, r, odd_in_r);
        }
        const auto sz = detail::cubic_stencil((z - g.domain().lower[0]) / g.h() - 0.5, g.extents()[0]);
        const auto sr = detail::cubic_stencil(r / g.h() - 0.5, g.extents()[1], false);
        double v = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                v += sz.w[a] * sr.w[b] * reflected(g, sz.base + a, sr.base + b, sign);
        return v;
    }

    void build_gradient()
    {
        const auto grad = detail::gradient4(u_);
        gz_ = grad[0];
        gr_ = grad[1];
        // near the axis, centered differences through the even reflection
        const double h = u_.h();
        const int nr = u_.extents()[1];
        for (int i = 0; i < u_.extents()[0]; ++i)
            for (int j = 0; j < 2; ++j)
                gr_.at({i, j}) = detail::diff4([&](int jj) { return reflected(u_, i, jj - 2, 1.0); }, j + 2,
                                               nr + 2, h);
    }

    std::vector<Eigen::VectorXd> lift_directions() const
    {
        std::vector<Eigen::VectorXd> dirs;
        const int m = N_ - 1;
        if (m == 2) {
            for (int j = 0; j < 8; ++j) {
                const double t = 2.0 * std::numbers::pi * j / 8;
                Eigen::VectorXd d(2);
                d << std::cos(t), std::sin(t);
                dirs.push_back(d);
            }
            return dirs;
        }
        for (int a = 0; a < m; ++a)
            for (int s : {-1, 1}) {
                Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
                d[a] = s;
                dirs.push_back(d);
            }
        for (int mask = 0; mask < (1 << m); ++mask) {
            Eigen::VectorXd d(m);
            for (int a = 0; a < m; ++a)
                d[a] = (mask >> a) & 1 ? 1.0 : -1.0;
            dirs.push_back(d.normalized());
        }
        return dirs;
    }

    GridField<2> u_;
    GridField<2> gz_{u_};
    GridField<2> gr_{u_};
    int N_;
    int trivial_;
    BallRule rule_;
    double eps_c_;
    std::vector<double> theta_, theta_w_;
    double sigma_ = 0.0;
};

} // namespace fbx
