#pragma once

#include "fbx/polynomial.hpp"

#include <Eigen/Eigenvalues>

#include <charconv>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace fbx {

/// Threshold on eigenvalues of a fitted blow-up matrix (trace-normalized) below which a
/// direction counts as part of the kernel L.
inline constexpr double kKernelEigenThreshold = 0.05;

/// Orthonormal splitting of R^n into the kernel L of a blow-up matrix and its complement.
struct KernelStratum {
    int m = 0;                       ///< dim L
    std::vector<Eigen::VectorXd> kernel;     ///< basis of L
    std::vector<Eigen::VectorXd> complement; ///< basis of L^perp
    Eigen::VectorXd eigenvalues;     ///< ascending
};

/// p(x) = 1/2 x.Ax with A symmetric, A >= 0, tr A = 1.
class QuadraticBlowup {
public:
    QuadraticBlowup() = default;

    explicit QuadraticBlowup(Eigen::MatrixXd A) : A_(std::move(A))
    {
        if (A_.rows() != A_.cols() || A_.rows() < 1)
            throw DomainError("QuadraticBlowup: matrix must be square");
        if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw DomainError("QuadraticBlowup: matrix must be symmetric");
        if (std::abs(A_.trace() - 1.0) > 1e-12)
            throw DomainError("QuadraticBlowup: trace must equal 1");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_);
        if (es.eigenvalues().minCoeff() < -1e-12)
            throw DomainError("QuadraticBlowup: matrix must be nonnegative definite");
    }

    /// Wraps a fitted matrix without validating the cone constraints.
    static QuadraticBlowup unchecked(Eigen::MatrixXd A)
    {
        QuadraticBlowup q;
        q.A_ = 0.5 * (A + A.transpose());
        return q;
    }

    static QuadraticBlowup diagonal(const std::vector<double>& d)
    {
        Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i)
            v[static_cast<Eigen::Index>(i)] = d[i];
        return QuadraticBlowup(Eigen::MatrixXd(v.asDiagonal()));
    }

    int dim() const { return static_cast<int>(A_.rows()); }
    const Eigen::MatrixXd& matrix() const { return A_; }

    template <class V>
    double operator()(const V& x) const
    {
        double s = 0.0;
        const int n = dim();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                s += x[i] * A_(i, j) * x[j];
        return 0.5 * s;
    }

    template <class V>
    double derivative(const V& x, int axis) const
    {
        double s = 0.0;
        for (int j = 0; j < dim(); ++j)
            s += A_(axis, j) * x[j];
        return s;
    }

    KernelStratum stratum(double tau = kKernelEigenThreshold) const
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_);
        KernelStratum ks;
        ks.eigenvalues = es.eigenvalues();
        for (int i = 0; i < dim(); ++i) {
            if (es.eigenvalues()[i] < tau)
                ks.kernel.push_back(es.eigenvectors().col(i));
            else
                ks.complement.push_back(es.eigenvectors().col(i));
        }
        ks.m = static_cast<int>(ks.kernel.size());
        return ks;
    }

private:
    Eigen::MatrixXd A_;
};

/// The global solution p in the blow-up class (Delta p = 1, p >= 0).
inline QuadraticBlowup polynomial_solution(const QuadraticBlowup& A)
{
    return A;
}

/// u(x) = 1/2 max(e.x, 0)^2, the regular blow-up profile.
class HalfSpaceSolution {
public:
    explicit HalfSpaceSolution(Eigen::VectorXd e) : e_(std::move(e))
    {
        if (std::abs(e_.norm() - 1.0) > 1e-12)
            throw DomainError("halfspace_solution: direction must be a unit vector");
    }

    const Eigen::VectorXd& direction() const { return e_; }

    template <class V>
    double operator()(const V& x) const
    {
        const double t = std::max(dot(x), 0.0);
        return 0.5 * t * t;
    }

    template <class V>
    double derivative(const V& x, int axis) const
    {
        return std::max(dot(x), 0.0) * e_[axis];
    }

private:
    template <class V>
    double dot(const V& x) const
    {
        double s = 0.0;
        for (Eigen::Index i = 0; i < e_.size(); ++i)
            s += e_[i] * x[i];
        return s;
    }

    Eigen::VectorXd e_;
};

inline HalfSpaceSolution halfspace_solution(const Eigen::VectorXd& e)
{
    return HalfSpaceSolution(e);
}

/// Homogeneous harmonic polynomial of degree k, unit L^2 norm on the unit sphere.
/// In 2D index 0 is rho^k cos(k theta), index 1 is rho^k sin(k theta).
/// In 3D (k = 2, 3) index runs over the 2k+1 real solid harmonics r^k Y_{k,j}, j = index - k.
inline Polynomial homogeneous_harmonic(int n, int k, int index)
{
    using std::numbers::pi;
    if (k < 1)
        throw DomainError("homogeneous_harmonic: degree must be at least 1");
    if (n == 2) {
        if (index < 0 || index > 1)
            throw DomainError("homogeneous_harmonic: 2D index must be 0 (cos) or 1 (sin)");
        auto [re, im] = complex_power(Polynomial::coordinate(2, 0), Polynomial::coordinate(2, 1), k);
        return (1.0 / std::sqrt(pi)) * (index == 0 ? re : im);
    }
    if (n != 3 || (k != 2 && k != 3) || index < 0 || index > 2 * k)
        throw DomainError("homogeneous_harmonic: unsupported (dimension, degree, index)");
    auto M = [](double c, int a, int b, int d) { return Monomial{c, {a, b, d}}; };
    const int j = index - k;
    std::vector<Monomial> t;
    if (k == 2) {
        const double c1 = 0.5 * std::sqrt(15.0 / pi);
        switch (j) {
        case -2: t = {M(c1, 1, 1, 0)}; break;
        case -1: t = {M(c1, 0, 1, 1)}; break;
        case 0: {
            const double c0 = 0.25 * std::sqrt(5.0 / pi);
            t = {M(2 * c0, 0, 0, 2), M(-c0, 2, 0, 0), M(-c0, 0, 2, 0)};
            break;
        }
        case 1: t = {M(c1, 1, 0, 1)}; break;
        default: {
            const double c2 = 0.25 * std::sqrt(15.0 / pi);
            t = {M(c2, 2, 0, 0), M(-c2, 0, 2, 0)};
        }
        }
    } else {
        const double a3 = 0.25 * std::sqrt(35.0 / (2 * pi));
        const double a2 = 0.5 * std::sqrt(105.0 / pi);
        const double a1 = 0.25 * std::sqrt(21.0 / (2 * pi));
        const double a0 = 0.25 * std::sqrt(7.0 / pi);
        switch (j) {
        case -3: t = {M(3 * a3, 2, 1, 0), M(-a3, 0, 3, 0)}; break;
        case -2: t = {M(a2, 1, 1, 1)}; break;
        case -1: t = {M(4 * a1, 0, 1, 2), M(-a1, 2, 1, 0), M(-a1, 0, 3, 0)}; break;
        case 0: t = {M(2 * a0, 0, 0, 3), M(-3 * a0, 2, 0, 1), M(-3 * a0, 0, 2, 1)}; break;
        case 1: t = {M(4 * a1, 1, 0, 2), M(-a1, 3, 0, 0), M(-a1, 1, 2, 0)}; break;
        case 2: t = {M(0.5 * a2, 2, 0, 1), M(-0.5 * a2, 0, 2, 1)}; break;
        default: t = {M(a3, 3, 0, 0), M(-3 * a3, 1, 2, 0)};
        }
    }
    return Polynomial(3, std::move(t));
}

/// Distance from lambda to the set of admissible blow-up frequencies at a singular point of
/// stratum m in R^n: {3,4,5,...} u {7/2, 11/2, 15/2, ...} for (n, m) = (2, 1), {2,3,4,...} for
/// m <= n-2. For m = n-1 >= 2 only the lower bound lambda >= 2 is known.
inline double admissible_set_distance(int n, int m, double lambda)
{
    if (m <= n - 2) {
        if (lambda <= 2.0)
            return 2.0 - lambda;
        return std::abs(lambda - std::round(lambda));
    }
    if (n == 2 && m == 1) {
        if (lambda <= 3.0)
            return 3.0 - lambda;
        double best = std::abs(lambda - std::round(lambda));
        // 7/2 + 2j
        const double j = std::max(0.0, std::round((lambda - 3.5) / 2.0));
        best = std::min(best, std::abs(lambda - (3.5 + 2.0 * j)));
        if (j > 0)
            best = std::min(best, std::abs(lambda - (3.5 + 2.0 * (j - 1))));
        return best;
    }
    return std::max(0.0, 2.0 - lambda);
}

// ---------------------------------------------------------------------------
// Named fixtures, addressable from configs.

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& context)
{
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw DomainError("fixture '" + context + "': cannot parse number '" + s + "'");
    return v;
}

} // namespace detail

/// p_*(x) = s^2 / 2 plus eps times a k-homogeneous harmonic that is nonnegative (k even) or
/// vanishes (k odd) on L = {s = 0}, where s = cos(a) x_1 + sin(a) x_2 for the rotation angle a.
/// With h > 0 the harmonic part is corrected to be exactly discrete-harmonic, so that for even k
/// and small eps the polynomial is the discrete solution.
inline Polynomial singular_fixture_polynomial(int k, double eps, double h = 0.0, double angle_deg = 0.0)
{
    const double a = angle_deg * std::numbers::pi / 180.0;
    const Polynomial x1 = Polynomial::coordinate(2, 0), x2 = Polynomial::coordinate(2, 1);
    const Polynomial s = std::cos(a) * x1 + std::sin(a) * x2;
    const Polynomial t = (-std::sin(a)) * x1 + std::cos(a) * x2;
    auto [re, im] = complex_power(s, t, k);
    (void)im;
    const double sign = (k % 2 == 0 && (k / 2) % 2 == 1) ? -1.0 : 1.0;
    Polynomial q = h > 0.0 ? discrete_harmonic(re, h) : re;
    return 0.5 * (s * s) + (eps * sign) * q;
}

/// Resolves a fixture id into a pointwise function on R^Dim. Recognized ids:
///   zero, halfspace-e<i>, halfspace-angle-<deg> (2D), poly-diag-<a>-<b>[-<c>],
///   singular-k<k>-<eps>[-rot<deg>] (2D, see singular_fixture_polynomial; h is forwarded to it).
/// Values are clipped at zero so that every fixture is admissible boundary data.
template <int Dim>
std::function<double(const Vec<Dim>&)> fixture_by_name(const std::string& id, double h = 0.0)
{
    const auto parts = detail::split(id, '-');
    if (id == "zero")
        return [](const Vec<Dim>&) { return 0.0; };
    if (parts.size() == 2 && parts[0] == "halfspace" && parts[1].size() == 2 && parts[1][0] == 'e') {
        const int axis = parts[1][1] - '1';
        if (axis < 0 || axis >= Dim)
            throw DomainError("fixture '" + id + "': axis out of range");
        Eigen::VectorXd e = Eigen::VectorXd::Zero(Dim);
        e[axis] = 1.0;
        HalfSpaceSolution hs(e);
        return [hs](const Vec<Dim>& x) { return hs(x); };
    }
    if (parts.size() == 3 && parts[0] == "halfspace" && parts[1] == "angle" && Dim == 2) {
        const double deg = detail::parse_double(parts[2], id);
        Eigen::VectorXd e(2);
        e << std::cos(deg * std::numbers::pi / 180.0), std::sin(deg * std::numbers::pi / 180.0);
        HalfSpaceSolution hs(e);
        return [hs](const Vec<Dim>& x) { return hs(x); };
    }
    if (parts.size() == 2 + Dim && parts[0] == "poly" && parts[1] == "diag") {
        std::vector<double> d;
        for (int i = 0; i < Dim; ++i)
            d.push_back(detail::parse_double(parts[2 + i], id));
        QuadraticBlowup p = QuadraticBlowup::diagonal(d);
        return [p](const Vec<Dim>& x) { return p(x); };
    }
    if ((parts.size() == 3 || parts.size() == 4) && parts[0] == "singular" && parts[1].size() >= 2 && parts[1][0] == 'k' &&
        Dim == 2) {
        const int k = static_cast<int>(detail::parse_double(parts[1].substr(1), id));
        const double eps = detail::parse_double(parts[2], id);
        double angle = 0.0;
        if (parts.size() == 4) {
            if (parts[3].rfind("rot", 0) != 0)
                throw DomainError("fixture '" + id + "': expected rot<deg> suffix");
            angle = detail::parse_double(parts[3].substr(3), id);
        }
        Polynomial poly = singular_fixture_polynomial(k, eps, h, angle);
        return [poly](const Vec<Dim>& x) { return std::max(poly(x), 0.0); };
    }
    throw DomainError("unknown fixture id '" + id + "'");
}

} // namespace fbx
