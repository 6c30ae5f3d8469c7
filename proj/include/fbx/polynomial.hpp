#pragma once

#include "fbx/common.hpp"

#include <algorithm>
#include <vector>

namespace fbx {

struct Monomial {
    double coef = 0.0;
    std::array<int, 3> exps{0, 0, 0};
};

/// Sparse polynomial in up to three variables. Used for closed-form fixtures
/// (harmonic polynomials, elements of the blow-up class, third-order bases).
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int dim) : dim_(dim) {}
    Polynomial(int dim, std::vector<Monomial> terms) : dim_(dim), terms_(std::move(terms)) { compress(); }

    int dim() const { return dim_; }
    const std::vector<Monomial>& terms() const { return terms_; }

    template <class V>
    double operator()(const V& x) const
    {
        double s = 0.0;
        for (const auto& t : terms_) {
            double m = t.coef;
            for (int d = 0; d < dim_; ++d)
                m *= ipow(x[d], t.exps[d]);
            s += m;
        }
        return s;
    }

    template <class V>
    double derivative(const V& x, int axis) const
    {
        double s = 0.0;
        for (const auto& t : terms_) {
            const int e = t.exps[axis];
            if (e == 0)
                continue;
            double m = t.coef * e;
            for (int d = 0; d < dim_; ++d)
                m *= ipow(x[d], d == axis ? e - 1 : t.exps[d]);
            s += m;
        }
        return s;
    }

    Polynomial laplacian() const
    {
        std::vector<Monomial> out;
        for (const auto& t : terms_) {
            for (int d = 0; d < dim_; ++d) {
                if (t.exps[d] < 2)
                    continue;
                Monomial m = t;
                m.coef *= t.exps[d] * (t.exps[d] - 1);
                m.exps[d] -= 2;
                out.push_back(m);
            }
        }
        return Polynomial(dim_, std::move(out));
    }

    /// Five/seven-point Laplacian with spacing h applied to the polynomial (exact, via the
    /// binomial expansion of x +- h along each axis).
    Polynomial discrete_laplacian(double h) const
    {
        std::vector<Monomial> out;
        for (const auto& t : terms_) {
            for (int d = 0; d < dim_; ++d) {
                const int e = t.exps[d];
                double binom = 1.0; // C(e, 2j), built incrementally
                double hp = 1.0;    // h^{2j-2}
                for (int j = 1; 2 * j <= e; ++j) {
                    binom *= static_cast<double>(e - 2 * j + 2) * (e - 2 * j + 1) / ((2.0 * j - 1) * (2.0 * j));
                    Monomial m = t;
                    m.coef *= 2.0 * binom * hp;
                    m.exps[d] -= 2 * j;
                    out.push_back(m);
                    hp *= h * h;
                }
            }
        }
        return Polynomial(dim_, std::move(out));
    }

    /// A polynomial P with Laplacian(P) = *this, built monomial by monomial by integrating twice
    /// in x_0 and recursing on the leftover terms. P has no terms of degree below 2.
    Polynomial inverse_laplacian() const
    {
        Polynomial out(dim_);
        std::vector<Monomial> work = terms_;
        while (!work.empty()) {
            std::vector<Monomial> next;
            for (const auto& t : work) {
                Monomial m = t;
                const double a = t.exps[0];
                m.coef /= (a + 1.0) * (a + 2.0);
                m.exps[0] += 2;
                out.terms_.push_back(m);
                // Laplacian of m = t + sum_{d>0} m.coef * e_d (e_d - 1) x^{..., e_d - 2, ...}
                for (int d = 1; d < dim_; ++d) {
                    if (m.exps[d] < 2)
                        continue;
                    Monomial r = m;
                    r.coef = -m.coef * m.exps[d] * (m.exps[d] - 1);
                    r.exps[d] -= 2;
                    next.push_back(r);
                }
            }
            work = std::move(next);
        }
        out.compress();
        return out;
    }

    /// Largest total degree among nonzero terms (0 for the zero polynomial).
    int degree() const
    {
        int deg = 0;
        for (const auto& t : terms_)
            deg = std::max(deg, t.exps[0] + t.exps[1] + t.exps[2]);
        return deg;
    }

    bool is_zero(double tol = 0.0) const
    {
        return std::all_of(terms_.begin(), terms_.end(), [&](const Monomial& m) { return std::abs(m.coef) <= tol; });
    }

    Polynomial& operator+=(const Polynomial& o)
    {
        dim_ = std::max(dim_, o.dim_);
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        compress();
        return *this;
    }
    Polynomial& operator*=(double c)
    {
        for (auto& t : terms_)
            t.coef *= c;
        return *this;
    }
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, Polynomial b) { return a += (b *= -1.0); }
    friend Polynomial operator*(double c, Polynomial a) { return a *= c; }

    Polynomial operator*(const Polynomial& o) const
    {
        std::vector<Monomial> out;
        for (const auto& a : terms_)
            for (const auto& b : o.terms_)
                out.push_back({a.coef * b.coef,
                               {a.exps[0] + b.exps[0], a.exps[1] + b.exps[1], a.exps[2] + b.exps[2]}});
        return Polynomial(std::max(dim_, o.dim_), std::move(out));
    }

    /// Linear coordinate function x_axis.
    static Polynomial coordinate(int dim, int axis)
    {
        Monomial m{1.0, {0, 0, 0}};
        m.exps[axis] = 1;
        return Polynomial(dim, {m});
    }

    static Polynomial constant(int dim, double c) { return Polynomial(dim, {Monomial{c, {0, 0, 0}}}); }

private:
    static double ipow(double x, int e)
    {
        double r = 1.0;
        for (int i = 0; i < e; ++i)
            r *= x;
        return r;
    }

    void compress()
    {
        std::sort(terms_.begin(), terms_.end(), [](const Monomial& a, const Monomial& b) { return a.exps < b.exps; });
        std::vector<Monomial> merged;
        for (const auto& t : terms_) {
            if (!merged.empty() && merged.back().exps == t.exps)
                merged.back().coef += t.coef;
            else
                merged.push_back(t);
        }
        std::erase_if(merged, [](const Monomial& m) { return m.coef == 0.0; });
        terms_ = std::move(merged);
    }

    int dim_ = 2;
    std::vector<Monomial> terms_;
};

/// Real and imaginary parts of (a x + b y)^k-type complex powers in the plane:
/// returns {Re((s + i t)^k), Im((s + i t)^k)} where s, t are linear forms.
inline std::pair<Polynomial, Polynomial> complex_power(const Polynomial& s, const Polynomial& t, int k)
{
    Polynomial re = Polynomial::constant(s.dim(), 1.0);
    Polynomial im(s.dim());
    for (int i = 0; i < k; ++i) {
        Polynomial nre = re * s - im * t;
        Polynomial nim = re * t + im * s;
        re = std::move(nre);
        im = std::move(nim);
    }
    return {re, im};
}

/// Adds lower-order corrections to a (continuum) harmonic polynomial q so that the discrete
/// Laplacian with spacing h annihilates it exactly. Each correction step lowers the degree of the
/// residual by two, so the loop terminates after deg(q)/2 steps.
inline Polynomial discrete_harmonic(const Polynomial& q, double h)
{
    Polynomial out = q;
    for (int it = 0; it <= q.degree(); ++it) {
        Polynomial r = out.discrete_laplacian(h);
        if (r.is_zero(1e-300))
            break;
        out = out - r.inverse_laplacian();
    }
    return out;
}

} // namespace fbx
