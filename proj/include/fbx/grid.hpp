#pragma once

#include "fbx/common.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <type_traits>
#include <utility>
#include <ostream>
#include <vector>

namespace fbx {

template <int Dim>
struct BoxDomain {
    static_assert(Dim == 2 || Dim == 3, "grids are two- or three-dimensional");

    Vec<Dim> lower;
    Vec<Dim> upper;

    BoxDomain(Vec<Dim> lo, Vec<Dim> hi) : lower(std::move(lo)), upper(std::move(hi))
    {
        for (int d = 0; d < Dim; ++d)
            if (!(upper[d] > lower[d]))
                throw DomainError("BoxDomain: upper corner must exceed lower corner on every axis");
    }

    /// Symmetric box [-half, half]^Dim.
    static BoxDomain cube(double half) { return BoxDomain(Vec<Dim>::Constant(-half), Vec<Dim>::Constant(half)); }

    double edge(int d) const { return upper[d] - lower[d]; }
};

/// Scalar field on a uniform cell-centered grid: node i sits at lower + (i + 1/2) h.
template <int Dim>
class GridField {
public:
    GridField(BoxDomain<Dim> domain, double h) : domain_(std::move(domain)), h_(h)
    {
        if (!(h > 0.0) || !std::isfinite(h))
            throw DomainError("GridField: spacing must be positive");
        std::size_t total = 1;
        for (int d = 0; d < Dim; ++d) {
            const double cells = domain_.edge(d) / h;
            const long n = std::lround(cells);
            if (std::abs(cells - static_cast<double>(n)) > 1e-9 * std::max(1.0, cells))
                throw DomainError("GridField: spacing must divide every box edge");
            if (n < 8)
                throw DomainError("GridField: at least 8 cells per axis required");
            extents_[d] = static_cast<int>(n);
            total *= static_cast<std::size_t>(n);
        }
        strides_[Dim - 1] = 1;
        for (int d = Dim - 2; d >= 0; --d)
            strides_[d] = strides_[d + 1] * extents_[d + 1];
        values_.assign(total, 0.0);
    }

    const BoxDomain<Dim>& domain() const { return domain_; }
    double h() const { return h_; }
    const MultiIndex<Dim>& extents() const { return extents_; }
    const MultiIndex<Dim>& strides() const { return strides_; }
    std::size_t size() const { return values_.size(); }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::size_t linear(const MultiIndex<Dim>& idx) const
    {
        std::size_t l = 0;
        for (int d = 0; d < Dim; ++d)
            l += static_cast<std::size_t>(idx[d]) * strides_[d];
        return l;
    }

    MultiIndex<Dim> multi(std::size_t l) const
    {
        MultiIndex<Dim> idx{};
        for (int d = 0; d < Dim; ++d) {
            idx[d] = static_cast<int>(l / strides_[d]);
            l %= strides_[d];
        }
        return idx;
    }

    double& at(const MultiIndex<Dim>& idx) { return values_[linear(idx)]; }
    double at(const MultiIndex<Dim>& idx) const { return values_[linear(idx)]; }

    /// Coordinate of node index i along axis d (index may lie outside the grid: ghost nodes).
    double coord(int d, int i) const { return domain_.lower[d] + (i + 0.5) * h_; }

    Vec<Dim> position(const MultiIndex<Dim>& idx) const
    {
        Vec<Dim> x;
        for (int d = 0; d < Dim; ++d)
            x[d] = coord(d, idx[d]);
        return x;
    }
    Vec<Dim> position(std::size_t l) const { return position(multi(l)); }

    double max_abs() const
    {
        double m = 0.0;
        for (double v : values_)
            m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    /// Same geometry, new values.
    GridField like(double fill = 0.0) const
    {
        GridField g = *this;
        std::fill(g.values_.begin(), g.values_.end(), fill);
        return g;
    }

private:
    BoxDomain<Dim> domain_;
    double h_;
    MultiIndex<Dim> extents_{};
    MultiIndex<Dim> strides_{};
    std::vector<double> values_;
};

template <int Dim>
using VectorField = std::array<GridField<Dim>, Dim>;

/// Samples f at every cell center.
template <int Dim, class F>
GridField<Dim> build_field(const BoxDomain<Dim>& domain, double h, F&& f)
{
    GridField<Dim> g(domain, h);
    for (std::size_t l = 0; l < g.size(); ++l) {
        g[l] = f(g.position(l));
        if (!std::isfinite(g[l]))
            throw DomainError("build_field: function produced a non-finite value");
    }
    return g;
}

/// True when x lies in the interpolation-valid region (domain shrunk by one cell).
template <int Dim>
bool in_valid_region(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x)
{
    const double h = g.h();
    for (int d = 0; d < Dim; ++d)
        if (!(x[d] >= g.domain().lower[d] + h - 1e-12 * h && x[d] <= g.domain().upper[d] - h + 1e-12 * h))
            return false;
    return true;
}

namespace detail {

// Multilinear weights of the 2^Dim nodes around x. No range check.
template <int Dim, class Visit>
void for_each_corner(const GridField<Dim>& g, const Vec<Dim>& x, Visit&& visit)
{
    MultiIndex<Dim> base{};
    std::array<double, Dim> frac{};
    for (int d = 0; d < Dim; ++d) {
        const double s = (x[d] - g.domain().lower[d]) / g.h() - 0.5;
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, g.extents()[d] - 2);
        base[d] = i;
        frac[d] = s - i;
    }
    for (int corner = 0; corner < (1 << Dim); ++corner) {
        double w = 1.0;
        std::size_t l = 0;
        for (int d = 0; d < Dim; ++d) {
            const int bit = (corner >> d) & 1;
            w *= bit ? frac[d] : 1.0 - frac[d];
            l += static_cast<std::size_t>(base[d] + bit) * g.strides()[d];
        }
        visit(l, w);
    }
}

template <int Dim>
double interpolate_unchecked(const GridField<Dim>& g, const Vec<Dim>& x)
{
    double v = 0.0;
    for_each_corner(g, x, [&](std::size_t l, double w) { v += w * g[l]; });
    return v;
}

} // namespace detail

/// Multilinear interpolation from the surrounding 2^Dim nodes.
template <int Dim>
double interpolate(const GridField<Dim>& g, const std::type_identity_t<Vec<Dim>>& x)
{
    if (!in_valid_region(g, x))
        throw RadiusError("interpolate: point outside the valid interpolation region");
    return detail::interpolate_unchecked(g, x);
}

/// Centered differences in the interior, one-sided (second order) on the boundary layer.
template <int Dim>
VectorField<Dim> gradient(const GridField<Dim>& g)
{
    VectorField<Dim> out = [&]<std::size_t... I>(std::index_sequence<I...>) {
        return VectorField<Dim>{((void)I, g.like())...};
    }(std::make_index_sequence<Dim>{});
    const double inv2h = 0.5 / g.h();
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto idx = g.multi(l);
        for (int d = 0; d < Dim; ++d) {
            const std::size_t s = g.strides()[d];
            const int n = g.extents()[d];
            double v;
            if (idx[d] == 0)
                v = (-3.0 * g[l] + 4.0 * g[l + s] - g[l + 2 * s]) * inv2h;
            else if (idx[d] == n - 1)
                v = (3.0 * g[l] - 4.0 * g[l - s] + g[l - 2 * s]) * inv2h;
            else
                v = (g[l + s] - g[l - s]) * inv2h;
            out[d][l] = v;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: little-endian binary (dim, extents, lower corner, h, values)
// and a CSV debug dump.

namespace detail {

template <class T>
void write_le(std::ostream& os, T v)
{
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), 8);
}

template <class T>
T read_le(std::istream& is)
{
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), 8);
    if (!is)
        throw DomainError("read_binary: truncated grid stream");
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap64(bits);
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

template <int Dim>
void write_binary(const GridField<Dim>& g, std::ostream& os)
{
    detail::write_le<std::int64_t>(os, Dim);
    for (int d = 0; d < Dim; ++d)
        detail::write_le<std::int64_t>(os, g.extents()[d]);
    for (int d = 0; d < Dim; ++d)
        detail::write_le<double>(os, g.domain().lower[d]);
    detail::write_le<double>(os, g.h());
    for (double v : g.values())
        detail::write_le<double>(os, v);
}

template <int Dim>
GridField<Dim> read_binary(std::istream& is)
{
    const auto dim = detail::read_le<std::int64_t>(is);
    if (dim != Dim)
        throw DomainError("read_binary: dimension mismatch");
    MultiIndex<Dim> ext{};
    for (int d = 0; d < Dim; ++d)
        ext[d] = static_cast<int>(detail::read_le<std::int64_t>(is));
    Vec<Dim> lower;
    for (int d = 0; d < Dim; ++d)
        lower[d] = detail::read_le<double>(is);
    const double h = detail::read_le<double>(is);
    Vec<Dim> upper = lower;
    for (int d = 0; d < Dim; ++d)
        upper[d] += ext[d] * h;
    GridField<Dim> g(BoxDomain<Dim>(lower, upper), h);
    for (auto& v : g.values())
        v = detail::read_le<double>(is);
    return g;
}

template <int Dim>
void write_csv(const GridField<Dim>& g, std::ostream& os)
{
    const auto old_prec = os.precision(17);
    for (int d = 0; d < Dim; ++d)
        os << 'x' << d << ',';
    os << "value\n";
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto x = g.position(l);
        for (int d = 0; d < Dim; ++d)
            os << x[d] << ',';
        os << g[l] << '\n';
    }
    os.precision(old_prec);
}

} // namespace fbx
