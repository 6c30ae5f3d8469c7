#pragma once

#include "fbx/grid.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#ifdef FBX_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_set>
#include <vector>

namespace fbx {

/// Obstacle problem div(r^a grad u) = k r^a chi_{u>0}, u >= 0, with Dirichlet data g.
/// For a > 0 the grid is the (z, r) rectangle and r is the last coordinate.
template <int Dim>
struct ObstacleProblemSpec {
    BoxDomain<Dim> domain;
    double h = 0.0;
    double weight_exponent = 0.0;
    double forcing = 1.0;
    std::function<double(const Vec<Dim>&)> boundary;

    void validate() const
    {
        if (!(weight_exponent >= 0.0) || !std::isfinite(weight_exponent))
            throw DomainError("ObstacleProblemSpec: weight exponent must be nonnegative");
        if (weight_exponent > 0.0 && (Dim != 2 || domain.lower[Dim - 1] < 0.0))
            throw DomainError("ObstacleProblemSpec: weighted operator needs the 2D (z, r) rectangle with r >= 0");
        if (!(forcing > 0.0) || !std::isfinite(forcing))
            throw DomainError("ObstacleProblemSpec: forcing coefficient must be positive");
        if (!boundary)
            throw DomainError("ObstacleProblemSpec: boundary data missing");
    }
};

/// Per-node conservative 5/7-point operator. face[2*Dim*l + 2*d + s] is the coefficient of the
/// neighbor along axis d on side s (0 = minus, 1 = plus); ghost neighbors are folded into
/// `boundary`. (L u)_l = sum_nb face * u_nb + boundary_l - diag_l * u_l.
template <int Dim>
struct Stencil {
    GridField<Dim> geometry;
    std::vector<double> face;
    std::vector<double> diag;
    std::vector<double> boundary;
    std::vector<double> rhs;
    std::vector<double> node_weight; ///< r^a at the node (1 when a = 0)
    std::vector<std::uint8_t> ghost; ///< bit 2d+s set when that neighbor is a ghost node

    std::size_t size() const { return diag.size(); }

    bool has_neighbor(std::size_t l, int d, int s) const { return !((ghost[l] >> (2 * d + s)) & 1u); }

    std::size_t neighbor(std::size_t l, int d, int s) const
    {
        const std::size_t st = geometry.strides()[d];
        return s ? l + st : l - st;
    }

    /// Off-diagonal part: sum over grid neighbours of face * u_nb, plus the ghost contribution.
    double off_diagonal(const std::vector<double>& u, std::size_t l) const
    {
        const double* c = &face[2 * Dim * l];
        double acc = boundary[l];
        if (ghost[l] == 0) {
            for (int d = 0; d < Dim; ++d) {
                const std::size_t st = geometry.strides()[d];
                acc += c[2 * d] * u[l - st] + c[2 * d + 1] * u[l + st];
            }
            return acc;
        }
        for (int d = 0; d < Dim; ++d)
            for (int s = 0; s < 2; ++s)
                if (has_neighbor(l, d, s))
                    acc += c[2 * d + s] * u[neighbor(l, d, s)];
        return acc;
    }

    double apply(const std::vector<double>& u, std::size_t l) const { return off_diagonal(u, l) - diag[l] * u[l]; }

    /// Quadratic energy 1/2 u.Mu - q.u of the complementarity problem (M = -L without ghosts,
    /// q = ghost term - f). Projected relaxation with omega in (0, 2) never increases it.
    double energy(const std::vector<double>& u) const
    {
        double e = 0.0;
        for (std::size_t l = 0; l < u.size(); ++l) {
            const double mu = diag[l] * u[l] - (off_diagonal(u, l) - boundary[l]);
            e += u[l] * (0.5 * mu - (boundary[l] - rhs[l]));
        }
        return e;
    }
};

template <int Dim>
Stencil<Dim> assemble_stencil(const ObstacleProblemSpec<Dim>& spec)
{
    spec.validate();
    Stencil<Dim> st{GridField<Dim>(spec.domain, spec.h), {}, {}, {}, {}, {}, {}};
    const auto& g = st.geometry;
    const std::size_t n = g.size();
    const double h = spec.h;
    const double a = spec.weight_exponent;
    const double inv_h2 = 1.0 / (h * h);
    st.face.assign(2 * Dim * n, 0.0);
    st.diag.assign(n, 0.0);
    st.boundary.assign(n, 0.0);
    st.rhs.assign(n, 0.0);
    st.node_weight.assign(n, 0.0);
    st.ghost.assign(n, 0);

    auto weight = [a](double r) { return a == 0.0 ? 1.0 : (r <= 0.0 ? 0.0 : std::pow(r, a)); };

    for (std::size_t l = 0; l < n; ++l) {
        const auto idx = g.multi(l);
        const double r_node = g.coord(Dim - 1, idx[Dim - 1]);
        st.node_weight[l] = weight(r_node);
        st.rhs[l] = spec.forcing * st.node_weight[l];
        for (int d = 0; d < Dim; ++d) {
            for (int s = 0; s < 2; ++s) {
                const int j = idx[d] + (s ? 1 : -1);
                double w;
                if (d == Dim - 1)
                    w = weight(0.5 * (r_node + g.coord(d, j)));
                else
                    w = weight(r_node);
                const double c = w * inv_h2;
                st.diag[l] += c;
                if (j < 0 || j >= g.extents()[d]) {
                    st.ghost[l] |= static_cast<std::uint8_t>(1u << (2 * d + s));
                    if (c != 0.0) {
                        auto gi = idx;
                        gi[d] = j;
                        const double gv = spec.boundary(g.position(gi));
                        if (!std::isfinite(gv) || gv < 0.0)
                            throw DomainError("boundary data must be finite and nonnegative");
                        st.boundary[l] += c * gv;
                    }
                } else {
                    st.face[2 * Dim * l + 2 * d + s] = c;
                }
            }
        }
    }
    return st;
}

/// Discrete operator applied to a field (ghost values from the problem boundary data).
template <int Dim>
GridField<Dim> apply_operator(const Stencil<Dim>& st, const GridField<Dim>& u)
{
    GridField<Dim> out = u.like();
    for (std::size_t l = 0; l < u.size(); ++l)
        out[l] = st.apply(u.values(), l);
    return out;
}

/// Residuals are the raw operator residuals f - Lu (fields are O(1) on the unit box). Their
/// evaluation loses about eps_mach * diag * |u| to cancellation, which at fine grids exceeds the
/// default tolerance; `roundoff_floor` records that bound and convergence is judged against
/// max(tol, roundoff_floor).
struct SolveReport {
    long iterations = 0;
    long coarse_iterations = 0; ///< active-set iterations spent on nested coarse-grid starts
    double comp_residual = 0.0;        ///< max |min(u, f - Lu)|
    double pde_residual = 0.0;         ///< max |Lu - f| on {u > eps_c}
    double positivity_violation = 0.0; ///< max(0, -min u)
    double multiplier_violation = 0.0; ///< max (Lu - f)^+ on {u <= eps_c}
    double min_u = 0.0;
    double roundoff_floor = 0.0;
    bool converged = false;
    std::string method;
    bool fell_back = false; ///< active-set run that finished with PSOR
};

namespace detail {

// Cancellation bound for the residual at node l: 8 eps times the sum of absolute stencil terms.
template <int Dim>
double residual_roundoff(const Stencil<Dim>& st, const std::vector<double>& u, std::size_t l)
{
    double acc = std::abs(st.boundary[l]) + st.diag[l] * std::abs(u[l]) + std::abs(st.rhs[l]);
    for (int d = 0; d < Dim; ++d)
        for (int s = 0; s < 2; ++s)
            if (st.has_neighbor(l, d, s))
                acc += st.face[2 * Dim * l + 2 * d + s] * std::abs(u[st.neighbor(l, d, s)]);
    return 8.0 * std::numeric_limits<double>::epsilon() * acc;
}

template <int Dim>
double roundoff_floor(const Stencil<Dim>& st, const std::vector<double>& u)
{
    double m = 0.0;
    for (std::size_t l = 0; l < u.size(); ++l)
        m = std::max(m, residual_roundoff(st, u, l));
    return m;
}

} // namespace detail

template <int Dim>
SolveReport complementarity_check(const Stencil<Dim>& st, const GridField<Dim>& u)
{
    SolveReport r;
    const double eps_c = contact_threshold(st.geometry.h());
    r.min_u = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < u.size(); ++l) {
        const double ul = u[l];
        const double res = st.apply(u.values(), l) - st.rhs[l]; // Lu - f
        r.min_u = std::min(r.min_u, ul);
        r.comp_residual = std::max(r.comp_residual, std::abs(std::min(ul, -res)));
        if (ul > eps_c)
            r.pde_residual = std::max(r.pde_residual, std::abs(res));
        else
            r.multiplier_violation = std::max(r.multiplier_violation, std::max(res, 0.0));
    }
    r.positivity_violation = std::max(0.0, -r.min_u);
    r.roundoff_floor = detail::roundoff_floor(st, u.values());
    return r;
}

template <int Dim>
SolveReport complementarity_check(const GridField<Dim>& u, const ObstacleProblemSpec<Dim>& spec)
{
    return complementarity_check(assemble_stencil(spec), u);
}

template <int Dim>
struct SolveResult {
    GridField<Dim> u;
    SolveReport report;
    std::vector<double> history; ///< complementarity residual after each sweep / outer step
    std::vector<double> energy;  ///< PSOR only: quadratic energy after each sweep
    std::vector<std::uint8_t> active;
};

/// Relaxation parameter of optimal SOR for the Dirichlet Laplacian on the grid's box.
template <int Dim>
double optimal_omega(const GridField<Dim>& g)
{
    double rho = 0.0;
    for (int d = 0; d < Dim; ++d)
        rho += std::cos(std::numbers::pi / g.extents()[d]);
    rho /= Dim;
    return 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));
}

struct PsorOptions {
    double omega = 1.8;
    double tol = 1e-10;
    long max_iter = 200000;
    bool record_history = true;
    bool record_energy = false;
};

namespace detail {

struct ResidualPair {
    double residual = 0.0;
    double floor = 0.0;
    bool below(double tol) const { return residual < std::max(tol, floor); }
};

// The cancellation floor only matters close to convergence; it is skipped while the residual
// is still large (the floor stays below 1e-7 for every grid this code targets).
template <int Dim>
ResidualPair max_comp_residual(const Stencil<Dim>& st, const std::vector<double>& u)
{
    ResidualPair r;
    for (std::size_t l = 0; l < u.size(); ++l) {
        const double res = st.rhs[l] - st.apply(u, l);
        r.residual = std::max(r.residual, std::abs(std::min(u[l], res)));
    }
    if (r.residual < 1e-6)
        r.floor = roundoff_floor(st, u);
    return r;
}

template <int Dim>
SolveResult<Dim> psor_from(const Stencil<Dim>& st, std::vector<double> u, const PsorOptions& opt)
{
    if (!(opt.omega >= 1.0 && opt.omega < 2.0))
        throw DomainError("solve_psor: relaxation must lie in [1, 2)");
    if (!(opt.tol > 0.0))
        throw DomainError("solve_psor: tolerance must be positive");
    SolveResult<Dim> out{st.geometry.like(), {}, {}, {}, {}};
    const std::size_t n = st.size();
    for (auto& v : u)
        v = std::max(v, 0.0);
    ResidualPair res;
    long it = 0;
    do {
        for (std::size_t l = 0; l < n; ++l) {
            const double gs = (st.off_diagonal(u, l) - st.rhs[l]) / st.diag[l];
            u[l] = std::max(0.0, u[l] + opt.omega * (gs - u[l]));
        }
        ++it;
        res = max_comp_residual(st, u);
        if (!std::isfinite(res.residual))
            throw NumericalError("solve_psor: non-finite residual");
        if (opt.record_history)
            out.history.push_back(res.residual);
        if (opt.record_energy)
            out.energy.push_back(st.energy(u));
    } while (!res.below(opt.tol) && it < opt.max_iter);
    out.u.values() = std::move(u);
    out.report = complementarity_check(st, out.u);
    out.report.iterations = it;
    out.report.converged = out.report.comp_residual < std::max(opt.tol, out.report.roundoff_floor);
    out.report.method = "psor";
    return out;
}

} // namespace detail

template <int Dim>
SolveResult<Dim> solve_psor(const ObstacleProblemSpec<Dim>& spec, const PsorOptions& opt = {},
                            const GridField<Dim>* initial = nullptr)
{
    const auto st = assemble_stencil(spec);
    std::vector<double> u0 = initial ? initial->values() : std::vector<double>(st.size(), 0.0);
    if (u0.size() != st.size())
        throw DomainError("solve_psor: initial guess has the wrong size");
    return detail::psor_from(st, std::move(u0), opt);
}

struct ActiveSetOptions {
    double tol = 1e-10;
    int max_outer = 60;
    double fallback_omega = 1.8;
    /// Cold starts are initialized from the same problem solved on a grid twice as coarse
    /// (recursively). The active set then only has to move by a cell or two per level,
    /// instead of one cell per outer iteration across the whole contact region.
    bool nested_start = true;
};

/// Primal-dual active-set iteration. The sparsity pattern is fixed (active rows and columns are
/// replaced by identity rows) so the symbolic factorization is computed once.
template <int Dim>
class ActiveSetSolver {
public:
    explicit ActiveSetSolver(const ObstacleProblemSpec<Dim>& spec) : st_(assemble_stencil(spec))
    {
        const std::size_t n = st_.size();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(n * (2 * Dim + 1));
        for (std::size_t l = 0; l < n; ++l) {
            trip.emplace_back(l, l, 1.0);
            for (int d = 0; d < Dim; ++d)
                for (int s = 0; s < 2; ++s)
                    if (st_.has_neighbor(l, d, s))
                        trip.emplace_back(l, st_.neighbor(l, d, s), 1.0);
        }
        A_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        A_.setFromTriplets(trip.begin(), trip.end());
        A_.makeCompressed();
        ldlt_.analyzePattern(A_);
    }

    const Stencil<Dim>& stencil() const { return st_; }

    /// Changes k without re-assembling; the factorization pattern is reused.
    void set_forcing(double k)
    {
        if (!(k > 0.0) || !std::isfinite(k))
            throw DomainError("forcing coefficient must be positive");
        for (std::size_t l = 0; l < st_.size(); ++l)
            st_.rhs[l] = k * st_.node_weight[l];
    }

    SolveResult<Dim> solve(const ActiveSetOptions& opt = {}, const GridField<Dim>* initial = nullptr)
    {
        const std::size_t n = st_.size();
        std::vector<double> u(n, 0.0);
        std::vector<std::uint8_t> active(n, 0);
        if (initial) {
            if (initial->size() != n)
                throw DomainError("solve_active_set: initial guess has the wrong size");
            u = initial->values();
            update_active(u, active, opt.tol);
        }
        SolveResult<Dim> out{st_.geometry.like(), {}, {}, {}, {}};
        std::unordered_set<std::uint64_t> seen;
        seen.insert(hash(active));
        int it = 0;
        bool done = false;
        bool cycled = false;
        while (it < opt.max_outer) {
            ++it;
            inner_solve(active, u);
            std::vector<std::uint8_t> next = active;
            update_active(u, next, opt.tol);
            out.history.push_back(detail::max_comp_residual(st_, clipped(u)).residual);
            if (next == active) {
                done = true;
                break;
            }
            active = std::move(next);
            if (!seen.insert(hash(active)).second) {
                cycled = true;
                break;
            }
        }
        u = clipped(u);
        if (done) {
            out.u.values() = std::move(u);
            out.report = complementarity_check(st_, out.u);
            out.report.iterations = it;
            out.report.converged = out.report.comp_residual < std::max(opt.tol, out.report.roundoff_floor);
            out.report.method = "active_set";
            out.active = std::move(active);
        }
        if (!done || !out.report.converged) {
            // Cycle, outer-iteration cap, or a fixed point that misses the tolerance.
            (void)cycled;
            PsorOptions po;
            po.omega = opt.fallback_omega;
            po.tol = opt.tol;
            po.record_history = false;
            auto fb = detail::psor_from(st_, done ? out.u.values() : u, po);
            fb.report.iterations += it;
            fb.report.method = "active_set";
            fb.report.fell_back = true;
            fb.history = std::move(out.history);
            fb.active.assign(n, 0);
            for (std::size_t l = 0; l < n; ++l)
                fb.active[l] = fb.u[l] <= 0.0;
            return fb;
        }
        return out;
    }

private:
    static std::vector<double> clipped(std::vector<double> u)
    {
        for (auto& v : u)
            v = std::max(v, 0.0);
        return u;
    }

    static std::uint64_t hash(const std::vector<std::uint8_t>& a)
    {
        std::uint64_t h = 1469598103934665603ull;
        for (auto v : a) {
            h ^= v;
            h *= 1099511628211ull;
        }
        return h;
    }

    void update_active(const std::vector<double>& u, std::vector<std::uint8_t>& active, double tol) const
    {
        // Compare in units of u; the threshold sits above the cancellation error of mu.
        for (std::size_t l = 0; l < u.size(); ++l) {
            const double mu = st_.rhs[l] - st_.apply(u, l);
            const double thr = 0.01 * tol + detail::residual_roundoff(st_, u, l);
            active[l] = ((mu - thr) / st_.diag[l] - u[l] > 0.0) ? 1 : 0;
        }
    }

    void inner_solve(const std::vector<std::uint8_t>& active, std::vector<double>& u)
    {
        const std::size_t n = st_.size();
        Eigen::VectorXd b(static_cast<Eigen::Index>(n));
        for (Eigen::Index col = 0; col < A_.outerSize(); ++col) {
            for (typename Eigen::SparseMatrix<double>::InnerIterator itr(A_, col); itr; ++itr) {
                const auto i = static_cast<std::size_t>(itr.row());
                const auto j = static_cast<std::size_t>(itr.col());
                if (i == j)
                    itr.valueRef() = active[i] ? 1.0 : st_.diag[i];
                else if (active[i] || active[j])
                    itr.valueRef() = 0.0;
                else
                    itr.valueRef() = -coef(i, j);
            }
        }
        for (std::size_t l = 0; l < n; ++l)
            b[static_cast<Eigen::Index>(l)] = active[l] ? 0.0 : st_.boundary[l] - st_.rhs[l];
        ldlt_.factorize(A_);
        if (ldlt_.info() != Eigen::Success)
            throw NumericalError("solve_active_set: singular inner system");
        Eigen::VectorXd x = ldlt_.solve(b);
        if (ldlt_.info() != Eigen::Success || !x.allFinite())
            throw NumericalError("solve_active_set: inner solve failed");
        // one step of iterative refinement brings the residual down to the evaluation floor
        const Eigen::VectorXd r = b - A_ * x;
        x += ldlt_.solve(r);
        for (std::size_t l = 0; l < n; ++l)
            u[l] = x[static_cast<Eigen::Index>(l)];
    }

    double coef(std::size_t i, std::size_t j) const
    {
        for (int d = 0; d < Dim; ++d)
            for (int s = 0; s < 2; ++s)
                if (st_.has_neighbor(i, d, s) && st_.neighbor(i, d, s) == j)
                    return st_.face[2 * Dim * i + 2 * d + s];
        return 0.0;
    }

    Stencil<Dim> st_;
    Eigen::SparseMatrix<double> A_;
#ifdef FBX_HAVE_CHOLMOD
    Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> ldlt_;
#else
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
#endif
};

template <int Dim>
SolveResult<Dim> solve_active_set(const ObstacleProblemSpec<Dim>& spec, const ActiveSetOptions& opt = {},
                                  const GridField<Dim>* initial = nullptr)
{
    if (initial == nullptr && opt.nested_start) {
        bool coarsenable = true;
        GridField<Dim> fine(spec.domain, spec.h);
        for (int d = 0; d < Dim; ++d)
            coarsenable = coarsenable && fine.extents()[d] % 2 == 0 && fine.extents()[d] >= 32;
        if (coarsenable) {
            ObstacleProblemSpec<Dim> coarse_spec = spec;
            coarse_spec.h = 2.0 * spec.h;
            const auto coarse = solve_active_set(coarse_spec, opt);
            GridField<Dim> guess = fine;
            for (std::size_t l = 0; l < guess.size(); ++l)
                guess[l] = detail::interpolate_unchecked(coarse.u, guess.position(l));
            ActiveSetSolver<Dim> solver(spec);
            auto out = solver.solve(opt, &guess);
            out.report.coarse_iterations = coarse.report.iterations + coarse.report.coarse_iterations;
            return out;
        }
    }
    ActiveSetSolver<Dim> solver(spec);
    return solver.solve(opt, initial);
}

/// Boolean contact mask {u <= eps}.
template <int Dim>
std::vector<std::uint8_t> contact_mask(const GridField<Dim>& u, double eps)
{
    std::vector<std::uint8_t> m(u.size());
    for (std::size_t l = 0; l < u.size(); ++l)
        m[l] = u[l] <= eps;
    return m;
}

} // namespace fbx
