#pragma once

#include "fbx/classifier.hpp"
#include "fbx/rayleigh.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fbx {

/// Weighted axisymmetric obstacle problem div(r^a grad u) = k r^a chi_{u>0} on
/// (z, r) in (-1, 1) x (0, 1), a = n - m - 1, u = 0 at z = +-1 and u = phi_bc(z) at r = 1.
struct AxisymSpec {
    int n = 3;
    int m = 1;
    double h = 1.0 / 128;
    std::function<double(double)> phi_bc = [](double z) { return std::max(1.0 - z * z, 0.0); };

    double weight_exponent() const { return n - m - 1; }
    int effective_dim() const { return n - m + 1; }

    void validate() const
    {
        if (m < 1 || n - m - 1 < 1)
            throw DomainError("AxisymSpec: need 1 <= m <= n - 2");
        if (!phi_bc)
            throw DomainError("AxisymSpec: missing boundary profile");
        for (int i = 0; i <= 200; ++i) {
            const double z = -1.0 + 2.0 * i / 200;
            const double v = phi_bc(z);
            if (!(v >= 0.0) || std::abs(v - phi_bc(-z)) > 1e-14)
                throw DomainError("AxisymSpec: boundary profile must be nonnegative and even");
            if (z > 0.0 && v > phi_bc(z - 0.01) + 1e-14)
                throw DomainError("AxisymSpec: boundary profile must be nonincreasing on (0, 1)");
        }
        if (std::abs(phi_bc(1.0)) > 1e-14)
            throw DomainError("AxisymSpec: boundary profile must vanish at z = +-1");
    }

    ObstacleProblemSpec<2> problem(double k) const
    {
        auto phi = phi_bc;
        // ghost nodes: beyond z = +-1 the data is 0, above r = 1 it is phi(z)
        return ObstacleProblemSpec<2>{BoxDomain<2>(Vec<2>(-1.0, 0.0), Vec<2>(1.0, 1.0)), h, weight_exponent(), k,
                                      [phi](const Vec<2>& x) { return std::abs(x[0]) >= 1.0 ? 0.0 : phi(x[0]); }};
    }
};

/// True iff the first-row nodes next to z = 0 are in contact: {u = 0} has reached the axis at the
/// origin.
inline bool touch_predicate(const GridField<2>& u)
{
    const double eps = contact_threshold(u.h());
    const int nz = u.extents()[0];
    if (nz % 2 == 0)
        return u.at({nz / 2 - 1, 0}) <= eps && u.at({nz / 2, 0}) <= eps;
    return u.at({nz / 2, 0}) <= eps;
}

struct BisectionStep {
    double k = 0.0;
    bool touches = false;
    long iterations = 0;
    double h = 0.0;
};

struct KStarResult {
    double k_star = 0.0;
    double k_lo = 0.0, k_hi = 0.0;
    std::vector<BisectionStep> trace;
    bool monotone = true;
    int bisections = 0;
    std::optional<SolveResult<2>> solution; ///< at k_star
};

namespace detail {

// Predicate trace is monotone when, ordered by k, every false precedes every true.
inline bool trace_monotone(std::vector<BisectionStep> t)
{
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
    bool seen_true = false;
    for (const auto& s : t) {
        if (s.touches)
            seen_true = true;
        else if (seen_true)
            return false;
    }
    return true;
}

class KSolver {
public:
    explicit KSolver(const AxisymSpec& spec) : spec_(spec), solver_(spec.problem(1.0)) {}

    SolveResult<2> solve(double k)
    {
        SolveResult<2> r = [&] {
            if (!warm_) {
                // cold start through the nested coarse-grid solve
                auto cold = solve_active_set(spec_.problem(k));
                return cold;
            }
            solver_.set_forcing(k);
            return solver_.solve({}, &*warm_);
        }();
        if (!r.report.converged)
            throw NumericalError("find_k_star: weighted solve did not converge at k = " + std::to_string(k));
        warm_ = r.u;
        return r;
    }

private:
    AxisymSpec spec_;
    ActiveSetSolver<2> solver_;
    std::optional<GridField<2>> warm_;
};

} // namespace detail

/// Geometric bisection on the touch predicate until k_hi / k_lo - 1 <= tol_k. Without a bracket
/// the search starts from [0.1, 200]; an end of the bracket on the wrong side of k_star is moved
/// outward by the bracket ratio (at least a factor 2 without a bracket) until the predicate separates.
inline KStarResult find_k_star(const AxisymSpec& spec, std::optional<std::pair<double, double>> bracket = {},
                               double tol_k = 1e-4)
{
    spec.validate();
    detail::KSolver solver(spec);
    KStarResult out;
    auto eval = [&](double k) {
        const auto r = solver.solve(k);
        const BisectionStep s{k, touch_predicate(r.u), r.report.iterations, spec.h};
        out.trace.push_back(s);
        return s.touches;
    };
    double lo = bracket ? bracket->first : 0.1;
    double hi = bracket ? bracket->second : 200.0;
    if (!(lo > 0.0 && hi > lo))
        throw DomainError("find_k_star: invalid bracket");
    const double step = bracket ? hi / lo : 2.0;
    // evaluate the end nearer the previous warm start first
    if (eval(hi)) {
        while (eval(lo)) {
            hi = lo;
            lo /= step;
            if (lo < 1e-8)
                throw DomainError("find_k_star: no k without contact at the origin");
        }
    } else {
        do {
            lo = hi;
            hi *= step;
            if (hi > 1e8)
                throw DomainError("find_k_star: no k with contact at the origin");
        } while (!eval(hi));
    }
    while (hi / lo - 1.0 > tol_k) {
        const double mid = std::sqrt(lo * hi);
        ++out.bisections;
        if (eval(mid))
            hi = mid;
        else
            lo = mid;
    }
    out.monotone = detail::trace_monotone(out.trace);
    if (!out.monotone) {
        // report and continue with the smallest k observed to touch
        double smallest = hi;
        for (const auto& s : out.trace)
            if (s.touches)
                smallest = std::min(smallest, s.k);
        hi = smallest;
    }
    out.k_lo = lo;
    out.k_hi = hi;
    out.k_star = std::sqrt(lo * hi);
    out.solution = solver.solve(out.k_star);
    return out;
}

struct CuspFit {
    double beta = std::numeric_limits<double>::quiet_NaN();
    double residual = 0.0;
    double z_lo = 0.0, z_hi = 0.0;
    std::vector<Eigen::Vector2d> points; ///< (z, r) free-boundary samples used in the fit
};

/// Height of the contact set above the axis in each column z > 0: the last contact node is
/// refined with the first positive node, where u is close to k/2 (r - f)^2.
inline std::vector<Eigen::Vector2d> contact_profile(const GridField<2>& u, double k)
{
    const double eps = contact_threshold(u.h());
    const int nz = u.extents()[0], nr = u.extents()[1];
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < nz; ++i) {
        const double z = u.coord(0, i);
        if (z <= 0.0 || u.at({i, 0}) > eps)
            continue;
        int j = 0;
        while (j < nr && u.at({i, j}) <= eps)
            ++j;
        if (j >= nr)
            continue;
        const double f = u.coord(1, j) - std::sqrt(2.0 * u.at({i, j}) / k);
        pts.emplace_back(z, std::max(f, u.coord(1, j - 1)));
    }
    return pts;
}

/// Least-squares slope of log r against log z along the upper free boundary for z in the window.
inline CuspFit cusp_exponent(const GridField<2>& u, double k, std::pair<double, double> window)
{
    CuspFit fit;
    fit.z_lo = window.first;
    fit.z_hi = window.second;
    std::vector<double> lz, lr;
    for (const auto& p : contact_profile(u, k)) {
        if (p[0] <= window.first || p[0] >= window.second)
            continue;
        fit.points.push_back(p);
        lz.push_back(std::log(p[0]));
        lr.push_back(std::log(p[1]));
    }
    if (lz.size() < 10)
        throw DomainError("cusp_exponent: fewer than 10 free-boundary points in the window");
    // a flat free boundary at height r0 has no cusp at the origin
    const auto lf = detail::line_fit(lz, lr);
    fit.beta = lf.slope;
    fit.residual = lf.residual;
    return fit;
}

/// Contact density |{u = 0} cap B_rho| / |B_rho| in R^N for a contact set {r <= f(|z|)} given by
/// the sub-cell profile, with f linear between samples and f(0) = 0. Counting whole cells instead
/// adds about (h / rho)^2 from the first row of cells along the axis.
inline double profile_contact_density(const std::vector<Eigen::Vector2d>& profile, double rho, int N)
{
    std::vector<Eigen::Vector2d> pts{Eigen::Vector2d(0.0, 0.0)};
    pts.insert(pts.end(), profile.begin(), profile.end());
    auto f = [&](double z) {
        if (z >= pts.back()[0])
            return pts.back()[1];
        const auto it = std::upper_bound(pts.begin(), pts.end(), z, [](double v, const auto& p) { return v < p[0]; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        return a[1] + (b[1] - a[1]) * (z - a[0]) / (b[0] - a[0]);
    };
    // midpoint rule in z; both halves z > 0 and z < 0
    const int n = 4000;
    double vol = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = (i + 0.5) * rho / n;
        const double w = std::min(f(z), std::sqrt(rho * rho - z * z));
        vol += unit_ball_volume(N - 1) * std::pow(w, N - 1);
    }
    vol *= 2.0 * rho / n;
    return vol / (unit_ball_volume(N) * std::pow(rho, N));
}

struct PropertyChecks {
    double symmetry_defect = 0.0;   ///< max |u(z, r) - u(-z, r)|
    double max_dz_positive = 0.0;   ///< max d_z u on {z > 0, u > 0}
    bool slices_are_intervals = true;
    bool symmetric = false;
    bool monotone_in_z = false;

    bool pass() const { return symmetric && monotone_in_z && slices_are_intervals; }
};

inline PropertyChecks check_properties(const GridField<2>& u)
{
    PropertyChecks pc;
    const int nz = u.extents()[0], nr = u.extents()[1];
    const double h = u.h(), eps = contact_threshold(h);
    for (int j = 0; j < nr; ++j) {
        for (int i = 0; i < nz; ++i)
            pc.symmetry_defect = std::max(pc.symmetry_defect, std::abs(u.at({i, j}) - u.at({nz - 1 - i, j})));
        for (int i = 1; i + 1 < nz; ++i)
            if (u.coord(0, i) > 0.0 && u.at({i, j}) > 0.0)
                pc.max_dz_positive = std::max(pc.max_dz_positive, (u.at({i + 1, j}) - u.at({i - 1, j})) / (2.0 * h));
        int runs = 0;
        bool inside = false;
        for (int i = 0; i < nz; ++i) {
            const bool pos = u.at({i, j}) > eps;
            if (pos && !inside)
                ++runs;
            inside = pos;
        }
        if (runs > 1)
            pc.slices_are_intervals = false;
    }
    pc.symmetric = pc.symmetry_defect <= 1e-10;
    pc.monotone_in_z = pc.max_dz_positive <= 5.0 * h;
    return pc;
}

struct ThreeHalvesCheck {
    double c_outer = 0.0;     ///< max r / rho^{3/2} over free-boundary points with rho in the outer band
    double ratio_inner = 0.0; ///< the same ratio over the inner band
    bool violated = false;    ///< inner points exceed the outer constant
};

/// The bound r <= C |(z, r)|^{3/2} fitted on an outer band fails closer to the origin.
inline ThreeHalvesCheck three_halves_check(const std::vector<Eigen::Vector2d>& profile, std::pair<double, double> outer,
                                           std::pair<double, double> inner)
{
    ThreeHalvesCheck s;
    for (const auto& p : profile) {
        const double rho = p.norm();
        const double ratio = p[1] / std::pow(rho, 1.5);
        if (rho >= outer.first && rho <= outer.second)
            s.c_outer = std::max(s.c_outer, ratio);
        if (rho >= inner.first && rho <= inner.second)
            s.ratio_inner = std::max(s.ratio_inner, ratio);
    }
    s.violated = s.c_outer > 0.0 && s.ratio_inner > s.c_outer;
    return s;
}

/// One grid of the coarse-to-fine k_star chain.
struct AnomalousLevel {
    double h = 0.0;
    KStarResult kstar;
    std::optional<CuspFit> cusp; ///< in the final level's cusp window
    std::string cusp_error;
};

struct AnomalousRun {
    AxisymSpec spec;
    std::vector<AnomalousLevel> levels; ///< coarse to fine; the last one is at spec.h
    PointClassification origin;
    RadialProfile profile;
    std::pair<double, double> freq_window;
    std::vector<double> profile_density;    ///< sub-cell contact density, rows as in profile
    double density_exponent = std::numeric_limits<double>::quiet_NaN();
    double cell_density_exponent = std::numeric_limits<double>::quiet_NaN(); ///< from whole-cell counting
    CuspFit cusp;
    double beta_change = std::numeric_limits<double>::quiet_NaN(); ///< |beta(h) - beta(2h)|
    PropertyChecks properties;
    ThreeHalvesCheck three_halves;
    std::vector<Vec<2>> free_boundary;

    const KStarResult& kstar() const { return levels.back().kstar; }
    bool traces_monotone() const
    {
        for (const auto& l : levels)
            if (!l.kstar.monotone)
                return false;
        return true;
    }
};

struct AnomalousOptions {
    double tol_k = 1e-4;
    double coarse_h = 1.0 / 128; ///< first grid of the chain
    double bracket_margin = 0.01; ///< relative half-width of the bracket around the coarser k_star
    std::optional<std::pair<double, double>> freq_window; ///< default [8h, 0.2]
    std::optional<std::pair<double, double>> cusp_window; ///< default (8h, 0.1), the 4h floor of the 2h grid
};

/// Finds k_star on grids coarse_h, coarse_h / 2, ..., spec.h, each bracketed by the previous
/// level, then runs the origin diagnostics on the finest solution.
inline AnomalousRun construct_anomalous(const AxisymSpec& spec, const AnomalousOptions& opt = {})
{
    spec.validate();
    AnomalousRun run;
    run.spec = spec;
    const double h = spec.h;
    const auto cusp_window = opt.cusp_window.value_or(std::pair{8.0 * h, 0.1});

    std::vector<double> grids{h};
    while (grids.back() * 2.0 <= opt.coarse_h * (1.0 + 1e-12))
        grids.push_back(grids.back() * 2.0);
    std::reverse(grids.begin(), grids.end());
    std::optional<std::pair<double, double>> bracket;
    for (double hl : grids) {
        AxisymSpec level_spec = spec;
        level_spec.h = hl;
        AnomalousLevel level;
        level.h = hl;
        level.kstar = find_k_star(level_spec, bracket, opt.tol_k);
        const double k = level.kstar.k_star;
        try {
            level.cusp = cusp_exponent(level.kstar.solution->u, k, cusp_window);
        } catch (const DomainError& e) {
            level.cusp_error = e.what();
        }
        bracket = std::pair{k * (1.0 - opt.bracket_margin), k * (1.0 + opt.bracket_margin)};
        if (hl != h)
            level.kstar.solution.reset();
        run.levels.push_back(std::move(level));
    }

    const double k = run.kstar().k_star;
    const GridField<2>& u = run.kstar().solution->u;
    const int N = spec.effective_dim();
    AxisymSpace space(u, N, k, BallRule::subcell, spec.m - 1);
    const Polynomial p_star(2, {Monomial{1.0 / (2.0 * (spec.n - spec.m)), {0, 2, 0}}});
    run.freq_window = opt.freq_window.value_or(std::pair{8.0 * h, 0.2});
    ClassifierConfig cfg;
    cfg.window = run.freq_window;
    cfg.p_override = p_star;
    cfg.theta = std::pow(2.0, -0.125);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
    run.origin = classify_point(space, x0, cfg);
    run.profile = run.origin.profile;
    run.cell_density_exponent = density_exponent(run.profile, run.freq_window);
    const auto fb_profile = contact_profile(u, k);
    RadialProfile sub = run.profile;
    for (auto& row : sub.rows) {
        row.density = profile_contact_density(fb_profile, row.r, spec.effective_dim());
        run.profile_density.push_back(row.density);
    }
    run.density_exponent = density_exponent(sub, run.freq_window);
    if (!run.levels.back().cusp)
        throw DomainError("construct_anomalous: " + run.levels.back().cusp_error);
    run.cusp = *run.levels.back().cusp;
    if (run.levels.size() >= 2 && run.levels[run.levels.size() - 2].cusp)
        run.beta_change = std::abs(run.cusp.beta - run.levels[run.levels.size() - 2].cusp->beta);
    run.properties = check_properties(u);
    run.three_halves = three_halves_check(fb_profile, {0.1, 0.2}, {4.0 * h, 0.05});
    run.free_boundary = free_boundary_points(u, contact_mask(u, contact_threshold(h)));
    return run;
}

} // namespace fbx
