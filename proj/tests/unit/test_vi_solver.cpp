#include "fbx/fixtures.hpp"
#include "fbx/vi_solver.hpp"

#include <gtest/gtest.h>

using namespace fbx;

namespace {

ObstacleProblemSpec<2> unit_square_spec(double h, std::function<double(const Vec<2>&)> g)
{
    return ObstacleProblemSpec<2>{BoxDomain<2>::cube(1.0), h, 0.0, 1.0, std::move(g)};
}

PsorOptions fast_psor(double h)
{
    PsorOptions o;
    o.omega = optimal_omega(GridField<2>(BoxDomain<2>::cube(1.0), h));
    return o;
}

double sup_error(const GridField<2>& u, const std::function<double(const Vec<2>&)>& f)
{
    double e = 0.0;
    for (std::size_t l = 0; l < u.size(); ++l)
        e = std::max(e, std::abs(u[l] - f(u.position(l))));
    return e;
}

std::function<double(const Vec<2>&)> poly_fixture(const Eigen::Matrix2d& A)
{
    QuadraticBlowup p{Eigen::MatrixXd(A)};
    return [p](const Vec<2>& x) { return p(x); };
}

std::vector<Eigen::Matrix2d> polynomial_matrices()
{
    Eigen::Matrix2d a, b, c, d;
    a << 0.3, 0.0, 0.0, 0.7;
    b << 1.0, 0.0, 0.0, 0.0;
    c << 0.5, 0.0, 0.0, 0.5;
    d << 0.6, 0.2, 0.2, 0.4;
    return {a, b, c, d};
}

} // namespace

TEST(Stencil, ClassicalLaplacianHasUnitFaceWeights)
{
    const double h = 1.0 / 16;
    auto st = assemble_stencil(unit_square_spec(h, [](const Vec<2>&) { return 0.0; }));
    for (std::size_t l = 0; l < st.size(); ++l)
        EXPECT_DOUBLE_EQ(st.diag[l] * h * h, 4.0);
    for (double c : st.face)
        EXPECT_TRUE(c == 0.0 || c * h * h == 1.0);
}

TEST(Stencil, WeightedFacesNearAxis)
{
    const double h = 1.0 / 32;
    ObstacleProblemSpec<2> spec{BoxDomain<2>(Vec<2>(-1, 0), Vec<2>(1, 1)), h, 1.0, 1.0,
                                [](const Vec<2>&) { return 0.0; }};
    auto st = assemble_stencil(spec);
    const std::size_t l = st.geometry.linear({10, 0});
    EXPECT_DOUBLE_EQ(st.geometry.coord(1, 0), h / 2);
    EXPECT_TRUE(st.ghost[l] & (1u << 2));                     // r-minus neighbour is the axis ghost
    EXPECT_DOUBLE_EQ(st.boundary[l], 0.0);                    // zero face weight, no boundary term
    EXPECT_DOUBLE_EQ(st.face[4 * l + 3] * h * h, h);          // upper face at r = h
    EXPECT_DOUBLE_EQ(st.face[4 * l + 0] * h * h, h / 2);      // z faces carry r_node
    EXPECT_DOUBLE_EQ(st.rhs[l], h / 2);
}

TEST(Stencil, WeightedOperatorOnRSquared)
{
    const double h = 1.0 / 64;
    auto r2 = [](const Vec<2>& x) { return x[1] * x[1]; };
    ObstacleProblemSpec<2> spec{BoxDomain<2>(Vec<2>(-1, 0), Vec<2>(1, 1)), h, 1.0, 1.0, r2};
    auto st = assemble_stencil(spec);
    auto u = build_field(spec.domain, h, r2);
    auto Lu = apply_operator(st, u);
    for (std::size_t l = 0; l < u.size(); ++l) {
        const double r = u.position(l)[1];
        EXPECT_NEAR(Lu[l], 4.0 * r, 1e-9) << l; // (r u_r)_r = 4r; flux form is exact here
    }
}

TEST(Psor, ZeroDataGivesZeroInOneSweep)
{
    auto res = solve_psor(unit_square_spec(1.0 / 16, [](const Vec<2>&) { return 0.0; }));
    EXPECT_EQ(res.report.iterations, 1);
    EXPECT_EQ(res.u.max_abs(), 0.0);
    EXPECT_TRUE(res.report.converged);
}

TEST(Psor, RejectsBadOptions)
{
    PsorOptions o;
    o.omega = 2.0;
    EXPECT_THROW(solve_psor(unit_square_spec(1.0 / 16, [](const Vec<2>&) { return 0.0; }), o), DomainError);
    EXPECT_THROW(solve_psor(unit_square_spec(1.0 / 16, [](const Vec<2>&) { return -1.0; })), DomainError);
}

TEST(Psor, PolynomialFixturesAreReproduced)
{
    const double h = 1.0 / 128;
    for (const auto& A : polynomial_matrices()) {
        auto g = poly_fixture(A);
        auto opt = fast_psor(h);
        opt.record_energy = true;
        auto res = solve_psor(unit_square_spec(h, g), opt);
        ASSERT_TRUE(res.report.converged);
        EXPECT_LE(sup_error(res.u, g), 5 * h * h);
        EXPECT_GE(res.report.min_u, 0.0);
        for (std::size_t i = 1; i < res.energy.size(); ++i)
            ASSERT_LE(res.energy[i], res.energy[i - 1] + 1e-12 * std::abs(res.energy[i - 1])) << "sweep " << i;
    }
}

TEST(Psor, ResidualNonIncreasingAfterTenSweeps)
{
    // Gauss-Seidel ordering (omega = 1). Over-relaxed sweeps oscillate in the max norm.
    const double h = 1.0 / 32;
    std::vector<std::function<double(const Vec<2>&)>> fixtures;
    for (const auto& A : polynomial_matrices())
        fixtures.push_back(poly_fixture(A));
    fixtures.push_back(fixture_by_name<2>("halfspace-e1"));
    fixtures.push_back(fixture_by_name<2>("halfspace-angle-30"));
    PsorOptions o;
    o.omega = 1.0;
    for (const auto& g : fixtures) {
        auto res = solve_psor(unit_square_spec(h, g), o);
        ASSERT_TRUE(res.report.converged);
        for (std::size_t i = 10; i < res.history.size(); ++i)
            ASSERT_LE(res.history[i], res.history[i - 1]) << "sweep " << i;
    }
}

TEST(Psor, HalfSpaceFreeBoundaryWithinOneCell)
{
    const double h = 1.0 / 64;
    auto g = fixture_by_name<2>("halfspace-e1");
    auto res = solve_psor(unit_square_spec(h, g), fast_psor(h));
    ASSERT_TRUE(res.report.converged);
    const double eps = contact_threshold(h);
    for (std::size_t l = 0; l < res.u.size(); ++l) {
        const double x = res.u.position(l)[0];
        if (res.u[l] <= eps)
            EXPECT_LE(x, h);
        else
            EXPECT_GE(x, -h);
    }
    EXPECT_LE(sup_error(res.u, g), 5 * h * h);
}

TEST(ActiveSet, AgreesWithPsorAndOracles)
{
    const double h = 1.0 / 128;
    const double tol = 1e-10;
    std::vector<std::function<double(const Vec<2>&)>> fixtures;
    for (const auto& A : polynomial_matrices())
        fixtures.push_back(poly_fixture(A));
    fixtures.push_back(fixture_by_name<2>("halfspace-e1"));
    for (const auto& g : fixtures) {
        auto spec = unit_square_spec(h, g);
        auto a = solve_active_set(spec);
        auto p = solve_psor(spec, fast_psor(h));
        ASSERT_TRUE(a.report.converged);
        EXPECT_FALSE(a.report.fell_back);
        EXPECT_LE(a.report.iterations, 60);
        EXPECT_LE(a.report.comp_residual, 10 * tol);
        double diff = 0.0;
        for (std::size_t l = 0; l < a.u.size(); ++l)
            diff = std::max(diff, std::abs(a.u[l] - p.u[l]));
        EXPECT_LE(diff, 10 * tol);
        EXPECT_LE(sup_error(a.u, g), 5 * h * h);
        // contact sets differ at most by a one-cell layer
        const double eps = contact_threshold(h);
        auto ma = contact_mask(a.u, eps), mp = contact_mask(p.u, eps);
        for (std::size_t l = 0; l < ma.size(); ++l) {
            if (ma[l] == mp[l])
                continue;
            bool near = false;
            for (int d = 0; d < 2; ++d)
                for (int s : {-1, 1}) {
                    auto idx = a.u.multi(l);
                    idx[d] += s;
                    if (idx[d] >= 0 && idx[d] < a.u.extents()[d])
                        near = near || ma[a.u.linear(idx)] != ma[l];
                }
            EXPECT_TRUE(near);
        }
    }
}

TEST(ActiveSet, ZeroDataActivatesEverything)
{
    auto r = solve_active_set(unit_square_spec(1.0 / 16, [](const Vec<2>&) { return 0.0; }));
    EXPECT_TRUE(r.report.converged);
    for (auto v : r.active)
        EXPECT_EQ(v, 1);
    EXPECT_LE(r.report.iterations, 2);
}

TEST(ActiveSet, PositiveDefiniteFixtureHasEmptyActiveSet)
{
    const double h = 1.0 / 64;
    Eigen::Matrix2d A;
    A << 0.3, 0.0, 0.0, 0.7;
    auto r = solve_active_set(unit_square_spec(h, poly_fixture(A)));
    for (std::size_t l = 0; l < r.active.size(); ++l) {
        if (r.active[l]) {
            EXPECT_LE(r.u.position(l).norm(), h);
        }
    }
}

TEST(Solvers, RefinementRatioOnHalfSpace)
{
    auto g = fixture_by_name<2>("halfspace-angle-30");
    std::vector<double> err;
    for (double h : {1.0 / 32, 1.0 / 64, 1.0 / 128}) {
        auto r = solve_active_set(unit_square_spec(h, g));
        err.push_back(sup_error(r.u, g));
    }
    EXPECT_GE(err[0] / err[1], 3.5);
    EXPECT_GE(err[1] / err[2], 3.5);
}

TEST(Solvers, ComparisonPrinciple)
{
    const double h = 1.0 / 64;
    const double tol = 1e-10;
    Eigen::Matrix2d A;
    A << 0.5, 0.0, 0.0, 0.5;
    auto p = poly_fixture(A);
    auto hs = fixture_by_name<2>("halfspace-e1");
    std::vector<std::pair<std::function<double(const Vec<2>&)>, std::function<double(const Vec<2>&)>>> pairs{
        {[&](const Vec<2>& x) { return p(x) + 0.1; }, p},
        {p, [&](const Vec<2>& x) { return std::min(p(x), hs(x)); }},
        {[&](const Vec<2>& x) { return 2.0 * hs(x); }, hs},
    };
    for (auto& [g1, g2] : pairs) {
        auto u1 = solve_active_set(unit_square_spec(h, g1)).u;
        auto u2 = solve_active_set(unit_square_spec(h, g2)).u;
        for (std::size_t l = 0; l < u1.size(); ++l)
            EXPECT_GE(u1[l], u2[l] - 10 * tol);
    }
}

TEST(ComplementarityCheck, Examples)
{
    const double h = 1.0 / 64;
    Eigen::Matrix2d A;
    A << 0.6, 0.2, 0.2, 0.4;
    auto g = poly_fixture(A);
    auto spec = unit_square_spec(h, g);
    auto exact = build_field(spec.domain, h, g);
    auto rep = complementarity_check(exact, spec);
    EXPECT_LE(rep.comp_residual, 5 * h * h);
    EXPECT_LE(rep.pde_residual, 5 * h * h);
    EXPECT_LE(rep.multiplier_violation, 5 * h * h);
    EXPECT_EQ(rep.positivity_violation, 0.0);

    auto bad = exact.like(-h);
    EXPECT_DOUBLE_EQ(complementarity_check(bad, spec).positivity_violation, h);

    auto solved = solve_active_set(spec);
    auto rep2 = complementarity_check(solved.u, spec);
    EXPECT_LE(rep2.comp_residual, 1e-9);
    EXPECT_LE(rep2.pde_residual, 1e-9);
    EXPECT_LE(rep2.multiplier_violation, 1e-9);
}
