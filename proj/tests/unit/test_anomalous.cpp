#include "fbx/anomalous.hpp"

#include <gtest/gtest.h>

using namespace fbx;

namespace {

const BoxDomain<2> kHalfPlane(Vec<2>(-1.0, 0.0), Vec<2>(1.0, 1.0));

// u = k/2 ((r - f(z))^+)^2 with contact set {r <= f(|z|)}
GridField<2> synthetic_cusp(double h, double k, double beta, double c)
{
    return build_field(kHalfPlane, h, [=](const Vec<2>& x) {
        const double f = c * std::pow(std::abs(x[0]), beta);
        const double d = std::max(x[1] - f, 0.0);
        return 0.5 * k * d * d;
    });
}

} // namespace

TEST(AxisymSpec, Validation)
{
    AxisymSpec s;
    EXPECT_NO_THROW(s.validate());
    EXPECT_DOUBLE_EQ(s.weight_exponent(), 1.0);
    EXPECT_EQ(s.effective_dim(), 3);
    s.m = 2;
    EXPECT_THROW(s.validate(), DomainError);
    s = AxisymSpec{};
    s.phi_bc = [](double z) { return 1.0 - 0.5 * z; };
    EXPECT_THROW(s.validate(), DomainError);
    s.phi_bc = [](double z) { return z * z; };
    EXPECT_THROW(s.validate(), DomainError);
}

TEST(TouchPredicate, CentralFirstRowNodes)
{
    const double h = 1.0 / 16;
    auto u = build_field(kHalfPlane, h, [](const Vec<2>& x) { return x[0] * x[0] + x[1]; });
    EXPECT_FALSE(touch_predicate(u));
    const int nz = u.extents()[0];
    u.at({nz / 2, 0}) = 0.0;
    EXPECT_FALSE(touch_predicate(u));
    u.at({nz / 2 - 1, 0}) = 0.0;
    EXPECT_TRUE(touch_predicate(u));
}

TEST(TraceMonotone, DetectsInterleaving)
{
    std::vector<BisectionStep> t{{1.0, false}, {4.0, true}, {2.0, false}, {3.0, true}};
    EXPECT_TRUE(detail::trace_monotone(t));
    t.push_back({3.5, false});
    EXPECT_FALSE(detail::trace_monotone(t));
}

TEST(CuspExponent, RecoversSyntheticPowerLaw)
{
    const double h = 1.0 / 256, k = 3.0;
    for (double beta : {1.2, 1.4}) {
        const auto u = synthetic_cusp(h, k, beta, 0.8);
        const auto fit = cusp_exponent(u, k, {4 * h, 0.3});
        EXPECT_GE(fit.points.size(), 10u);
        EXPECT_NEAR(fit.beta, beta, 0.02);
    }
}

TEST(CuspExponent, TooFewPointsThrows)
{
    const auto u = synthetic_cusp(1.0 / 32, 3.0, 1.2, 0.8);
    EXPECT_THROW(cusp_exponent(u, 3.0, {0.1, 0.2}), DomainError);
}

TEST(PropertyChecks, SyntheticCuspPasses)
{
    const auto u = synthetic_cusp(1.0 / 64, 3.0, 1.2, 0.8);
    const auto pc = check_properties(u);
    EXPECT_TRUE(pc.symmetric);
    EXPECT_TRUE(pc.slices_are_intervals);
    EXPECT_TRUE(pc.monotone_in_z);
    EXPECT_TRUE(pc.pass());
}

TEST(PropertyChecks, DetectsBrokenSymmetryAndMonotonicity)
{
    auto u = build_field(kHalfPlane, 1.0 / 32, [](const Vec<2>& x) { return 1.0 + x[0]; });
    const auto pc = check_properties(u);
    EXPECT_FALSE(pc.symmetric);
    EXPECT_FALSE(pc.monotone_in_z);
    // two positive runs in a row slice
    auto v = build_field(kHalfPlane, 1.0 / 32, [](const Vec<2>& x) { return std::abs(x[0]) < 0.2 ? 0.0 : 1.0; });
    EXPECT_FALSE(check_properties(v).slices_are_intervals);
}

TEST(ThreeHalvesCheck, CuspSteeperThanThreeHalvesViolates)
{
    // r = z^1.2 is above C rho^{3/2} near the origin for any C fitted on the outer band
    std::vector<Eigen::Vector2d> pts;
    for (double z = 0.01; z < 0.3; z += 0.005)
        pts.emplace_back(z, std::pow(z, 1.2));
    EXPECT_TRUE(three_halves_check(pts, {0.1, 0.2}, {0.01, 0.05}).violated);
    pts.clear();
    for (double z = 0.01; z < 0.3; z += 0.005)
        pts.emplace_back(z, std::pow(z, 2.0));
    EXPECT_FALSE(three_halves_check(pts, {0.1, 0.2}, {0.01, 0.05}).violated);
}

TEST(FindKStar, CoarseGridBisection)
{
    AxisymSpec s;
    s.h = 1.0 / 32;
    const auto r = find_k_star(s, std::pair{1.0, 8.0}, 1e-3);
    EXPECT_TRUE(r.monotone);
    EXPECT_LE(r.k_hi / r.k_lo - 1.0, 1e-3);
    EXPECT_GT(r.k_star, 1.0);
    EXPECT_LT(r.k_star, 8.0);
    ASSERT_TRUE(r.solution.has_value());
    EXPECT_TRUE(r.solution->report.converged);
    // just above k_star the origin is in contact, just below it is not
    for (const auto& st : r.trace)
        EXPECT_EQ(st.touches, st.k >= r.k_hi);
}
