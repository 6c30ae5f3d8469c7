#include "fbx/fixtures.hpp"
#include "fbx/grid.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fbx;

TEST(PolynomialSolution, Examples)
{
    auto p = polynomial_solution(QuadraticBlowup::diagonal({1.0, 0.0}));
    EXPECT_DOUBLE_EQ(p(Vec<2>(2, 5)), 2.0);
    auto iso = polynomial_solution(QuadraticBlowup(0.5 * Eigen::MatrixXd::Identity(2, 2)));
    EXPECT_DOUBLE_EQ(iso(Vec<2>(1, 1)), 0.5);
    auto ks = QuadraticBlowup::diagonal({0.3, 0.7}).stratum();
    EXPECT_EQ(ks.m, 0);
    EXPECT_TRUE(ks.kernel.empty());
    EXPECT_EQ(ks.complement.size(), 2u);
}

TEST(PolynomialSolution, RejectsInvalidMatrices)
{
    EXPECT_THROW(QuadraticBlowup::diagonal({0.6, 0.6}), DomainError);
    EXPECT_THROW(QuadraticBlowup::diagonal({1.2, -0.2}), DomainError);
    Eigen::MatrixXd ns(2, 2);
    ns << 0.5, 0.1, 0.0, 0.5;
    EXPECT_THROW(QuadraticBlowup{ns}, DomainError);
}

TEST(PolynomialSolution, DiscreteLaplacianIsOneAndNonnegative)
{
    Eigen::MatrixXd A(3, 3);
    A << 0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2;
    QuadraticBlowup p(A);
    const double h = 1.0 / 16;
    auto g = build_field(BoxDomain<3>::cube(1.0), h, [&](const Vec<3>& x) { return p(x); });
    for (std::size_t l = 0; l < g.size(); ++l) {
        EXPECT_GE(g[l], 0.0);
        const auto idx = g.multi(l);
        bool interior = true;
        for (int d = 0; d < 3; ++d)
            interior = interior && idx[d] > 0 && idx[d] < g.extents()[d] - 1;
        if (!interior)
            continue;
        double lap = -6.0 * g[l];
        for (int d = 0; d < 3; ++d)
            lap += g[l + g.strides()[d]] + g[l - g.strides()[d]];
        EXPECT_NEAR(lap / (h * h), 1.0, 1e-8);
    }
}

TEST(Stratum, KernelBasesAreOrthonormal)
{
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    Eigen::Vector3d v(1, 2, 2);
    v.normalize();
    A = v * v.transpose();
    auto ks = QuadraticBlowup(A).stratum();
    EXPECT_EQ(ks.m, 2);
    std::vector<Eigen::VectorXd> all = ks.kernel;
    all.insert(all.end(), ks.complement.begin(), ks.complement.end());
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = 0; j < all.size(); ++j)
            EXPECT_NEAR(all[i].dot(all[j]), i == j ? 1.0 : 0.0, 1e-10);
    EXPECT_NEAR(std::abs(ks.complement[0].dot(v)), 1.0, 1e-10);
}

TEST(HalfSpace, Examples)
{
    Eigen::VectorXd e1(2);
    e1 << 1, 0;
    auto u = halfspace_solution(e1);
    EXPECT_DOUBLE_EQ(u(Vec<2>(2, 3)), 2.0);
    EXPECT_DOUBLE_EQ(u(Vec<2>(-1, 7)), 0.0);
    Eigen::VectorXd bad(2);
    bad << 1, 1;
    EXPECT_THROW(halfspace_solution(bad), DomainError);
}

TEST(HalfSpace, ComplementarityAwayFromFreeBoundary)
{
    Eigen::VectorXd e(2);
    e << std::cos(0.4), std::sin(0.4);
    auto u = halfspace_solution(e);
    const double h = 1.0 / 32;
    auto g = build_field(BoxDomain<2>::cube(1.0), h, [&](const Vec<2>& x) { return u(x); });
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto idx = g.multi(l);
        if (idx[0] == 0 || idx[1] == 0 || idx[0] == g.extents()[0] - 1 || idx[1] == g.extents()[1] - 1)
            continue;
        const auto x = g.position(l);
        if (std::abs(e.dot(x)) < 1.5 * h) // free-boundary layer
            continue;
        double lap = -4.0 * g[l];
        for (int d = 0; d < 2; ++d)
            lap += g[l + g.strides()[d]] + g[l - g.strides()[d]];
        lap /= h * h;
        EXPECT_GE(g[l], 0.0);
        EXPECT_LE(lap, 1.0 + 1e-9);
        EXPECT_NEAR(g[l] * (lap - 1.0), 0.0, 1e-9);
    }
}

TEST(HomogeneousHarmonic, Examples)
{
    auto q3 = homogeneous_harmonic(2, 3, 0);
    EXPECT_NEAR(q3(Vec<2>(2, 0)), 8.0 / std::sqrt(std::numbers::pi), 1e-12);
    auto q2 = homogeneous_harmonic(2, 2, 1);
    EXPECT_EQ(q2(Vec<2>(0, 0)), 0.0);
    EXPECT_THROW(homogeneous_harmonic(3, 4, 0), DomainError);
    EXPECT_THROW(homogeneous_harmonic(2, 0, 0), DomainError);
}

TEST(HomogeneousHarmonic, EulerIdentityLaplaceAndNormalization)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    std::vector<std::tuple<int, int, int>> cases;
    for (int k = 1; k <= 8; ++k)
        for (int i = 0; i < 2; ++i)
            cases.emplace_back(2, k, i);
    for (int k = 2; k <= 3; ++k)
        for (int i = 0; i <= 2 * k; ++i)
            cases.emplace_back(3, k, i);
    for (auto [n, k, idx] : cases) {
        auto q = homogeneous_harmonic(n, k, idx);
        EXPECT_TRUE(q.laplacian().is_zero(1e-12)) << n << " " << k << " " << idx;
        for (int t = 0; t < 1000; ++t) {
            Eigen::Vector3d x(U(rng), U(rng), n == 3 ? U(rng) : 0.0);
            double euler = 0.0;
            for (int d = 0; d < n; ++d)
                euler += x[d] * q.derivative(x, d);
            EXPECT_NEAR(euler, k * q(x), 1e-10 * std::max(1.0, std::abs(q(x))));
        }
        // unit L2 norm on the sphere, by an independent tensor Gauss rule
        double norm2 = 0.0;
        if (n == 2) {
            const int N = 512;
            for (int j = 0; j < N; ++j) {
                const double t = 2 * std::numbers::pi * j / N;
                norm2 += std::pow(q(Eigen::Vector2d(std::cos(t), std::sin(t))), 2) * 2 * std::numbers::pi / N;
            }
        } else {
            const int N = 200;
            for (int a = 0; a < N; ++a) {
                const double th = std::numbers::pi * (a + 0.5) / N;
                for (int b = 0; b < 2 * N; ++b) {
                    const double ph = std::numbers::pi * (b + 0.5) / N;
                    Eigen::Vector3d x(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
                    norm2 += std::pow(q(x), 2) * std::sin(th) * std::pow(std::numbers::pi / N, 2);
                }
            }
        }
        EXPECT_NEAR(norm2, 1.0, 1e-4) << n << " " << k << " " << idx;
    }
}

TEST(HomogeneousHarmonic, DiscreteMeanValueProperty)
{
    auto q = homogeneous_harmonic(2, 4, 0);
    const Vec<2> c(0.2, -0.1);
    const int N = 256;
    for (double rho : {0.1, 0.3}) {
        double mean = 0.0;
        for (int j = 0; j < N; ++j) {
            const double t = 2 * std::numbers::pi * (j + 0.5) / N;
            mean += q(Vec<2>(c + rho * Vec<2>(std::cos(t), std::sin(t)))) / N;
        }
        EXPECT_NEAR(mean, q(c), 1e-6);
    }
}

TEST(AdmissibleSet, Examples)
{
    EXPECT_DOUBLE_EQ(admissible_set_distance(2, 1, 3.5), 0.0);
    EXPECT_DOUBLE_EQ(admissible_set_distance(2, 1, 3.25), 0.25);
    EXPECT_DOUBLE_EQ(admissible_set_distance(3, 1, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(admissible_set_distance(2, 1, 2.5), 0.5);
    EXPECT_DOUBLE_EQ(admissible_set_distance(2, 1, 5.5), 0.0);
    EXPECT_NEAR(admissible_set_distance(2, 1, 4.6), 0.4, 1e-12);
    EXPECT_DOUBLE_EQ(admissible_set_distance(2, 1, 6.5), 0.5);
    EXPECT_NEAR(admissible_set_distance(2, 1, 7.4), 0.1, 1e-12);
    EXPECT_NEAR(admissible_set_distance(2, 0, 2.3), 0.3, 1e-12);
}

TEST(FixtureRegistry, ResolvesNames)
{
    auto hs = fixture_by_name<2>("halfspace-e1");
    EXPECT_DOUBLE_EQ(hs(Vec<2>(2, 3)), 2.0);
    auto p = fixture_by_name<2>("poly-diag-0.3-0.7");
    EXPECT_DOUBLE_EQ(p(Vec<2>(1, 1)), 0.5);
    auto z = fixture_by_name<3>("zero");
    EXPECT_EQ(z(Vec<3>(1, 2, 3)), 0.0);
    auto s = fixture_by_name<2>("singular-k4-0.05");
    // on L = {x1 = 0} the quartic is +x2^4
    EXPECT_NEAR(s(Vec<2>(0, 0.5)), 0.05 * std::pow(0.5, 4), 1e-15);
    auto s6 = fixture_by_name<2>("singular-k6-0.02");
    EXPECT_NEAR(s6(Vec<2>(0, 0.5)), 0.02 * std::pow(0.5, 6), 1e-15);
    EXPECT_THROW(fixture_by_name<2>("poly-diag-0.5"), DomainError);
    EXPECT_THROW(fixture_by_name<2>("nonsense"), DomainError);
    EXPECT_THROW(fixture_by_name<2>("halfspace-e3"), DomainError);
}

TEST(DiscreteHarmonic, CorrectionIsExactAndSmall)
{
    for (int k = 3; k <= 8; ++k) {
        auto [re, im] = complex_power(Polynomial::coordinate(2, 0), Polynomial::coordinate(2, 1), k);
        const double h = 1.0 / 64;
        Polynomial qh = discrete_harmonic(re, h);
        EXPECT_TRUE(qh.discrete_laplacian(h).is_zero(1e-9)) << k;
        EXPECT_DOUBLE_EQ(qh(Vec<2>(0, 0)), 0.0);
        // pointwise on a grid: five-point Laplacian of the samples vanishes
        const Vec<2> x(0.3, -0.2);
        double lap = -4 * qh(x);
        for (int d = 0; d < 2; ++d) {
            Vec<2> e = Vec<2>::Zero();
            e[d] = h;
            lap += qh(Vec<2>(x + e)) + qh(Vec<2>(x - e));
        }
        EXPECT_NEAR(lap / (h * h), 0.0, 1e-8) << k;
        EXPECT_LT(std::abs(qh(Vec<2>(0.5, 0.5)) - re(Vec<2>(0.5, 0.5))), 10 * h * h) << k;
    }
}

TEST(InverseLaplacian, RoundTrip)
{
    Polynomial t(3, {Monomial{2.0, {1, 3, 2}}, Monomial{-1.0, {0, 4, 0}}, Monomial{0.5, {0, 0, 0}}});
    EXPECT_TRUE((t.inverse_laplacian().laplacian() - t).is_zero(1e-12));
}
