#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace smpheat;

TEST(Spectral, EigenvaluesFollowSquaredFrequencies) {
    const auto b1 = build_basis(1, 3);
    EXPECT_NEAR(b1.eigenvalue(0), 9.8696044, 1e-6);
    const auto b2 = build_basis(2, 8);
    EXPECT_DOUBLE_EQ(b2.eigenvalue(1) / b2.eigenvalue(0), 4.0);
    EXPECT_THROW(build_basis(4, 3), DimensionError);
    EXPECT_THROW(build_basis(0, 3), DimensionError);
    EXPECT_THROW(build_basis(2, 3, 5), DimensionError);
}

TEST(Spectral, SemigroupAction) {
    const auto b = build_basis(8, 32);
    const ModeVector v = ModeVector::LinSpaced(8, -1.0, 2.0);
    EXPECT_EQ(b.semigroup_apply(0.0, v), v);
    EXPECT_NEAR(b.semigroup_apply(0.1, test::unit(8, 0))(0), std::exp(-std::numbers::pi * std::numbers::pi / 10.0), 1e-15);
    EXPECT_NEAR(b.semigroup_apply(0.1, test::unit(8, 0))(0), 0.3727, 1e-4);
    EXPECT_TRUE(b.semigroup_apply(0.3, ModeVector::Zero(8)).isZero(0.0));
    EXPECT_THROW(b.semigroup_apply(-1e-3, v), DomainError);
    EXPECT_LE(b.semigroup_apply(0.01, v).norm(), v.norm());
}

TEST(Spectral, SemigroupLaw) {
    const auto b = build_basis(8, 32);
    const ModeVector v = ModeVector::LinSpaced(8, 0.5, -3.0);
    for (double t : {0.0, 1e-3, 0.02, 0.3})
        for (double s : {0.0, 5e-4, 0.01}) {
            const ModeVector lhs = b.semigroup_apply(t + s, v);
            const ModeVector rhs = b.semigroup_apply(t, b.semigroup_apply(s, v));
            EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(Spectral, HilbertSchmidtNorm) {
    const auto b = build_basis(16, 64);
    EXPECT_LT(b.hs_norm_sq(10.0), 1e-80);
    EXPECT_GT(b.hs_norm_sq(10.0), 0.0);
    EXPECT_LT(b.hs_norm_sq(0.02), b.hs_norm_sq(0.01));
    EXPECT_THROW(b.hs_norm_sq(0.0), DomainError);
}

TEST(Spectral, HilbertSchmidtMatchesThetaFunction) {
    // sum_{k >= 1} exp(-a k^2) = (sqrt(pi / a) - 1) / 2 up to exp(-pi^2 / a) corrections.
    const auto b = build_basis(256, 256);
    for (double t : {1e-3, 4e-3}) {
        const double a = 2.0 * std::numbers::pi * std::numbers::pi * t;
        const double oracle = 0.5 * (std::sqrt(std::numbers::pi / a) - 1.0);
        EXPECT_NEAR(b.hs_norm_sq(t), oracle, 1e-10 * oracle);
    }
}

TEST(Spectral, HilbertSchmidtSmallTimeLimit) {
    const double limit = 1.0 / std::sqrt(8.0 * std::numbers::pi);
    const double t = 1e-6;
    EXPECT_NEAR(std::sqrt(t) * semigroup_hs_norm_sq(t, 1u << 16), limit, 0.02 * limit);
}

TEST(Spectral, HilbertSchmidtDyadicBound) {
    const auto b = build_basis(256, 256);
    for (int m = 3; m <= 12; ++m) {
        const double t = std::ldexp(1.0, -m);
        EXPECT_LE(std::sqrt(t) * b.hs_norm_sq(t), 0.25) << "t = 2^-" << m;
    }
}

TEST(Spectral, TransformPair) {
    const auto b = build_basis(8, 32);
    rng::Stream s(3);
    ModeVector v(8);
    for (auto& x : v) x = s.normal();
    EXPECT_LE((b.to_modes(b.to_grid(v)) - v).cwiseAbs().maxCoeff(), 1e-10);
    // Parseval on the grid.
    EXPECT_NEAR(b.cell() * b.to_grid(v).squaredNorm(), v.squaredNorm(), 1e-8);

    const GridVector g1 = b.to_grid(test::unit(8, 0));
    for (Eigen::Index j = 0; j < g1.size(); ++j)
        EXPECT_NEAR(g1(j), std::numbers::sqrt2 * std::sin(std::numbers::pi * b.grid()(j)), 1e-14);

    GridVector g3(32);
    for (Eigen::Index j = 0; j < 32; ++j) g3(j) = std::numbers::sqrt2 * std::sin(3.0 * std::numbers::pi * b.grid()(j));
    EXPECT_LE((b.to_modes(g3) - test::unit(8, 2)).cwiseAbs().maxCoeff(), 1e-10);

    EXPECT_THROW(b.to_modes(GridVector::Zero(31)), DimensionError);
    EXPECT_THROW(b.to_grid(ModeVector::Zero(9)), DimensionError);
}
