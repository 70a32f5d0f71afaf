#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace smpheat;

TEST(Noise, SameSeedSameGrid) {
    const auto a = sample_noise(42, 20, 10, 3, 0.01);
    const auto b = sample_noise(42, 20, 10, 3, 0.01);
    const auto c = sample_noise(43, 20, 10, 3, 0.01);
    bool differs = false;
    for (std::size_t p = 0; p < 20; ++p)
        for (std::size_t n = 0; n < 10; ++n)
            for (std::size_t i = 0; i < 3; ++i) {
                EXPECT_EQ(a.increment(p, n, i), b.increment(p, n, i));
                differs = differs || a.increment(p, n, i) != c.increment(p, n, i);
            }
    EXPECT_TRUE(differs);
}

TEST(Noise, PathExtensionConsistency) {
    const auto small = sample_noise(7, 10, 16, 4, 0.02);
    auto large = sample_noise(7, 1000, 16, 4, 0.02);
    large.materialize();
    for (std::size_t p = 0; p < 10; ++p)
        for (std::size_t n = 0; n < 16; ++n)
            for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(small.increment(p, n, i), large.increment(p, n, i));
}

TEST(Noise, IncrementStatistics) {
    const std::size_t paths = 10000;
    const double dt = 0.01;
    const auto g = sample_noise(1, paths, 4, 3, dt);
    double mean = 0.0, sq = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        const double x = g.increment(p, 0, 1);
        mean += x;
        sq += x * x;
    }
    mean /= paths;
    const double var = sq / paths - mean * mean;
    EXPECT_NEAR(var, dt, 0.05 * dt);

    double sxy = 0.0, sxx = 0.0, syy = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        mx += g.increment(p, 2, 0);
        my += g.increment(p, 2, 2);
    }
    mx /= paths;
    my /= paths;
    for (std::size_t p = 0; p < paths; ++p) {
        const double x = g.increment(p, 2, 0) - mx, y = g.increment(p, 2, 2) - my;
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    EXPECT_LE(std::abs(sxy / std::sqrt(sxx * syy)), 3.0 / std::sqrt(static_cast<double>(paths)));
}

TEST(Noise, BrownianPath) {
    auto g = sample_noise(3, 4, 6, 2, 0.1);
    g.fill(0.0);
    for (double v : brownian_path(g, 1, 1)) EXPECT_EQ(v, 0.0);
    g.set_increment(2, 0, 0, 0.3);
    const auto b = brownian_path(g, 2, 0);
    ASSERT_EQ(b.size(), 7u);
    EXPECT_EQ(b[0], 0.0);
    for (std::size_t n = 1; n < b.size(); ++n) EXPECT_DOUBLE_EQ(b[n], 0.3);
    EXPECT_THROW(brownian_path(g, 4, 0), DimensionError);
    EXPECT_THROW(brownian_path(g, 0, 2), DimensionError);
}

TEST(Noise, TerminalVariance) {
    const std::size_t paths = 10000;
    const double T = 0.5;
    const auto g = sample_noise(5, paths, 16, 1, T / 16);
    double mean = 0.0, sq = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        const double b = brownian_path(g, p, 0).back();
        mean += b;
        sq += b * b;
    }
    mean /= paths;
    EXPECT_NEAR(sq / paths - mean * mean, T, 0.05 * T);
}

TEST(Noise, InvalidShapes) {
    EXPECT_THROW(sample_noise(1, 0, 4, 2, 0.1), DimensionError);
    EXPECT_THROW(sample_noise(1, 4, 0, 2, 0.1), DimensionError);
    EXPECT_THROW(sample_noise(1, 4, 4, 0, 0.1), DimensionError);
    EXPECT_THROW(sample_noise(1, 4, 4, 2, 0.0), DomainError);
    const auto g = sample_noise(1, 2, 2, 2, 0.1);
    EXPECT_THROW(g.increment(2, 0, 0), DimensionError);
}

TEST(Noise, StreamIsDeterministic) {
    rng::Stream a(8, 2), b(8, 2);
    for (int k = 0; k < 100; ++k) {
        const double u = a.uniform();
        EXPECT_EQ(u, b.uniform());
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(a.index(7), 7u);
        b.index(7);
    }
}
