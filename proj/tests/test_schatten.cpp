#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "support.hpp"

using namespace smpheat;

namespace {
Eigen::MatrixXd random_matrix(rng::Stream& s, Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = s.normal();
    return m;
}
}  // namespace

TEST(Schatten, HsInner) {
    Eigen::MatrixXd L = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    EXPECT_DOUBLE_EQ(hs_inner(L, Eigen::MatrixXd::Identity(2, 2)), 3.0);
    EXPECT_EQ(hs_inner(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 2)), 0.0);
    EXPECT_THROW(hs_inner(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 3)), DimensionError);

    rng::Stream s(5);
    const Eigen::MatrixXd R = random_matrix(s, 5, 3);
    EXPECT_GT(hs_inner(R, R), 0.0);
    EXPECT_NEAR(hs_inner(R, R), singular_values(R).squaredNorm(), 1e-10);
}

TEST(Schatten, TraceNorm) {
    const Eigen::MatrixXd D = Eigen::Vector2d(3.0, -4.0).asDiagonal();
    EXPECT_NEAR(trace_norm(D), 7.0, 1e-14);
    EXPECT_DOUBLE_EQ(trace(D), -1.0);
    EXPECT_LE(std::abs(trace(D)), trace_norm(D));

    rng::Stream s(9);
    Eigen::VectorXd u = random_matrix(s, 4, 1), w = random_matrix(s, 3, 1);
    u.normalize();
    w.normalize();
    EXPECT_NEAR(trace_norm(u * w.transpose()), 1.0, 1e-12);
    EXPECT_EQ(numerical_rank(u * w.transpose()), 1);

    Eigen::MatrixXd bad = D;
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(trace_norm(bad), DomainError);
}

TEST(Schatten, DualForm) {
    rng::Stream s(17);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd L = random_matrix(s, 5, 5);
        const Eigen::MatrixXd B = trace_norm_dual_maximizer(L);
        EXPECT_LE(opnorm(B), 1.0 + 1e-12);
        EXPECT_NEAR(trace_norm_dual(L), trace_norm(L), 1e-10);
        EXPECT_GE(trace_norm(L), opnorm(L));
        // Any other contraction gives a smaller pairing.
        Eigen::MatrixXd C = random_matrix(s, 5, 5);
        C /= opnorm(C);
        EXPECT_LE(hs_inner(C, L), trace_norm(L) + 1e-12);
    }
}

TEST(Schatten, TraceInvariants) {
    EXPECT_EQ(trace(Eigen::MatrixXd::Zero(4, 4)), 0.0);
    EXPECT_THROW(trace(Eigen::MatrixXd::Zero(2, 3)), DimensionError);
    rng::Stream s(23);
    const Eigen::MatrixXd L = random_matrix(s, 6, 6);
    const Eigen::MatrixXd O = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(s, 6, 6)).householderQ();
    EXPECT_NEAR(trace(O * L * O.transpose()), trace(L), 1e-10);
    EXPECT_LE(std::abs(trace(L)), trace_norm(L));
}

TEST(Schatten, ProductInequalities) {
    rng::Stream s(29);
    for (int rep = 0; rep < 200; ++rep) {
        const auto n = static_cast<Eigen::Index>(1 + s.index(8));
        const Eigen::MatrixXd A = random_matrix(s, n, n), B = random_matrix(s, n, n);
        const double slack = 1e-10 * (1.0 + opnorm(A) * trace_norm(B));
        EXPECT_LE(trace_norm(A * B), opnorm(A) * trace_norm(B) + slack);
        EXPECT_LE(trace_norm(B * A), opnorm(A) * trace_norm(B) + slack);
        EXPECT_LE(std::abs(trace(A * B)), opnorm(A) * trace_norm(B) + slack);
    }
}
