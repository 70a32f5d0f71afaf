#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace smpheat;

TEST(DiagonalDensity, IdentityAtMidpoint) {
    const auto b = build_basis(8, 31);  // x_16 = 1/2
    const GridVector q = diagonal_density(OperatorMatrix::Identity(8, 8), b);
    EXPECT_NEAR(b.grid()(15), 0.5, 1e-15);
    EXPECT_NEAR(q(15), 2.0 * 4.0, 1e-12);
    for (Eigen::Index j = 0; j < q.size(); ++j) {
        double s = 0.0;
        for (int k = 1; k <= 8; ++k) s += 2.0 * std::pow(std::sin(k * M_PI * b.grid()(j)), 2);
        EXPECT_NEAR(q(j), s, 1e-12);
    }
    EXPECT_TRUE(diagonal_density(OperatorMatrix::Zero(8, 8), b).isZero(0.0));
}

TEST(DiagonalDensity, TraceAgainstMultipliers) {
    const auto b = build_basis(8, 32);
    rng::Stream s(13);
    OperatorMatrix Q(8, 5);
    for (Eigen::Index k = 0; k < Q.size(); ++k) Q.data()[k] = s.normal();
    const GridVector q = diagonal_density(Q, b);
    const OperatorMatrix Qsq = Q.leftCols(5).topRows(5);
    EXPECT_NEAR(b.cell() * q.sum(), Qsq.trace(), 1e-8);
    GridVector phi(32);
    for (auto& v : phi) v = s.uniform();
    const OperatorMatrix Mphi = multiplication_compression(phi, b, 5, 8);
    EXPECT_NEAR(b.cell() * phi.dot(q), trace(Mphi * Q), 1e-10);
}

TEST(Bootstrap, HalfWidth) {
    EXPECT_EQ(bootstrap_half_width(std::vector<double>(50, 3.0), 1), 0.0);
    rng::Stream s(21);
    std::vector<double> x(4000);
    for (auto& v : x) v = s.normal();
    const double hw = bootstrap_half_width(x, 5);
    EXPECT_EQ(hw, bootstrap_half_width(x, 5));
    EXPECT_NEAR(hw, 1.96 / std::sqrt(4000.0), 0.15 * 1.96 / std::sqrt(4000.0));
}

TEST(Duality, ZeroDataBothSidesVanish) {
    const Problem pb(test::small_spec());
    const auto noise = test::noise_for(pb, 128);
    const auto u = pb.constant_control(0.2);
    const auto xbar = test::reference(pb, u, noise);
    const CoefficientOperators C(pb, xbar, u, 4);
    AdjointData zero;
    zero.eta = [](std::size_t) { return ModeVector(ModeVector::Zero(8)); };
    const AdjointPair pair = solve_adjoint(pb, C, zero, FeatureBasis::standard(xbar), noise);
    DualityInputs in;
    in.N = 4;
    in.M_gamma = 2;
    in.x = ModeVector::Ones(8);
    in.rho = [](std::size_t, std::size_t) { return ModeVector(ModeVector::Ones(8)); };
    in.gamma = in.rho;
    in.Gamma = [](std::size_t, std::size_t) { return OperatorMatrix(OperatorMatrix::Identity(8, 8)); };
    const DualityResult r = duality_gap(pb, C, zero, in, pair, noise);
    EXPECT_EQ(r.lhs.value, 0.0);
    EXPECT_EQ(r.rhs.value, 0.0);
    EXPECT_EQ(r.gap, 0.0);
    EXPECT_TRUE(r.within());
}

TEST(Duality, SemigroupCaseIsExact) {
    ModelSpec s = test::small_spec();
    s.s1 = 0.0;
    const Problem pb(s);
    const auto noise = test::noise_for(pb, 128);
    const auto u = pb.constant_control(0.0);
    const auto xbar = test::reference(pb, u, noise);
    const auto C = CoefficientOperators::zero(pb, 0);
    AdjointData data;
    const ModeVector w = ModeVector::LinSpaced(8, 1.0, -1.0);
    data.eta = [w](std::size_t) { return w; };
    const AdjointPair pair = solve_adjoint(pb, C, data, FeatureBasis::standard(xbar), noise);
    DualityInputs in;
    in.x = ModeVector::LinSpaced(8, 0.3, 0.9);
    const DualityResult r = duality_gap(pb, C, data, in, pair, noise);
    EXPECT_NE(r.rhs.value, 0.0);
    EXPECT_NEAR(r.gap, 0.0, 1e-12);
}

TEST(Duality, TruncationMismatch) {
    const Problem pb(test::small_spec());
    const auto noise = test::noise_for(pb, 64);
    const auto u = pb.constant_control(0.2);
    const auto xbar = test::reference(pb, u, noise);
    const AdjointData data = cost_adjoint_data(pb, xbar, u);
    const AdjointPair pair = solve_adjoint(pb, xbar, u, data, 4, noise);
    DualityInputs in;
    in.N = 2;
    in.x = ModeVector::Ones(8);
    EXPECT_THROW(duality_gap(pb, CoefficientOperators(pb, xbar, u, 2), data, in, pair, noise),
                 TruncationMismatchError);
    in.N = 4;
    EXPECT_THROW(duality_gap(pb, CoefficientOperators(pb, xbar, u, 2), data, in, pair, noise),
                 TruncationMismatchError);
}

TEST(Gradient, ControlOnlyInCost) {
    ModelSpec s = test::small_spec();
    s.b2 = 0.0;
    s.s2 = 0.0;
    s.w_u = 0.7;
    s.u_ref = 0.25;
    const Problem pb(s);
    const auto noise = test::noise_for(pb, 64);
    ControlField u = pb.constant_control(0.0);
    for (Eigen::Index n = 0; n < 32; ++n) u.values().row(n).setConstant(-0.5 + 0.03 * static_cast<double>(n));
    const SmpEvaluation ev = evaluate_smp(pb, u, noise);
    const Eigen::MatrixXd expected = 2.0 * 0.7 * (u.values().array() - 0.25).matrix();
    EXPECT_LE((ev.grad.D - expected).cwiseAbs().maxCoeff(), 1e-13);

    s.w_u = 0.0;
    const Problem flat(s);
    EXPECT_LE(evaluate_smp(flat, u, noise).grad.D.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Gradient, PairingAndFiniteDifferenceOfZeroDirection) {
    const Problem pb(test::small_spec());
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(32, 32);
    EXPECT_NEAR(control_pairing(pb, one, one), pb.spec().T, 1e-14);
    EXPECT_NEAR(control_norm(pb, 2.0 * one), 2.0 * std::sqrt(pb.spec().T), 1e-14);
    const auto noise = test::noise_for(pb, 32);
    const auto u = pb.constant_control(0.1);
    const SmpEvaluation ev = evaluate_smp(pb, u, noise);
    const FdReport r = fd_gradient_check(pb, u, ev.grad, {Eigen::MatrixXd::Zero(32, 32)}, {1e-2}, noise);
    EXPECT_EQ(r.analytic[0], 0.0);
    EXPECT_EQ(r.relative_error[0], 0.0);
}

TEST(Optimizer, StationaryStartStopsImmediately) {
    ModelSpec s = model_preset("quadratic");
    s.K = s.M = 8;
    s.N = 4;
    s.n_x = 32;
    s.n_steps = 16;
    const Problem pb(s);
    const auto noise = test::noise_for(pb, 32);
    const OptimizeResult r = projected_gradient(pb, pb.constant_control(s.u_ref), noise);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.log.size(), 1u);
    EXPECT_EQ(r.u.values(), pb.constant_control(s.u_ref).values());
}

TEST(Optimizer, SeparableQuadraticRecoversTarget) {
    ModelSpec s = model_preset("quadratic");
    s.K = s.M = 8;
    s.N = 4;
    s.n_x = 32;
    s.n_steps = 16;
    const Problem pb(s);
    const auto noise = test::noise_for(pb, 64);
    const OptimizeResult r = projected_gradient(pb, pb.constant_control(-0.8), noise);
    ASSERT_TRUE(r.converged);
    EXPECT_LE((r.u.values().array() - s.u_ref).abs().maxCoeff(), 1e-3);
    for (std::size_t k = 1; k < r.log.size(); ++k) EXPECT_LE(r.log[k].J, r.log[k - 1].J + 1e-15);
    EXPECT_GE(r.log.back().vi_min, -r.vi_tol);
}

TEST(VariationalInequality, BoxFaceWithOutwardGradient) {
    ModelSpec s = model_preset("quadratic");
    s.K = s.M = 8;
    s.N = 4;
    s.n_x = 32;
    s.n_steps = 16;
    s.u_ref = 1.5;
    const Problem pb(s);
    const auto noise = test::noise_for(pb, 32);
    const auto u = pb.constant_control(s.u_max);
    const SmpEvaluation ev = evaluate_smp(pb, u, noise);
    const VIResult r = variational_inequality_check(pb, u, ev.grad, vi_samples(pb, 8, 3));
    EXPECT_GE(r.min, 0.0);
    for (std::size_t k = 2; k < r.per_sample.size(); ++k) EXPECT_GT(r.per_sample[k], 0.0);
    EXPECT_THROW(variational_inequality_check(pb, u, ev.grad, {ControlField::constant(16, 32, 2.0, -1.0, 3.0)}),
                 PreconditionError);
}
