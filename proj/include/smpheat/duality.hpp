#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/adjoint.hpp"
#include "smpheat/coefficients.hpp"
#include "smpheat/error.hpp"
#include "smpheat/forward.hpp"
#include "smpheat/model.hpp"
#include "smpheat/noise.hpp"
#include "smpheat/parallel.hpp"
#include "smpheat/schatten.hpp"
#include "smpheat/variation.hpp"

namespace smpheat {

/// Forward data of the duality identity. N (the C_i couplings of the forward drift) must equal
/// the N of the adjoint pair; gamma couples through C_1..C_{M_gamma}.
struct DualityInputs {
    std::size_t N = 0;
    std::size_t M_gamma = 0;
    std::size_t start_step = 0;
    ModeVector x;
    std::function<ModeVector(std::size_t path, std::size_t step)> rho;
    std::function<ModeVector(std::size_t path, std::size_t step)> gamma;
    std::function<OperatorMatrix(std::size_t path, std::size_t step)> Gamma;
};

struct DualityResult {
    Estimate lhs;
    Estimate rhs;
    double gap = 0.0;
    double half_width = 0.0;  // 95% percentile-bootstrap half-width of the gap
    std::size_t paths = 0;

    bool within(double rel = 1e-2, double widths = 3.0) const {
        return std::abs(gap) <= std::max(rel * std::abs(rhs.value), widths * half_width);
    }
};

/// Percentile bootstrap half-width of the mean of samples.
inline double bootstrap_half_width(const std::vector<double>& samples, std::uint64_t seed, std::size_t resamples = 400) {
    const std::size_t n = samples.size();
    if (n < 2) return 0.0;
    rng::Stream stream(seed, 0xb007);
    std::vector<double> means(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += samples[stream.index(n)];
        means[b] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto q = [&](double level) {
        const double pos = level * static_cast<double>(resamples - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, resamples - 1);
        return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    return 0.5 * (q(0.975) - q(0.025));
}

/// Both sides of the forward-backward duality identity under common noise:
///   LHS = E<P_s, x> + E sum dt [<P_pred, rho> + sum_{i<=M_gamma} <Q e_i, C_i^* gamma> + <Q, Gamma>_2]
///   RHS = E<eta, X_T> + E sum dt <f, X>
/// where X solves the linear forward equation with the inputs. The drift pairing uses
/// P_pred = E(e^{dt A} P_{n+1} | F_n), the term that multiplies rho in the exponential Euler step.
inline DualityResult duality_gap(const Problem& problem, const CoefficientOperators& C, const AdjointData& data,
                                 const DualityInputs& in, const AdjointPair& pair, const NoiseGrid& noise,
                                 std::uint64_t bootstrap_seed = 0) {
    if (in.N != pair.N())
        throw TruncationMismatchError("truncation mismatch: adjoint solved with N = " + std::to_string(pair.N()) +
                                      ", duality inputs use N = " + std::to_string(in.N));
    if (C.couplings() != in.N)
        throw TruncationMismatchError("truncation mismatch: coefficient operators carry " +
                                      std::to_string(C.couplings()) + " couplings, inputs use N = " +
                                      std::to_string(in.N));
    if (in.M_gamma > pair.M()) throw TruncationMismatchError("M_gamma exceeds the noise truncation of the adjoint");
    if (pair.paths() != noise.paths() || pair.steps() != noise.steps())
        throw DimensionError("adjoint pair and noise grid differ in shape");

    LinearFsdeInputs fwd;
    fwd.C = C;
    fwd.gamma_couplings = in.M_gamma;
    fwd.start_step = in.start_step;
    fwd.x = in.x;
    fwd.rho = in.rho;
    fwd.gamma = in.gamma;
    fwd.Gamma = in.Gamma;
    const PathEnsemble X = simulate_linear_fsde(problem, fwd, noise);

    const std::size_t steps = problem.steps();
    const double dt = problem.dt();
    std::vector<double> lhs(noise.paths()), rhs(noise.paths()), gap(noise.paths());
    parallel_for(noise.paths(), [&](std::size_t p) {
        double l = pair.P.state(p, in.start_step).dot(in.x);
        double r = data.eta(p).dot(X.state(p, steps));
        for (std::size_t n = in.start_step; n < steps; ++n) {
            if (data.f) r += dt * data.f(p, n).dot(X.state(p, n));
            if (in.rho) l += dt * pair.P_pred.state(p, n).dot(in.rho(p, n));
            if (in.gamma || in.Gamma) {
                const OperatorMatrix q = pair.Q(p, n);
                if (in.gamma && in.M_gamma > 0 && !C.is_zero())
                    l += dt * C.adjoint_sum(p, n, q, in.M_gamma).dot(in.gamma(p, n));
                if (in.Gamma) {
                    const OperatorMatrix G = in.Gamma(p, n);
                    l += dt * hs_inner(q.leftCols(G.cols()), G);
                }
            }
        }
        lhs[p] = l;
        rhs[p] = r;
        gap[p] = l - r;
    });
    DualityResult out;
    out.lhs = mean_estimate(lhs);
    out.rhs = mean_estimate(rhs);
    out.gap = mean_estimate(gap).value;
    out.half_width = bootstrap_half_width(gap, bootstrap_seed);
    out.paths = noise.paths();
    return out;
}

/// q(x) = sum_{i<=M} e_i(x) (Q e_i)(x): the density with Tr[M_phi Q] = int phi q for multiplication operators.
inline GridVector diagonal_density(const Eigen::Ref<const OperatorMatrix>& Q, const SpectralBasis& basis) {
    if (static_cast<std::size_t>(Q.rows()) > basis.table_modes() ||
        static_cast<std::size_t>(Q.cols()) > basis.table_modes())
        throw DimensionError("Q slice exceeds the basis table");
    const Eigen::MatrixXd cols = basis.table().leftCols(Q.rows()) * Q;
    return (cols.array() * basis.table().leftCols(Q.cols()).array()).rowwise().sum();
}

/// Compression of the multiplication operator by phi: (M_phi)_{jk} = h sum_x phi e_j e_k.
inline OperatorMatrix multiplication_compression(const Eigen::Ref<const GridVector>& phi, const SpectralBasis& basis,
                                                 std::size_t rows, std::size_t cols) {
    return basis.cell() * basis.table().leftCols(static_cast<Eigen::Index>(rows)).transpose() * phi.asDiagonal() *
           basis.table().leftCols(static_cast<Eigen::Index>(cols));
}

/// Gradient density of the cost on the (step, grid) lattice. D is the Riesz representative of
/// dJ with respect to the pairing sum_n dt sum_j w_j D d (w = cost weights).
struct GradientField {
    Eigen::MatrixXd D;
    Eigen::MatrixXd p;  // E p_s(x)
    Eigen::MatrixXd q;  // E q_s(x)
};

/// sum_n dt sum_j w_j a b.
inline double control_pairing(const Problem& problem, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("control fields differ in shape");
    return problem.dt() * ((a.array() * b.array()).matrix() * problem.cost_weights()).sum();
}

inline double control_norm(const Problem& problem, const Eigen::MatrixXd& a) {
    return std::sqrt(std::max(control_pairing(problem, a, a), 0.0));
}

/// D = (h / w_j) E[d_u b p_s + d_u sigma q_s] + d_u l, with p_s = to_grid(P_pred) and q_s the diagonal density of Q.
/// E q_s is taken from the direct sample mean stored with the pair when present.
inline GradientField smp_gradient_density(const Problem& problem, const PathEnsemble& xbar, const ControlField& u_bar,
                                          const AdjointPair& pair) {
    problem.check_control(u_bar);
    if (pair.paths() != xbar.paths() || pair.steps() != problem.steps() || pair.K() != problem.K())
        throw DimensionError("adjoint pair does not match the linearization data");
    const auto& spec = problem.spec();
    const auto& basis = problem.basis();
    const std::size_t steps = problem.steps();
    const auto nx = static_cast<Eigen::Index>(problem.n_x());
    const double bu = spec.drift_du(), su = spec.sigma_du();
    GradientField g;
    g.p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), nx);
    g.q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), nx);
    const std::size_t paths = pair.paths();
    const std::size_t chunks = (paths + kChunk - 1) / kChunk;
    std::vector<Eigen::MatrixXd> part_p(chunks);
    if (bu != 0.0) {
        parallel_chunks(paths, [&](std::size_t begin, std::size_t end) {
            Eigen::MatrixXd sp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), nx);
            for (std::size_t p = begin; p < end; ++p)
                for (std::size_t n = 0; n < steps; ++n)
                    sp.row(static_cast<Eigen::Index>(n)) += basis.to_grid(pair.P_pred.state(p, n)).transpose();
            part_p[begin / kChunk] = std::move(sp);
        });
        for (std::size_t c = 0; c < chunks; ++c) g.p += part_p[c];
        if (paths > 0) g.p /= static_cast<double>(paths);
    }
    if (su != 0.0)
        for (std::size_t n = 0; n < steps; ++n) {
            OperatorMatrix qm;
            if (pair.q_mean.size() == steps && pair.q_mean[n].size() > 0) {
                qm = pair.q_mean[n];
            } else {
                qm = OperatorMatrix::Zero(static_cast<Eigen::Index>(pair.K()), static_cast<Eigen::Index>(pair.M()));
                for (std::size_t p = 0; p < paths; ++p) qm += pair.Q(p, n);
                if (paths > 0) qm /= static_cast<double>(paths);
            }
            g.q.row(static_cast<Eigen::Index>(n)) = diagonal_density(qm, basis).transpose();
        }
    const double h = basis.cell();
    const auto& w = problem.cost_weights();
    g.D.resize(static_cast<Eigen::Index>(steps), nx);
    for (Eigen::Index n = 0; n < g.D.rows(); ++n)
        for (Eigen::Index j = 0; j < nx; ++j)
            g.D(n, j) = (h / w(j)) * (bu * g.p(n, j) + su * g.q(n, j)) +
                        spec.running_du(u_bar(static_cast<std::size_t>(n), static_cast<std::size_t>(j)));
    return g;
}

/// Forward run, cost, adjoint (skipped when the control enters neither drift nor diffusion)
/// and gradient density at one control.
struct SmpEvaluation {
    SharedEnsemble xbar;
    Estimate J;
    GradientField grad;
    std::shared_ptr<const AdjointPair> pair;
};

inline SmpEvaluation evaluate_smp(const Problem& problem, const ControlField& u, const NoiseGrid& noise,
                                  SharedEnsemble xbar = nullptr) {
    SmpEvaluation ev;
    ev.xbar = xbar ? std::move(xbar) : std::make_shared<const PathEnsemble>(simulate_state(problem, u, noise));
    ev.J = cost(problem, *ev.xbar, u);
    const auto& spec = problem.spec();
    if (spec.drift_du() == 0.0 && spec.sigma_du() == 0.0) {
        AdjointPair empty(ev.xbar->paths(), problem.steps(), problem.K(), problem.M(), problem.M(), problem.dt(),
                          FeatureBasis());
        ev.grad = smp_gradient_density(problem, *ev.xbar, u, empty);
        return ev;
    }
    auto pair = std::make_shared<AdjointPair>(
        solve_adjoint(problem, ev.xbar, u, cost_adjoint_data(problem, ev.xbar, u), problem.M(), noise));
    ev.grad = smp_gradient_density(problem, *ev.xbar, u, *pair);
    ev.pair = std::move(pair);
    return ev;
}

/// Cell-averaged Hamiltonian derivative D (v - ū) over blocks of cell_steps x cell_points, minimized
/// over cells; one entry per sample.
struct VIResult {
    double min = 0.0;
    std::vector<double> per_sample;
};

inline VIResult variational_inequality_check(const Problem& problem, const ControlField& u_bar,
                                             const GradientField& grad, const std::vector<ControlField>& samples,
                                             std::size_t cell_steps = 4, std::size_t cell_points = 4) {
    if (cell_steps == 0 || cell_points == 0) throw DomainError("cell sizes must be positive");
    const auto& w = problem.cost_weights();
    const std::size_t steps = problem.steps(), nx = problem.n_x();
    VIResult out;
    out.min = std::numeric_limits<double>::infinity();
    for (const auto& v : samples) {
        if (v.steps() != steps || v.grid_size() != nx) throw DimensionError("variational inequality sample has the wrong shape");
        const auto& spec = problem.spec();
        if (v.values().minCoeff() < spec.u_min - 1e-12 || v.values().maxCoeff() > spec.u_max + 1e-12)
            throw PreconditionError("variational inequality sample outside the box");
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t n0 = 0; n0 < steps; n0 += cell_steps)
            for (std::size_t j0 = 0; j0 < nx; j0 += cell_points) {
                double num = 0.0, den = 0.0;
                for (std::size_t n = n0; n < std::min(steps, n0 + cell_steps); ++n)
                    for (std::size_t j = j0; j < std::min(nx, j0 + cell_points); ++j) {
                        const auto jj = static_cast<Eigen::Index>(j);
                        num += w(jj) * grad.D(static_cast<Eigen::Index>(n), jj) * (v(n, j) - u_bar(n, j));
                        den += w(jj);
                    }
                m = std::min(m, num / den);
            }
        out.per_sample.push_back(m);
        out.min = std::min(out.min, m);
    }
    if (samples.empty()) out.min = 0.0;
    return out;
}

/// The two constant corners of the box followed by `random` fields with i.i.d. uniform entries.
inline std::vector<ControlField> vi_samples(const Problem& problem, std::size_t random, std::uint64_t seed) {
    const auto& spec = problem.spec();
    std::vector<ControlField> out{problem.constant_control(spec.u_min), problem.constant_control(spec.u_max)};
    rng::Stream stream(seed, 0x5a3e);
    for (std::size_t s = 0; s < random; ++s) {
        ControlField v = problem.constant_control(spec.u_min);
        for (Eigen::Index k = 0; k < v.values().size(); ++k)
            v.values().data()[k] = spec.u_min + stream.uniform() * spec.box_width();
        out.push_back(std::move(v));
    }
    return out;
}

struct OptimizerOptions {
    double tol = -1.0;  // negative: 1e-3 * box width * T
    std::size_t max_iter = 200;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double min_step = 1e-12;
    std::size_t vi_random = 16;
    std::uint64_t vi_seed = 7;
};

struct IterationLog {
    std::size_t iter = 0;
    double J = 0.0;
    double J_stderr = 0.0;
    double step = 0.0;
    double grad_norm = 0.0;
    double residual = 0.0;
    double vi_min = 0.0;
};

struct OptimizeResult {
    ControlField u;
    std::vector<IterationLog> log;
    std::vector<GradientField> grads;
    bool converged = false;
    double tol = 0.0;
    double vi_tol = 0.0;  // 1e-3 * |D_0|_inf * box width
    double scale = 1.0;   // G_0 = |D_0|_inf / box width
};

/// Projected gradient on the box with backtracking on the common-noise Monte Carlo cost.
/// Trial points are clip(u - s D / G_0) with G_0 = |D_0|_inf / (box width), so the step is
/// invariant under positive rescaling of the cost.
inline OptimizeResult projected_gradient(const Problem& problem, const ControlField& u0, const NoiseGrid& noise,
                                         const OptimizerOptions& opts = {}) {
    problem.check_control(u0);
    const auto& spec = problem.spec();
    const double width = spec.box_width();
    OptimizeResult res;
    res.tol = opts.tol >= 0.0 ? opts.tol : 1e-3 * width * spec.T;
    const auto samples = vi_samples(problem, opts.vi_random, opts.vi_seed);

    ControlField u = u0;
    SmpEvaluation ev = evaluate_smp(problem, u, noise);
    const double dmax = ev.grad.D.cwiseAbs().maxCoeff();
    res.scale = dmax > 0.0 ? dmax / width : 1.0;
    res.vi_tol = 1e-3 * std::max(dmax, std::numeric_limits<double>::min()) * width;
    double last_step = 0.0;
    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
        const Eigen::MatrixXd dir = ev.grad.D / res.scale;
        const Eigen::MatrixXd proj = (u.values() - dir).cwiseMax(spec.u_min).cwiseMin(spec.u_max);
        IterationLog entry;
        entry.iter = it;
        entry.J = ev.J.value;
        entry.J_stderr = ev.J.std_error;
        entry.step = last_step;
        entry.grad_norm = control_norm(problem, ev.grad.D);
        entry.residual = control_norm(problem, u.values() - proj);
        entry.vi_min = variational_inequality_check(problem, u, ev.grad, samples).min;
        res.log.push_back(entry);
        res.grads.push_back(ev.grad);
        if (entry.residual < res.tol) {
            res.converged = true;
            break;
        }
        if (it == opts.max_iter) break;
        double s = opts.initial_step;
        for (;;) {
            ControlField trial(
                (u.values() - s * dir).cwiseMax(spec.u_min).cwiseMin(spec.u_max), spec.u_min, spec.u_max);
            auto xt = std::make_shared<const PathEnsemble>(simulate_state(problem, trial, noise));
            const Estimate Jt = cost(problem, *xt, trial);
            if (Jt.value < ev.J.value) {
                u = std::move(trial);
                ev = evaluate_smp(problem, u, noise, xt);
                last_step = s;
                break;
            }
            s *= opts.backtrack;
            if (s < opts.min_step)
                throw StallError("projected gradient stalled at iteration " + std::to_string(it) + ": J = " +
                                 std::to_string(ev.J.value) + ", projected residual = " +
                                 std::to_string(entry.residual) + ", tol = " + std::to_string(res.tol));
        }
    }
    res.u = u;
    return res;
}

struct FdReport {
    std::vector<double> analytic;
    std::vector<double> relative_error;  // best over eps, Richardson-extrapolated
    double median = 0.0;
};

/// Finite differences [J(u + eps d) - J(u)] / eps under common noise, Richardson-extrapolated
/// (2 FD(eps/2) - FD(eps)), against the pairing of the gradient density with d.
inline FdReport fd_gradient_check(const Problem& problem, const ControlField& u, const GradientField& grad,
                                  const std::vector<Eigen::MatrixXd>& directions, const std::vector<double>& eps_list,
                                  const NoiseGrid& noise) {
    const double J0 = cost(problem, simulate_state(problem, u, noise), u).value;
    const auto J = [&](const Eigen::MatrixXd& d, double eps) {
        const ControlField ue(u.values() + eps * d, u.lo(), u.hi());
        problem.check_control(ue);
        return cost(problem, simulate_state(problem, ue, noise), ue).value;
    };
    FdReport rep;
    for (const auto& d : directions) {
        const double a = control_pairing(problem, grad.D, d);
        rep.analytic.push_back(a);
        if (d.isZero(0.0)) {
            rep.relative_error.push_back(0.0);
            continue;
        }
        double best = std::numeric_limits<double>::infinity();
        for (double eps : eps_list) {
            const double fd1 = (J(d, eps) - J0) / eps;
            const double fd2 = (J(d, 0.5 * eps) - J0) / (0.5 * eps);
            const double rich = 2.0 * fd2 - fd1;
            best = std::min(best, std::abs(rich - a) / std::max(std::abs(a), 1e-300));
        }
        rep.relative_error.push_back(best);
    }
    std::vector<double> sorted = rep.relative_error;
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty())
        rep.median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                       : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    return rep;
}

}  // namespace smpheat
