#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/coefficients.hpp"
#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"
#include "smpheat/estimates.hpp"
#include "smpheat/model.hpp"
#include "smpheat/noise.hpp"
#include "smpheat/parallel.hpp"
#include "smpheat/schatten.hpp"

namespace smpheat {

inline constexpr double kBlowupThreshold = 1e8;

namespace detail {

inline void check_noise(const Problem& problem, const NoiseGrid& noise, std::size_t directions) {
    if (noise.steps() != problem.steps()) throw DimensionError("noise grid has a different number of steps");
    if (noise.directions() < directions)
        throw DimensionError("noise grid has " + std::to_string(noise.directions()) + " directions, need " +
                             std::to_string(directions));
    if (std::abs(noise.dt() - problem.dt()) > 1e-12 * problem.dt()) throw DimensionError("noise grid dt differs");
}

inline void check_blowup(const ModeVector& x, std::size_t step, std::size_t path) {
    if (!x.allFinite()) throw BlowupError(step, path, "non-finite mode coefficient");
    if (x.size() > 0 && x.cwiseAbs().maxCoeff() > kBlowupThreshold)
        throw BlowupError(step, path, "mode coefficient exceeds 1e8");
}

/// dW(x_j) = sum_{i < count} dbeta^i e_i(x_j).
inline GridVector noise_on_grid(const SpectralBasis& basis, const double* dbeta, std::size_t count) {
    return basis.table().leftCols(static_cast<Eigen::Index>(count)) *
           Eigen::Map<const Eigen::VectorXd>(dbeta, static_cast<Eigen::Index>(count));
}

}  // namespace detail

/// One exponential-Euler step of the controlled state equation:
/// X <- e^{dt A}[X + P_K b(X, u) dt + P_K (sigma(X, u) dW)], dW = sum_{i <= M} dbeta^i e_i.
inline void state_step(const Problem& problem, ModeVector& x, const Eigen::Ref<const Eigen::RowVectorXd>& u,
                       const double* dbeta) {
    const auto& basis = problem.basis();
    const auto& spec = problem.spec();
    const double dt = problem.dt();
    const GridVector r = basis.to_grid(x);
    const GridVector dW = detail::noise_on_grid(basis, dbeta, problem.M());
    GridVector incr(r.size());
    for (Eigen::Index j = 0; j < r.size(); ++j)
        incr(j) = spec.drift(r(j), u(j)) * dt + spec.sigma(r(j), u(j)) * dW(j);
    x = problem.step_decay().cwiseProduct(x + basis.to_modes(incr));
}

/// Mild exponential-Euler simulation of the controlled state on every path of the noise grid.
inline PathEnsemble simulate_state(const Problem& problem, const ControlField& u, const NoiseGrid& noise) {
    problem.check_control(u);
    detail::check_noise(problem, noise, problem.M());
    const std::size_t steps = problem.steps();
    const std::size_t dirs = noise.directions();
    PathEnsemble out(noise.paths(), steps, problem.K(), problem.dt());
    parallel_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(steps * dirs);
        for (std::size_t p = begin; p < end; ++p) {
            noise.fill_path(p, inc);
            ModeVector x = problem.x0();
            out.state(p, 0) = x;
            for (std::size_t n = 0; n < steps; ++n) {
                state_step(problem, x, u.row(n), inc.data() + n * dirs);
                detail::check_blowup(x, n + 1, p);
                out.state(p, n + 1) = x;
            }
        }
    });
    return out;
}

/// Data of the linear forward equation
///
///   dX = [A X + b_r X + rho] dt + sum_{i<=N} C_i X dbeta^i + sum_{i<=M_gamma} C_i gamma dbeta^i
///        + sum_{i<=M} Gamma e_i dbeta^i,   X_s = x.
///
/// N is C.couplings(); b_r is the drift derivative of the model (zero when the drift is disabled).
/// Empty processes are zero. Gamma must be K x M' with M' not above the noise directions.
struct LinearFsdeInputs {
    CoefficientOperators C;
    std::size_t gamma_couplings = 0;
    std::size_t start_step = 0;
    ModeVector x;
    std::function<ModeVector(std::size_t path, std::size_t step)> rho;
    std::function<ModeVector(std::size_t path, std::size_t step)> gamma;
    std::function<OperatorMatrix(std::size_t path, std::size_t step)> Gamma;
};

/// States before start_step are left at zero.
inline PathEnsemble simulate_linear_fsde(const Problem& problem, const LinearFsdeInputs& in, const NoiseGrid& noise) {
    const std::size_t K = problem.K();
    const std::size_t N = in.C.couplings();
    const std::size_t Mg = in.gamma_couplings;
    if (static_cast<std::size_t>(in.x.size()) != K) throw DimensionError("initial condition must have K modes");
    if (in.start_step > problem.steps()) throw DimensionError("start step beyond the horizon");
    if (Mg > problem.basis().table_modes()) throw DimensionError("gamma coupling count exceeds the noise truncation");
    detail::check_noise(problem, noise, std::max(N, Mg));
    const std::size_t steps = problem.steps();
    const std::size_t dirs = noise.directions();
    const double dt = problem.dt();
    const double growth = 1.0 + in.C.drift_r() * dt;
    const auto& basis = problem.basis();
    PathEnsemble out(noise.paths(), steps, K, dt);

    parallel_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(steps * dirs);
        for (std::size_t p = begin; p < end; ++p) {
            noise.fill_path(p, inc);
            ModeVector x = in.x;
            out.state(p, in.start_step) = x;
            for (std::size_t n = in.start_step; n < steps; ++n) {
                const double* db = inc.data() + n * dirs;
                ModeVector incr = growth * x;
                if (in.rho) incr += dt * in.rho(p, n);
                if (!in.C.is_zero() && (N > 0 || (Mg > 0 && in.gamma))) {
                    GridVector g = GridVector::Zero(static_cast<Eigen::Index>(problem.n_x()));
                    if (N > 0) g += basis.to_grid(x).cwiseProduct(detail::noise_on_grid(basis, db, N));
                    if (Mg > 0 && in.gamma)
                        g += basis.to_grid(in.gamma(p, n)).cwiseProduct(detail::noise_on_grid(basis, db, Mg));
                    incr += basis.to_modes(in.C.sigma_r(p, n).cwiseProduct(g));
                }
                if (in.Gamma) {
                    const OperatorMatrix G = in.Gamma(p, n);
                    if (static_cast<std::size_t>(G.rows()) != K || static_cast<std::size_t>(G.cols()) > dirs)
                        throw DimensionError("Gamma must be K x M with M within the noise directions");
                    incr += G * Eigen::Map<const Eigen::VectorXd>(db, G.cols());
                }
                x = problem.step_decay().cwiseProduct(incr);
                detail::check_blowup(x, n + 1, p);
                out.state(p, n + 1) = x;
            }
        }
    });
    return out;
}

/// Converts a time that must sit on the step grid to its step index.
inline std::size_t step_index(const Problem& problem, double t, const char* what) {
    const double s = t / problem.dt();
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-9 * std::max(1.0, s) || r < 0.0)
        throw DomainError(std::string(what) + " must be a multiple of dt");
    return static_cast<std::size_t>(r);
}

/// ||X^delta(t0+delta) - X(t0+delta)||_{L^2(Omega; H)} for the spike control equal to v on
/// [t0, t0+delta) and to u_bar elsewhere, for each delta, under common noise.
inline RateReport spike_rate_experiment(const Problem& problem, const ControlField& u_bar, const ControlField& v,
                                        double t0, const std::vector<double>& deltas, const NoiseGrid& noise) {
    problem.check_control(u_bar);
    problem.check_control(v);
    detail::check_noise(problem, noise, problem.M());
    if (deltas.empty()) throw DomainError("spike_rate_experiment needs at least one delta");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0)) throw DomainError("deltas must be strictly positive");
        if (i > 0 && !(deltas[i] > deltas[i - 1])) throw DomainError("deltas must be strictly increasing");
    }
    const std::size_t s0 = step_index(problem, t0, "t0");
    std::vector<std::size_t> ds;
    for (double d : deltas) ds.push_back(step_index(problem, d, "delta"));
    if (s0 + ds.back() > problem.steps()) throw DomainError("t0 + max(delta) exceeds the horizon");

    const std::size_t paths = noise.paths();
    const std::size_t dirs = noise.directions();
    const std::size_t steps = problem.steps();
    const std::size_t last = s0 + ds.back();
    std::vector<double> sq(paths * ds.size(), 0.0);
    parallel_chunks(paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(steps * dirs);
        for (std::size_t p = begin; p < end; ++p) {
            noise.fill_path(p, inc);
            ModeVector x = problem.x0();
            ModeVector x_t0;
            std::vector<ModeVector> ref(ds.size());
            for (std::size_t n = 0; n < last; ++n) {
                if (n == s0) x_t0 = x;
                state_step(problem, x, u_bar.row(n), inc.data() + n * dirs);
                detail::check_blowup(x, n + 1, p);
                for (std::size_t k = 0; k < ds.size(); ++k)
                    if (n + 1 == s0 + ds[k]) ref[k] = x;
            }
            for (std::size_t k = 0; k < ds.size(); ++k) {
                ModeVector y = x_t0;
                for (std::size_t n = s0; n < s0 + ds[k]; ++n) {
                    state_step(problem, y, v.row(n), inc.data() + n * dirs);
                    detail::check_blowup(y, n + 1, p);
                }
                sq[p * ds.size() + k] = (y - ref[k]).squaredNorm();
            }
        }
    });
    std::vector<double> residuals(ds.size(), 0.0);
    for (std::size_t p = 0; p < paths; ++p)
        for (std::size_t k = 0; k < ds.size(); ++k) residuals[k] += sq[p * ds.size() + k];
    for (auto& r : residuals) r = std::sqrt(r / static_cast<double>(paths));
    return rate_report(deltas, residuals);
}

/// Empirical moments of a linear-FSDE ensemble against the right-hand sides of the
/// two moment estimates and the integrated estimate, each evaluated with constant 1.
/// The c_* fields are the smallest constants making the bounds hold on the grid.
struct MomentBoundReport {
    std::vector<double> mean_sq;    // E|X_n|^2
    std::vector<double> mean_4;     // E|X_n|^4
    double sup_sq = 0.0;            // E sup_n |X_n|^2
    double sup_4 = 0.0;
    double integrated_sq = 0.0;     // E int_s^T |X|^2 (left-point)
    double sup_rhs = 0.0;           // E|x|^2 + E(int|rho|)^2 + |gamma|_inf^2 + E int |Gamma|_HS^2
    std::vector<double> pointwise_rhs;  // E|x|^2 + int (t-l)^{-2a}(E|gamma|^2 + E|Gamma|_op^2) + E(int_s^t|rho|)^2
    double integrated_rhs = 0.0;    // E|x|^2 + int E(|Gamma|_op^2 + |gamma|^2) + E(int|rho|)^2
    double c_sup = 0.0;
    double c_pointwise = 0.0;
    double c_integrated = 0.0;
    double c_max = 0.0;
    bool violation = false;
};

namespace detail {
inline double smallest_constant(double lhs, double rhs) {
    if (lhs <= 0.0) return 0.0;
    if (rhs <= 0.0) return std::numeric_limits<double>::infinity();
    return lhs / rhs;
}
}  // namespace detail

inline MomentBoundReport moment_bound_report(const Problem& problem, const PathEnsemble& ens,
                                             const LinearFsdeInputs& in, double c_max = 10.0) {
    const std::size_t steps = ens.steps();
    const std::size_t s = in.start_step;
    const std::size_t paths = ens.paths();
    const double dt = ens.dt();
    const double alpha = problem.spec().alpha;
    MomentBoundReport rep;
    rep.c_max = c_max;
    rep.mean_sq.assign(steps + 1, 0.0);
    rep.mean_4.assign(steps + 1, 0.0);
    if (paths == 0) return rep;

    std::vector<double> gamma_sq(steps, 0.0), Gamma_op_sq(steps, 0.0);
    std::vector<double> rho_cum_sq(steps + 1, 0.0);  // E(int_s^{t_n} |rho|)^2
    double gamma_inf = 0.0, Gamma_hs = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        double sup = 0.0, integral = 0.0, rho_int = 0.0;
        for (std::size_t n = s; n <= steps; ++n) {
            const double v = ens.state(p, n).squaredNorm();
            rep.mean_sq[n] += v;
            rep.mean_4[n] += v * v;
            sup = std::max(sup, v);
            if (n < steps) integral += dt * v;
            rho_cum_sq[n] += rho_int * rho_int;
            if (n == steps) break;
            if (in.rho) rho_int += dt * in.rho(p, n).norm();
            if (in.gamma) {
                const double g = in.gamma(p, n).squaredNorm();
                gamma_sq[n] += g;
                gamma_inf = std::max(gamma_inf, g);
            }
            if (in.Gamma) {
                const OperatorMatrix G = in.Gamma(p, n);
                const double op = opnorm(G);
                Gamma_op_sq[n] += op * op;
                Gamma_hs += dt * G.squaredNorm();
            }
        }
        rep.sup_sq += sup;
        rep.sup_4 += sup * sup;
        rep.integrated_sq += integral;
    }
    const double inv = 1.0 / static_cast<double>(paths);
    for (auto& v : rep.mean_sq) v *= inv;
    for (auto& v : rep.mean_4) v *= inv;
    for (auto& v : gamma_sq) v *= inv;
    for (auto& v : Gamma_op_sq) v *= inv;
    for (auto& v : rho_cum_sq) v *= inv;
    rep.sup_sq *= inv;
    rep.sup_4 *= inv;
    rep.integrated_sq *= inv;
    Gamma_hs *= inv;

    const double x_sq = in.x.squaredNorm();
    rep.sup_rhs = x_sq + rho_cum_sq[steps] + gamma_inf + Gamma_hs;
    double forcing_int = 0.0;
    for (std::size_t n = s; n < steps; ++n) forcing_int += dt * (gamma_sq[n] + Gamma_op_sq[n]);
    rep.integrated_rhs = x_sq + forcing_int + rho_cum_sq[steps];

    std::vector<double> times(steps + 1 - s);
    for (std::size_t n = s; n <= steps; ++n) times[n - s] = ens.time(n);
    rep.pointwise_rhs.assign(steps + 1, 0.0);
    rep.c_pointwise = 0.0;
    for (std::size_t n = s; n <= steps; ++n) {
        double singular = 0.0;
        if (n > s) {
            const auto w = singular_weights_constant(times, n - s, 2.0 * alpha);
            for (std::size_t j = 0; j < w.size(); ++j) singular += w[j] * (gamma_sq[s + j] + Gamma_op_sq[s + j]);
        }
        rep.pointwise_rhs[n] = x_sq + singular + rho_cum_sq[n];
        rep.c_pointwise = std::max(rep.c_pointwise, detail::smallest_constant(rep.mean_sq[n], rep.pointwise_rhs[n]));
    }
    rep.c_sup = detail::smallest_constant(rep.sup_sq, rep.sup_rhs);
    rep.c_integrated = detail::smallest_constant(rep.integrated_sq, rep.integrated_rhs);
    rep.violation = rep.c_sup > c_max || rep.c_pointwise > c_max || rep.c_integrated > c_max;
    return rep;
}

}  // namespace smpheat
