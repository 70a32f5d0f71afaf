#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/coefficients.hpp"
#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"
#include "smpheat/estimates.hpp"
#include "smpheat/forward.hpp"
#include "smpheat/model.hpp"
#include "smpheat/noise.hpp"
#include "smpheat/parallel.hpp"

namespace smpheat {

/// Monte Carlo mean with its standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;

    double half_width(double z = 1.96) const { return z * std_error; }
};

inline Estimate mean_estimate(const std::vector<double>& samples) {
    Estimate e;
    if (samples.empty()) return e;
    const double n = static_cast<double>(samples.size());
    double s = 0.0;
    for (double v : samples) s += v;
    e.value = s / n;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double v : samples) ss += (v - e.value) * (v - e.value);
        e.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

/// u^eps = (1 - eps) u_bar + eps v.
inline ControlField perturb_control(const ControlField& u_bar, const ControlField& v, double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("eps must lie in [0, 1]");
    if (u_bar.lo() != v.lo() || u_bar.hi() != v.hi()) throw PreconditionError("controls live in different boxes");
    if (u_bar.steps() != v.steps() || u_bar.grid_size() != v.grid_size())
        throw DimensionError("control shapes differ");
    return ControlField((1.0 - eps) * u_bar.values() + eps * v.values(), u_bar.lo(), u_bar.hi());
}

/// First variation along (X̄, ū) in the direction du = v - ū:
///
///   dY = [A Y + b_r Y + b_u du] dt + sum_{i<=M} C_i Y dbeta^i + d_u sigma du dW,   Y_0 = 0.
///
/// The step is the exact linearization of state_step, so all M noise directions couple.
inline PathEnsemble simulate_first_variation(const Problem& problem, const SharedEnsemble& xbar,
                                             const ControlField& u_bar, const Eigen::MatrixXd& du,
                                             const NoiseGrid& noise) {
    problem.check_control(u_bar);
    if (static_cast<std::size_t>(du.rows()) != problem.steps() || static_cast<std::size_t>(du.cols()) != problem.n_x())
        throw DimensionError("control direction shape does not match the grid");
    detail::check_noise(problem, noise, problem.M());
    if (!xbar || xbar->paths() != noise.paths()) throw DimensionError("reference ensemble and noise disagree on paths");
    const CoefficientOperators C(problem, xbar, u_bar, problem.M());
    const auto& basis = problem.basis();
    const auto& spec = problem.spec();
    const std::size_t steps = problem.steps();
    const std::size_t dirs = noise.directions();
    const double dt = problem.dt();
    const double br = spec.drift_dr(), bu = spec.drift_du(), su = spec.sigma_du();
    PathEnsemble out(noise.paths(), steps, problem.K(), dt);
    parallel_chunks(noise.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(steps * dirs);
        for (std::size_t p = begin; p < end; ++p) {
            noise.fill_path(p, inc);
            ModeVector y = ModeVector::Zero(static_cast<Eigen::Index>(problem.K()));
            for (std::size_t n = 0; n < steps; ++n) {
                const GridVector dW = detail::noise_on_grid(basis, inc.data() + n * dirs, problem.M());
                const GridVector yg = basis.to_grid(y);
                const GridVector sr = C.sigma_r(p, n);
                const auto d = du.row(static_cast<Eigen::Index>(n)).transpose();
                const GridVector incr = (br * yg + bu * d) * dt + (sr.cwiseProduct(yg) + su * d).cwiseProduct(dW);
                y = problem.step_decay().cwiseProduct(y + basis.to_modes(incr));
                detail::check_blowup(y, n + 1, p);
                out.state(p, n + 1) = y;
            }
        }
    });
    return out;
}

/// Per-path discrete cost: left-point rule in time, trapezoid in space with the Dirichlet
/// nodes (state 0 there, control taken from the nearest interior node).
inline double path_cost(const Problem& problem, const PathEnsemble& X, std::size_t path, const ControlField& u) {
    const auto& basis = problem.basis();
    const auto& spec = problem.spec();
    const double h = basis.cell();
    const double dt = problem.dt();
    const auto& ref = problem.r_ref_grid();
    const std::size_t nx = problem.n_x();
    double total = 0.0;
    for (std::size_t n = 0; n < problem.steps(); ++n) {
        const GridVector r = basis.to_grid(X.state(path, n));
        double run = 0.0;
        for (std::size_t j = 0; j < nx; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            run += h * spec.running(r(jj), u(n, j), ref(jj));
        }
        run += 0.5 * h * (spec.running(0.0, u(n, 0), 0.0) + spec.running(0.0, u(n, nx - 1), 0.0));
        total += dt * run;
    }
    const GridVector r = basis.to_grid(X.state(path, problem.steps()));
    for (std::size_t j = 0; j < nx; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        total += h * spec.terminal(r(jj), problem.r_T_grid()(jj), problem.h_lin_grid()(jj));
    }
    return total;
}

inline Estimate cost(const Problem& problem, const PathEnsemble& X, const ControlField& u) {
    problem.check_control(u);
    if (X.steps() != problem.steps() || X.modes() != problem.K()) throw DimensionError("ensemble does not match model");
    std::vector<double> per(X.paths());
    parallel_for(X.paths(), [&](std::size_t p) { per[p] = path_cost(problem, X, p, u); });
    return mean_estimate(per);
}

/// Gradient of the discrete running cost with respect to the modes of X_n (the adjoint forcing f_n).
inline ModeVector running_cost_gradient(const Problem& problem, const Eigen::Ref<const ModeVector>& x,
                                        const Eigen::Ref<const Eigen::RowVectorXd>& u_row) {
    (void)u_row;  // l_r does not depend on u for the coefficient family
    const auto& basis = problem.basis();
    const auto& spec = problem.spec();
    const GridVector r = basis.to_grid(x);
    GridVector g(r.size());
    for (Eigen::Index j = 0; j < r.size(); ++j) g(j) = spec.running_dr(r(j), problem.r_ref_grid()(j));
    return basis.to_modes(g);
}

/// Gradient of the discrete terminal cost with respect to the modes of X_N (the adjoint terminal value).
inline ModeVector terminal_cost_gradient(const Problem& problem, const Eigen::Ref<const ModeVector>& x) {
    const auto& basis = problem.basis();
    const auto& spec = problem.spec();
    const GridVector r = basis.to_grid(x);
    GridVector g(r.size());
    for (Eigen::Index j = 0; j < r.size(); ++j)
        g(j) = spec.terminal_dr(r(j), problem.r_T_grid()(j), problem.h_lin_grid()(j));
    return basis.to_modes(g);
}

/// Monte Carlo estimate of I(v) = E int [<d_X L, Y> + <d_u L, du>] dt + E <d_X Phi(X̄_T), Y_T>,
/// the exact derivative of the discrete cost along du.
inline Estimate gateaux_cost(const Problem& problem, const PathEnsemble& xbar, const PathEnsemble& Y,
                             const ControlField& u_bar, const Eigen::MatrixXd& du) {
    if (xbar.paths() != Y.paths() || xbar.steps() != Y.steps() || xbar.modes() != Y.modes())
        throw DimensionError("gateaux_cost: ensembles do not match");
    if (static_cast<std::size_t>(du.rows()) != problem.steps() || static_cast<std::size_t>(du.cols()) != problem.n_x())
        throw DimensionError("control direction shape does not match the grid");
    const auto& spec = problem.spec();
    const auto& w = problem.cost_weights();
    const double dt = problem.dt();
    double control_term = 0.0;
    for (std::size_t n = 0; n < problem.steps(); ++n)
        for (std::size_t j = 0; j < problem.n_x(); ++j)
            control_term += dt * w(static_cast<Eigen::Index>(j)) * spec.running_du(u_bar(n, j)) *
                            du(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
    std::vector<double> per(xbar.paths());
    parallel_for(xbar.paths(), [&](std::size_t p) {
        double s = control_term;
        for (std::size_t n = 0; n < problem.steps(); ++n)
            s += dt * running_cost_gradient(problem, xbar.state(p, n), u_bar.row(n)).dot(Y.state(p, n));
        s += terminal_cost_gradient(problem, xbar.state(p, problem.steps())).dot(Y.state(p, problem.steps()));
        per[p] = s;
    });
    return mean_estimate(per);
}

struct ExpansionReport {
    RateReport state;  // R(eps) = ||X^eps - X̄ - eps Y||_{L^2(Omega; C([0,T], H))}
    RateReport cost;   // |J(u^eps) - J(ū) - eps I(v)|
    Estimate gateaux;
};

inline ExpansionReport expansion_check(const Problem& problem, const ControlField& u_bar, const ControlField& v,
                                       const std::vector<double>& eps_list, const NoiseGrid& noise) {
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0 && eps_list[i] <= 1.0)) throw DomainError("eps values must lie in (0, 1]");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw DomainError("eps list must be decreasing");
    }
    auto xbar = std::make_shared<PathEnsemble>(simulate_state(problem, u_bar, noise));
    const Eigen::MatrixXd du = v.values() - u_bar.values();
    const PathEnsemble Y = simulate_first_variation(problem, xbar, u_bar, du, noise);
    ExpansionReport rep;
    rep.gateaux = gateaux_cost(problem, *xbar, Y, u_bar, du);
    const double J0 = cost(problem, *xbar, u_bar).value;
    std::vector<double> rx, rj;
    for (double eps : eps_list) {
        const ControlField ue = perturb_control(u_bar, v, eps);
        const PathEnsemble Xe = simulate_state(problem, ue, noise);
        double acc = 0.0;
        for (std::size_t p = 0; p < Xe.paths(); ++p) {
            double sup = 0.0;
            for (std::size_t n = 0; n <= Xe.steps(); ++n)
                sup = std::max(sup, (Xe.state(p, n) - xbar->state(p, n) - eps * Y.state(p, n)).squaredNorm());
            acc += sup;
        }
        rx.push_back(std::sqrt(acc / static_cast<double>(Xe.paths())));
        rj.push_back(std::abs(cost(problem, Xe, ue).value - J0 - eps * rep.gateaux.value));
    }
    rep.state = rate_report(eps_list, rx);
    rep.cost = rate_report(eps_list, rj);
    return rep;
}

}  // namespace smpheat
