#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/coefficients.hpp"
#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"
#include "smpheat/forward.hpp"
#include "smpheat/model.hpp"
#include "smpheat/noise.hpp"
#include "smpheat/parallel.hpp"
#include "smpheat/regression.hpp"
#include "smpheat/schatten.hpp"
#include "smpheat/variation.hpp"

namespace smpheat {

/// Terminal value eta and running forcing f of the adjoint equation, as functions of the path.
/// An empty f is zero.
struct AdjointData {
    std::function<ModeVector(std::size_t path)> eta;
    std::function<ModeVector(std::size_t path, std::size_t step)> f;
};

/// eta = d_X Phi(X̄_T), f_n = d_X L(X̄_n, ū_n) for the discrete cost.
inline AdjointData cost_adjoint_data(const Problem& problem, SharedEnsemble xbar, const ControlField& u_bar) {
    AdjointData d;
    const auto pb = std::make_shared<Problem>(problem);
    d.eta = [pb, xbar](std::size_t p) { return terminal_cost_gradient(*pb, xbar->state(p, pb->steps())); };
    d.f = [pb, xbar, u = u_bar](std::size_t p, std::size_t n) {
        return running_cost_gradient(*pb, xbar->state(p, n), u.row(n));
    };
    return d;
}

struct RegressionInfo {
    std::vector<double> condition;   // per step
    std::vector<std::size_t> active; // active features per step
    std::size_t ridged_steps = 0;

    bool warned() const noexcept { return ridged_steps > 0; }
};

/// Discrete solution (P, Q) of the truncated adjoint equation on an ensemble.
///
/// P is stored per path and step; P_pred_n = E[e^{dt A} P_{n+1} | F_n] is kept as well since the
/// duality pairing and the gradient density use it. Q_n is stored as regression coefficients over
/// the feature basis and evaluated per path on demand (K x M, column i is Q_n e_i).
class AdjointPair {
public:
    AdjointPair() = default;
    AdjointPair(std::size_t paths, std::size_t steps, std::size_t K, std::size_t M, std::size_t N, double dt,
                FeatureBasis features)
        : P(paths, steps, K, dt), P_pred(paths, steps, K, dt), q_coef(steps), q_mean(steps), features(std::move(features)),
          K_(K), M_(M), N_(N) {}

    PathEnsemble P;
    PathEnsemble P_pred;
    std::vector<Eigen::MatrixXd> q_coef;  // per step: features x (K*M), column-major K x M
    /// Per step, the direct sample mean of e^{dt A} P_{n+1} dbeta^T / dt (K x M). Its path average
    /// agrees with the pathwise derivative of the common-noise cost, so the gradient density uses it.
    std::vector<OperatorMatrix> q_mean;
    FeatureBasis features;
    RegressionInfo info;

    std::size_t paths() const noexcept { return P.paths(); }
    std::size_t steps() const noexcept { return P.steps(); }
    std::size_t K() const noexcept { return K_; }
    std::size_t M() const noexcept { return M_; }
    /// Number of C_i couplings in the drift of the equation that was solved.
    std::size_t N() const noexcept { return N_; }
    double dt() const noexcept { return P.dt(); }

    OperatorMatrix Q(std::size_t path, std::size_t step) const {
        const Eigen::MatrixXd& c = q_coef.at(step);
        Eigen::VectorXd phi(c.rows());
        features.eval(path, step, phi.data());
        const Eigen::VectorXd flat = c.transpose() * phi;
        return Eigen::Map<const OperatorMatrix>(flat.data(), static_cast<Eigen::Index>(K_),
                                                static_cast<Eigen::Index>(M_));
    }

    void write_p_csv(std::ostream& os, std::size_t max_paths = static_cast<std::size_t>(-1)) const {
        os << "# schema=1\npath,step,mode,p_value\n";
        os.precision(17);
        for (std::size_t p = 0; p < std::min(paths(), max_paths); ++p)
            for (std::size_t n = 0; n <= steps(); ++n)
                for (std::size_t k = 0; k < K_; ++k)
                    os << p << ',' << n << ',' << k + 1 << ',' << P.state(p, n)(static_cast<Eigen::Index>(k)) << '\n';
    }

    void write_q_csv(std::ostream& os, std::size_t max_paths = static_cast<std::size_t>(-1)) const {
        os << "# schema=1\npath,step,mode,direction,q_value\n";
        os.precision(17);
        for (std::size_t p = 0; p < std::min(paths(), max_paths); ++p)
            for (std::size_t n = 0; n < steps(); ++n) {
                const OperatorMatrix q = Q(p, n);
                for (std::size_t i = 0; i < M_; ++i)
                    for (std::size_t k = 0; k < K_; ++k)
                        os << p << ',' << n << ',' << k + 1 << ',' << i + 1 << ','
                           << q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) << '\n';
            }
    }

private:
    std::size_t K_ = 0, M_ = 0, N_ = 0;
};

/// Backward regression sweep for
///
///   -dP = [A^* P + b_r P + sum_{i<=N} C_i^* Q e_i + f] dt - sum_{i<=M} Q e_i dbeta^i,   P_T = eta,
///
/// with N = C.couplings(): Z = e^{dt A} P_{n+1}; P_pred = regression of Z on the features at n;
/// Q_n e_i = regression of (Z - P_pred) dbeta^i / dt; P_n = (1 + b_r dt) P_pred + dt (sum C_i^* Q_n e_i + f_n).
inline AdjointPair solve_adjoint(const Problem& problem, const CoefficientOperators& C, const AdjointData& data,
                                 const FeatureBasis& features, const NoiseGrid& noise) {
    const std::size_t K = problem.K();
    const std::size_t M = problem.M();
    const std::size_t N = C.couplings();
    if (N > M) throw DimensionError("N must not exceed M");
    if (!data.eta) throw PreconditionError("adjoint terminal value missing");
    detail::check_noise(problem, noise, M);
    const std::size_t paths = noise.paths();
    if (!features.constant_only() &&
        (features.source()->paths() != paths || features.source()->steps() != problem.steps()))
        throw DimensionError("feature source does not match the noise grid");
    const std::size_t steps = problem.steps();
    const double dt = problem.dt();
    const double growth = 1.0 + C.drift_r() * dt;
    const auto F = static_cast<Eigen::Index>(features.size());
    const auto& S = problem.step_decay();

    AdjointPair pair(paths, steps, K, M, N, dt, features);
    pair.info.condition.assign(steps, 0.0);
    pair.info.active.assign(steps, 0);
    parallel_for(paths, [&](std::size_t p) {
        const ModeVector eta = data.eta(p);
        if (static_cast<std::size_t>(eta.size()) != K) throw DimensionError("terminal value must have K modes");
        pair.P.state(p, steps) = eta;
        pair.P_pred.state(p, steps) = eta;
    });

    Eigen::MatrixXd design(static_cast<Eigen::Index>(paths), F);
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(K));
    Eigen::MatrixXd Yq(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(K * M));
    for (std::size_t n = steps; n-- > 0;) {
        parallel_for(paths, [&](std::size_t p) {
            const auto row = static_cast<Eigen::Index>(p);
            Eigen::VectorXd phi(F);
            features.eval(p, n, phi.data());
            design.row(row) = phi.transpose();
            Z.row(row) = S.cwiseProduct(pair.P.state(p, n + 1)).transpose();
        });
        const LeastSquares ls(design);
        pair.info.condition[n] = ls.condition();
        pair.info.active[n] = ls.active();
        if (ls.ridged()) ++pair.info.ridged_steps;
        const Eigen::MatrixXd coef_p = ls.solve(Z);
        parallel_for(paths, [&](std::size_t p) {
            const auto row = static_cast<Eigen::Index>(p);
            const Eigen::VectorXd pred = coef_p.transpose() * design.row(row).transpose();
            pair.P_pred.state(p, n) = pred;
            const Eigen::VectorXd dm = Z.row(row).transpose() - pred;
            for (std::size_t i = 0; i < M; ++i) {
                const double w = noise.increment(p, n, i) / dt;
                Yq.row(row).segment(static_cast<Eigen::Index>(i * K), static_cast<Eigen::Index>(K)) = w * dm.transpose();
            }
        });
        pair.q_coef[n] = ls.solve(Yq);
        {
            OperatorMatrix qm = OperatorMatrix::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(M));
            Eigen::VectorXd db(static_cast<Eigen::Index>(M));
            for (std::size_t p = 0; p < paths; ++p) {
                for (std::size_t i = 0; i < M; ++i) db(static_cast<Eigen::Index>(i)) = noise.increment(p, n, i);
                qm.noalias() += Z.row(static_cast<Eigen::Index>(p)).transpose() * db.transpose();
            }
            pair.q_mean[n] = qm / (static_cast<double>(paths) * dt);
        }
        parallel_for(paths, [&](std::size_t p) {
            ModeVector next = growth * pair.P_pred.state(p, n);
            if (N > 0 && !C.is_zero()) next += dt * C.adjoint_sum(p, n, pair.Q(p, n), N);
            if (data.f) next += dt * data.f(p, n);
            detail::check_blowup(next, n, p);
            pair.P.state(p, n) = next;
        });
    }
    return pair;
}

/// Adjoint of the cost along (X̄, ū) with N couplings and the standard feature basis of X̄.
inline AdjointPair solve_adjoint(const Problem& problem, const SharedEnsemble& xbar, const ControlField& u_bar,
                                 const AdjointData& data, std::size_t N, const NoiseGrid& noise) {
    const CoefficientOperators C(problem, xbar, u_bar, N);
    return solve_adjoint(problem, C, data, FeatureBasis::standard(xbar), noise);
}

/// Forcing phi_m = d(t_m) + G(t_m) beta_{t_m} and terminal value eta = w + H beta_T, with
/// beta = (beta^1..beta^D). Conditional expectations are explicit: E(beta_s | F_t) = beta_t.
struct GaussianLinearData {
    std::size_t directions = 0;
    std::function<ModeVector(double t)> d;
    std::function<OperatorMatrix(double t)> G;  // K x directions
    ModeVector w;
    OperatorMatrix H;  // K x directions, empty means zero

    AdjointData as_adjoint_data(std::shared_ptr<const PathEnsemble> brownian, double dt) const {
        AdjointData out;
        const GaussianLinearData self = *this;
        out.eta = [self, brownian](std::size_t p) {
            ModeVector v = self.w;
            if (self.H.size() > 0) v += self.H * brownian->state(p, brownian->steps());
            return v;
        };
        out.f = [self, brownian, dt](std::size_t p, std::size_t n) {
            const double t = static_cast<double>(n) * dt;
            ModeVector v = self.d ? self.d(t) : ModeVector::Zero(self.w.size());
            if (self.G) v += self.G(t) * brownian->state(p, n);
            return v;
        };
        return out;
    }
};

/// Exact-conditional-expectation solution of the linear BSDE with C = 0 in discrete mild form:
/// P_n = sum_{m >= n} dt R^{m-n} E(phi_m | F_n) + R^{N-n} E(eta | F_n), R = growth * diag(decay),
/// Q_n = e^{dt A} (d P_{n+1} / d beta_{n+1}). Here P_n = c_n + A_n beta_n with deterministic c_n, A_n.
inline AdjointPair representation_solver(const Eigen::VectorXd& step_decay, double growth, std::size_t M,
                                         const GaussianLinearData& phi, const NoiseGrid& noise) {
    const auto K = step_decay.size();
    const auto D = static_cast<Eigen::Index>(phi.directions);
    if (phi.w.size() != K) throw DimensionError("terminal value must have K modes");
    if (phi.directions > noise.directions() || phi.directions > M)
        throw DimensionError("linear data uses more directions than the noise truncation");
    if (phi.H.size() > 0 && (phi.H.rows() != K || phi.H.cols() != D)) throw DimensionError("H must be K x directions");
    const std::size_t steps = noise.steps();
    const double dt = noise.dt();
    const std::size_t paths = noise.paths();

    std::vector<ModeVector> c(steps + 1);
    std::vector<Eigen::MatrixXd> A(steps + 1);
    c[steps] = phi.w;
    A[steps] = phi.H.size() > 0 ? phi.H : Eigen::MatrixXd::Zero(K, D);
    AdjointPair pair(paths, steps, static_cast<std::size_t>(K), M, 0, dt, FeatureBasis());
    for (std::size_t n = steps; n-- > 0;) {
        const double t = static_cast<double>(n) * dt;
        const ModeVector d = phi.d ? phi.d(t) : ModeVector::Zero(K);
        const Eigen::MatrixXd G = phi.G ? phi.G(t) : Eigen::MatrixXd::Zero(K, D);
        if (d.size() != K || G.rows() != K || G.cols() != D) throw DimensionError("forcing has the wrong shape");
        c[n] = growth * step_decay.cwiseProduct(c[n + 1]) + dt * d;
        A[n] = growth * step_decay.asDiagonal() * A[n + 1] + dt * G;
        OperatorMatrix q = OperatorMatrix::Zero(K, static_cast<Eigen::Index>(M));
        q.leftCols(D) = step_decay.asDiagonal() * A[n + 1];
        pair.q_coef[n] = Eigen::Map<const Eigen::MatrixXd>(q.data(), 1, q.size());
        pair.q_mean[n] = q;
    }
    parallel_for(paths, [&](std::size_t p) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(D);
        for (std::size_t n = 0; n <= steps; ++n) {
            pair.P.state(p, n) = c[n] + A[n] * beta;
            if (n < steps)
                pair.P_pred.state(p, n) = step_decay.cwiseProduct(c[n + 1] + A[n + 1] * beta);
            else
                pair.P_pred.state(p, n) = pair.P.state(p, n);
            if (n < steps)
                for (Eigen::Index i = 0; i < D; ++i) beta(i) += noise.increment(p, n, static_cast<std::size_t>(i));
        }
    });
    pair.info.condition.assign(steps, 1.0);
    pair.info.active.assign(steps, 1);
    return pair;
}

inline AdjointPair representation_solver(const Problem& problem, const GaussianLinearData& phi,
                                         const NoiseGrid& noise) {
    detail::check_noise(problem, noise, phi.directions);
    return representation_solver(problem.step_decay(), 1.0 + problem.spec().drift_dr() * problem.dt(), problem.M(),
                                 phi, noise);
}

/// E int_t^T |Q|_HS^2 + max_n E|P_n|^2 against (T-t)^{1-2a} int_t^T (T-s)^{2a} E|phi_s|^2 ds (t = t_0).
struct RepresentationEstimate {
    double lhs = 0.0;
    double rhs = 0.0;
    double constant = 0.0;  // lhs / rhs
};

inline RepresentationEstimate representation_estimate(const AdjointPair& pair, const AdjointData& data, double alpha) {
    const std::size_t steps = pair.steps();
    const double dt = pair.dt();
    const double T = static_cast<double>(steps) * dt;
    RepresentationEstimate out;
    std::vector<double> p_sq(steps + 1, 0.0);
    double q_int = 0.0, phi_int = 0.0;
    for (std::size_t p = 0; p < pair.paths(); ++p)
        for (std::size_t n = 0; n <= steps; ++n) {
            p_sq[n] += pair.P.state(p, n).squaredNorm();
            if (n == steps) break;
            q_int += dt * pair.Q(p, n).squaredNorm();
            if (data.f) {
                const double a = T - static_cast<double>(n) * dt, b = a - dt;
                const double w = (std::pow(a, 1.0 + 2.0 * alpha) - std::pow(b, 1.0 + 2.0 * alpha)) / (1.0 + 2.0 * alpha);
                phi_int += w * data.f(p, n).squaredNorm();
            }
        }
    const double inv = 1.0 / static_cast<double>(pair.paths());
    double sup_p = 0.0;
    for (double v : p_sq) sup_p = std::max(sup_p, v * inv);
    out.lhs = q_int * inv + sup_p;
    out.rhs = std::pow(T, 1.0 - 2.0 * alpha) * phi_int * inv;
    out.constant = detail::smallest_constant(out.lhs, out.rhs);
    return out;
}

/// Relative L^2(Omega x [0,T]) distance between the P components of two pairs (left-point in time).
inline double relative_p_error(const AdjointPair& a, const AdjointPair& b) {
    if (a.paths() != b.paths() || a.steps() != b.steps() || a.K() != b.K()) throw DimensionError("pairs differ in shape");
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < a.paths(); ++p)
        for (std::size_t n = 0; n < a.steps(); ++n) {
            num += (a.P.state(p, n) - b.P.state(p, n)).squaredNorm();
            den += b.P.state(p, n).squaredNorm();
        }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

namespace detail {
/// int_{t_n}^{t_{n+1}} (T - l)^{2 alpha} dl.
inline double weighted_cell(double T, double tn, double dt, double alpha) {
    const double e = 1.0 + 2.0 * alpha;
    return (std::pow(T - tn, e) - std::pow(std::max(T - tn - dt, 0.0), e)) / e;
}

inline std::size_t path_limit(std::size_t paths, std::size_t max_paths) { return std::min(paths, max_paths); }
}  // namespace detail

struct QTraceReport {
    double value = 0.0;   // E int_0^T (T-l)^{2a} |Q_l|_1^2 dl
    double std_error = 0.0;
    std::vector<double> profile;  // E |Q_n|_1^2 per step
};

/// Weighted trace-norm integral of Q over the first max_paths paths.
inline QTraceReport q_trace_diagnostics(const AdjointPair& pair, double alpha,
                                        std::size_t max_paths = static_cast<std::size_t>(-1)) {
    const std::size_t np = detail::path_limit(pair.paths(), max_paths);
    const std::size_t steps = pair.steps();
    const double dt = pair.dt();
    const double T = static_cast<double>(steps) * dt;
    QTraceReport rep;
    rep.profile.assign(steps, 0.0);
    std::vector<double> per(np, 0.0);
    std::vector<double> norms(np * steps, 0.0);
    parallel_for(np, [&](std::size_t p) {
        double s = 0.0;
        for (std::size_t n = 0; n < steps; ++n) {
            const double tn = trace_norm(pair.Q(p, n));
            norms[p * steps + n] = tn * tn;
            s += detail::weighted_cell(T, static_cast<double>(n) * dt, dt, alpha) * tn * tn;
        }
        per[p] = s;
    });
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t n = 0; n < steps; ++n) rep.profile[n] += norms[p * steps + n] / static_cast<double>(np);
    const Estimate e = mean_estimate(per);
    rep.value = e.value;
    rep.std_error = e.std_error;
    return rep;
}

/// Partial drift sums S_n = sum_m dt e^{t_m A} sum_{i<=n} C_i^* Q_m e_i (the mild drift at t = 0)
/// for each n in n_list, with the E-norms of consecutive differences (S_0 = 0) and the
/// weighted class quantity sup_n E int (T-s)^{2a} |sum_{i<=n} C_i^* Q e_i|^2 ds.
struct DriftSumTable {
    std::vector<std::size_t> n_list;
    std::vector<double> partial_norm;  // sqrt E|S_n|^2
    std::vector<double> diff_norm;     // sqrt E|S_{n_k} - S_{n_{k-1}}|^2
    std::vector<double> diff_se;       // standard error of E|.|^2 mapped through sqrt
    double class_sup = 0.0;
};

inline DriftSumTable drift_sum_partial(const Problem& problem, const AdjointPair& pair, const CoefficientOperators& C,
                                       const std::vector<std::size_t>& n_list, double alpha,
                                       std::size_t max_paths = static_cast<std::size_t>(-1)) {
    for (std::size_t k = 0; k < n_list.size(); ++k) {
        if (n_list[k] > pair.M()) throw DimensionError("partial sum index exceeds the noise truncation");
        if (k > 0 && n_list[k] <= n_list[k - 1]) throw DomainError("n_list must be increasing");
    }
    const std::size_t np = detail::path_limit(pair.paths(), max_paths);
    const std::size_t steps = pair.steps();
    const std::size_t L = n_list.size();
    const double dt = pair.dt();
    const double T = static_cast<double>(steps) * dt;
    const auto& basis = problem.basis();
    std::vector<double> diff_sq(np * L, 0.0), part_sq(np * L, 0.0), cls(np * L, 0.0);
    parallel_for(np, [&](std::size_t p) {
        std::vector<ModeVector> S(L, ModeVector::Zero(static_cast<Eigen::Index>(pair.K())));
        for (std::size_t m = 0; m < steps; ++m) {
            const OperatorMatrix q = pair.Q(p, m);
            const double tm = static_cast<double>(m) * dt;
            const Eigen::VectorXd decay = basis.decay(tm, pair.K());
            const double w = detail::weighted_cell(T, tm, dt, alpha);
            for (std::size_t k = 0; k < L; ++k) {
                const ModeVector v = C.adjoint_sum(p, m, q, n_list[k]);
                S[k] += dt * decay.cwiseProduct(v);
                cls[p * L + k] += w * v.squaredNorm();
            }
        }
        for (std::size_t k = 0; k < L; ++k) {
            part_sq[p * L + k] = S[k].squaredNorm();
            diff_sq[p * L + k] = (k == 0 ? S[0] : ModeVector(S[k] - S[k - 1])).squaredNorm();
        }
    });
    DriftSumTable t;
    t.n_list = n_list;
    for (std::size_t k = 0; k < L; ++k) {
        std::vector<double> d(np), s(np), c(np);
        for (std::size_t p = 0; p < np; ++p) {
            d[p] = diff_sq[p * L + k];
            s[p] = part_sq[p * L + k];
            c[p] = cls[p * L + k];
        }
        const Estimate ed = mean_estimate(d);
        t.diff_norm.push_back(std::sqrt(ed.value));
        t.diff_se.push_back(ed.value > 0.0 ? ed.std_error / (2.0 * std::sqrt(ed.value)) : 0.0);
        t.partial_norm.push_back(std::sqrt(mean_estimate(s).value));
        t.class_sup = std::max(t.class_sup, mean_estimate(c).value);
    }
    return t;
}

/// L^2 residual of the mild identity
///   P_n = R^{N-n} eta + sum_{m>=n} R^{m-n} [dt (sum_{i<=N} C_i^* Q_m e_i + f_m) - growth Q_m dW_m]
/// averaged over the probe steps, with R = growth e^{dt A} and the stochastic integral rebuilt from Q and the noise.
inline double mild_residual(const Problem& problem, const AdjointPair& pair, const CoefficientOperators& C,
                            const AdjointData& data, const NoiseGrid& noise, const std::vector<std::size_t>& probes) {
    const std::size_t steps = pair.steps();
    const double dt = pair.dt();
    const double growth = 1.0 + C.drift_r() * dt;
    const auto& S = problem.step_decay();
    const std::size_t M = pair.M();
    for (std::size_t n : probes)
        if (n > steps) throw DimensionError("probe step beyond the horizon");
    std::vector<double> per(pair.paths() * probes.size(), 0.0);
    parallel_for(pair.paths(), [&](std::size_t p) {
        // Backward recursion of the reconstruction, recorded at the probe steps.
        ModeVector rec = data.eta(p);
        std::vector<ModeVector> at(steps + 1);
        at[steps] = rec;
        for (std::size_t m = steps; m-- > 0;) {
            const OperatorMatrix q = pair.Q(p, m);
            Eigen::VectorXd db(static_cast<Eigen::Index>(M));
            for (std::size_t i = 0; i < M; ++i) db(static_cast<Eigen::Index>(i)) = noise.increment(p, m, i);
            ModeVector drift = ModeVector::Zero(rec.size());
            if (pair.N() > 0 && !C.is_zero()) drift += C.adjoint_sum(p, m, q, pair.N());
            if (data.f) drift += data.f(p, m);
            rec = growth * (S.cwiseProduct(rec) - q * db) + dt * drift;
            at[m] = rec;
        }
        for (std::size_t k = 0; k < probes.size(); ++k)
            per[p * probes.size() + k] = (pair.P.state(p, probes[k]) - at[probes[k]]).squaredNorm();
    });
    double total = 0.0;
    for (double v : per) total += v;
    return probes.empty() ? 0.0 : std::sqrt(total / static_cast<double>(per.size()));
}

/// E<P_t, x> through the forward representation E<eta, X_T^{x,t}> + E sum_m dt <f_m, X_m^{x,t}>
/// with restarted linear forward runs from each step in t_steps.
struct ContinuityTable {
    std::vector<std::size_t> steps;
    std::vector<double> value;
    std::vector<double> std_error;
    std::vector<double> increment;  // |value_k - value_{k-1}|, first entry 0
};

inline ContinuityTable weak_continuity_probe(const Problem& problem, const CoefficientOperators& C,
                                             const AdjointData& data, const std::vector<std::size_t>& t_steps,
                                             const ModeVector& x, const NoiseGrid& noise) {
    ContinuityTable tab;
    for (std::size_t s : t_steps) {
        if (s > problem.steps()) throw DomainError("probe time beyond the horizon");
        LinearFsdeInputs in;
        in.C = C;
        in.start_step = s;
        in.x = x;
        const PathEnsemble X = simulate_linear_fsde(problem, in, noise);
        std::vector<double> per(noise.paths());
        parallel_for(noise.paths(), [&](std::size_t p) {
            double v = data.eta(p).dot(X.state(p, problem.steps()));
            if (data.f)
                for (std::size_t m = s; m < problem.steps(); ++m) v += problem.dt() * data.f(p, m).dot(X.state(p, m));
            per[p] = v;
        });
        const Estimate e = mean_estimate(per);
        tab.steps.push_back(s);
        tab.value.push_back(e.value);
        tab.std_error.push_back(e.std_error);
        tab.increment.push_back(tab.value.size() > 1 ? std::abs(e.value - tab.value[tab.value.size() - 2]) : 0.0);
    }
    return tab;
}

}  // namespace smpheat
