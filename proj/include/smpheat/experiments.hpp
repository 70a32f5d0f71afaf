#pragma once

// Experiment runner behind the command-line subcommands. Each experiment writes
// results.csv, report.txt and its own CSVs into the output directory.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/adjoint.hpp"
#include "smpheat/coefficients.hpp"
#include "smpheat/config.hpp"
#include "smpheat/duality.hpp"
#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"
#include "smpheat/estimates.hpp"
#include "smpheat/forward.hpp"
#include "smpheat/model.hpp"
#include "smpheat/noise.hpp"
#include "smpheat/parallel.hpp"
#include "smpheat/schatten.hpp"
#include "smpheat/spectral.hpp"
#include "smpheat/variation.hpp"

namespace smpheat {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Named quantities of one run. Checks carry a bound and a pass flag; info rows do not.
class Report {
public:
    struct Row {
        std::string quantity;
        double value = 0.0;
        std::string relation;  // "<=", ">=", "in", or empty for info
        std::string bound;
        enum class Status { Pass, Fail, Info } status = Status::Info;
    };

    explicit Report(std::string experiment) : experiment_(std::move(experiment)) {}

    void info(const std::string& quantity, double value) { rows_.push_back({quantity, value, "", "", Row::Status::Info}); }

    bool at_most(const std::string& quantity, double value, double bound) {
        const bool ok = value <= bound;
        rows_.push_back({quantity, value, "<=", format_number(bound), ok ? Row::Status::Pass : Row::Status::Fail});
        return ok;
    }
    bool at_least(const std::string& quantity, double value, double bound) {
        const bool ok = value >= bound;
        rows_.push_back({quantity, value, ">=", format_number(bound), ok ? Row::Status::Pass : Row::Status::Fail});
        return ok;
    }
    bool within(const std::string& quantity, double value, double lo, double hi) {
        const bool ok = value >= lo && value <= hi;
        rows_.push_back({quantity, value, "in", "[" + format_number(lo) + ";" + format_number(hi) + "]",
                         ok ? Row::Status::Pass : Row::Status::Fail});
        return ok;
    }
    bool require(const std::string& quantity, bool ok) {
        rows_.push_back({quantity, ok ? 1.0 : 0.0, "==", "1", ok ? Row::Status::Pass : Row::Status::Fail});
        return ok;
    }

    const std::string& experiment() const noexcept { return experiment_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }

    bool passed() const {
        for (const auto& r : rows_)
            if (r.status == Row::Status::Fail) return false;
        return true;
    }

    const Row* find(const std::string& quantity) const {
        for (const auto& r : rows_)
            if (r.quantity == quantity) return &r;
        return nullptr;
    }

    void write_csv(std::ostream& os) const {
        os << "# schema=1\nexperiment,quantity,value,relation,bound,status\n";
        for (const auto& r : rows_)
            os << experiment_ << ',' << r.quantity << ',' << format_number(r.value) << ',' << r.relation << ','
               << r.bound << ',' << status_name(r.status) << '\n';
    }

    void write_text(std::ostream& os) const {
        os << "experiment " << experiment_ << '\n';
        for (const auto& r : rows_) {
            if (r.status == Row::Status::Info) {
                os << "  info  " << r.quantity << " = " << format_number(r.value) << '\n';
            } else {
                os << "  " << (r.status == Row::Status::Pass ? "PASS" : "FAIL") << "  " << r.quantity << " = "
                   << format_number(r.value) << "  (" << r.relation << ' ' << r.bound << ")\n";
            }
        }
        os << (passed() ? "all assertions passed\n" : "assertion failures present\n");
    }

private:
    static const char* status_name(Row::Status s) {
        switch (s) {
            case Row::Status::Pass: return "pass";
            case Row::Status::Fail: return "fail";
            default: return "info";
        }
    }

    std::string experiment_;
    std::vector<Row> rows_;
};

namespace detail {

class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw Error("cannot create output directory '" + dir + "'" + (ec ? ": " + ec.message() : std::string()));
    }

    std::ofstream open(const std::string& name) const {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw Error("cannot write '" + (dir_ / name).string() + "'");
        return os;
    }

    const std::filesystem::path& path() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

inline void write_rate_csv(const OutputDir& out, const std::string& name, const RateReport& r) {
    auto os = out.open(name);
    os << "# schema=1\n";
    r.write_csv(os);
}

inline NoiseGrid model_noise(const RunConfig& cfg, const Problem& pb, std::size_t paths = 0) {
    return sample_noise(cfg.seed, paths ? paths : cfg.paths, pb.steps(), pb.M(), pb.dt());
}

/// Deterministic Gamma: s0 on the diagonal of the K x M compression.
inline OperatorMatrix diagonal_gamma(const Problem& pb, double scale) {
    OperatorMatrix G = OperatorMatrix::Zero(static_cast<Eigen::Index>(pb.K()), static_cast<Eigen::Index>(pb.M()));
    for (Eigen::Index k = 0; k < std::min(G.rows(), G.cols()); ++k) G(k, k) = scale / static_cast<double>(k + 1);
    return G;
}

/// Smooth test directions on the (time, space) grid.
inline std::vector<Eigen::MatrixXd> smooth_directions(const Problem& pb) {
    const auto steps = static_cast<Eigen::Index>(pb.steps());
    const auto nx = static_cast<Eigen::Index>(pb.n_x());
    const double T = pb.spec().T;
    const auto& grid = pb.basis().grid();
    const double pi = std::numbers::pi;
    std::vector<Eigen::MatrixXd> out;
    for (int k = 0; k < 8; ++k) {
        Eigen::MatrixXd d(steps, nx);
        for (Eigen::Index n = 0; n < steps; ++n)
            for (Eigen::Index j = 0; j < nx; ++j) {
                const double x = grid(j), t = pb.time(static_cast<std::size_t>(n)) / T;
                switch (k) {
                    case 0: d(n, j) = 1.0; break;
                    case 1: d(n, j) = std::sin(pi * x); break;
                    case 2: d(n, j) = std::cos(3.0 * x + 2.5 * t); break;
                    case 3: d(n, j) = 1.0 - t; break;
                    case 4: d(n, j) = x * (1.0 - x) * 4.0 * t; break;
                    case 5: d(n, j) = std::exp(-x) * (0.5 + t); break;
                    case 6: d(n, j) = 0.5 + 0.5 * std::sin(pi * x) * std::cos(pi * t); break;
                    default: d(n, j) = std::sin(pi * x) + 0.3 * std::sin(3.0 * pi * x) - 0.2 * t; break;
                }
            }
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------

inline Report run_simulate(const RunConfig& cfg, const OutputDir& out) {
    Report rep("simulate");
    const Problem pb(cfg.model);
    const NoiseGrid noise = model_noise(cfg, pb);
    const ControlField u = pb.constant_control(cfg.u_bar);
    auto X = std::make_shared<const PathEnsemble>(simulate_state(pb, u, noise));
    {
        auto os = out.open("ensemble.csv");
        os << "# schema=1\n";
        X->write_csv(os, cfg.export_paths);
    }
    const auto m2 = moment_profile(*X, 2.0);
    const auto mp = moment_profile(*X, static_cast<double>(cfg.moment_power));
    {
        auto os = out.open("moments.csv");
        os << "# schema=1\nstep,time,mean_sq,mean_p\n";
        for (std::size_t n = 0; n < m2.size(); ++n)
            os << n << ',' << format_number(pb.time(n)) << ',' << format_number(m2[n]) << ',' << format_number(mp[n])
               << '\n';
    }
    rep.require("states_finite", X->all_finite());
    rep.info("mean_sq_T", m2.back());
    rep.info("sup_moment_2", sup_moment(*X, 2.0));
    rep.info("sup_moment_p", sup_moment(*X, static_cast<double>(cfg.moment_power)));
    const Estimate J = cost(pb, *X, u);
    rep.info("cost", J.value);
    rep.info("cost_stderr", J.std_error);

    // Linear forward equation along the run: Gamma = s0-scaled diagonal, rho = b0, C from the model.
    LinearFsdeInputs in;
    in.C = CoefficientOperators(pb, X, u, pb.spec().N);
    in.x = pb.x0();
    const ModeVector rho = pb.basis().to_modes(GridVector::Constant(static_cast<Eigen::Index>(pb.n_x()),
                                                                    pb.spec().drift(0.0, cfg.u_bar)));
    in.rho = [rho](std::size_t, std::size_t) { return rho; };
    const OperatorMatrix G = diagonal_gamma(pb, pb.spec().s0 == 0.0 ? 0.3 : pb.spec().s0);
    in.Gamma = [G](std::size_t, std::size_t) { return G; };
    const PathEnsemble L = simulate_linear_fsde(pb, in, noise);
    const MomentBoundReport mb = moment_bound_report(pb, L, in, 10.0);
    rep.info("lfsde_sup_sq", mb.sup_sq);
    rep.info("lfsde_c_sup", mb.c_sup);
    rep.info("lfsde_c_pointwise", mb.c_pointwise);
    rep.at_most("lfsde_c_integrated", mb.c_integrated, 10.0);
    {
        auto os = out.open("moment_bounds.csv");
        os << "# schema=1\nstep,time,mean_sq,pointwise_rhs\n";
        for (std::size_t n = 0; n < mb.mean_sq.size(); ++n)
            os << n << ',' << format_number(pb.time(n)) << ',' << format_number(mb.mean_sq[n]) << ','
               << format_number(mb.pointwise_rhs[n]) << '\n';
    }
    return rep;
}

inline Report run_rates(const RunConfig& cfg, const OutputDir& out) {
    Report rep("rates");
    const Problem pb(cfg.model);
    const NoiseGrid noise = model_noise(cfg, pb);
    std::vector<double> deltas;
    for (std::size_t m = cfg.rates_m_max + 1; m-- > cfg.rates_m_min;) deltas.push_back(std::ldexp(1.0, -static_cast<int>(m)));
    const RateReport r = spike_rate_experiment(pb, pb.constant_control(cfg.u_bar), pb.constant_control(cfg.v),
                                               cfg.rates_t0, deltas, noise);
    write_rate_csv(out, "rates.csv", r);
    for (std::size_t k = 0; k < r.abscissae.size(); ++k)
        rep.info("residual_delta_2^-" + std::to_string(cfg.rates_m_max - k), r.residuals[k]);
    rep.info("expected_slope", 0.5 - pb.spec().alpha);
    rep.within("slope", r.slope, cfg.rates_slope_lo, cfg.rates_slope_hi);
    rep.at_least("r_squared", r.r_squared, cfg.rates_min_r2);
    return rep;
}

inline Report run_variation(const RunConfig& cfg, const OutputDir& out) {
    Report rep("variation-check");
    const Problem pb(cfg.model);
    const NoiseGrid noise = model_noise(cfg, pb);
    const ExpansionReport e =
        expansion_check(pb, pb.constant_control(cfg.u_bar), pb.constant_control(cfg.v), cfg.eps, noise);
    write_rate_csv(out, "expansion_state.csv", e.state);
    write_rate_csv(out, "expansion_cost.csv", e.cost);
    rep.info("gateaux", e.gateaux.value);
    rep.info("gateaux_stderr", e.gateaux.std_error);
    double state_max = 0.0;
    for (double r : e.state.residuals) state_max = std::max(state_max, r);
    rep.info("state_residual_max", state_max);
    if (cfg.expect_exact) {
        rep.at_most("state_residual_max_exact", state_max, cfg.exact_tol);
    } else {
        rep.require("state_rate_fitted", e.state.fitted);
        rep.at_least("state_slope", e.state.fitted ? e.state.slope : 0.0, cfg.min_slope);
    }
    rep.require("cost_rate_fitted", e.cost.fitted);
    rep.at_least("cost_slope", e.cost.fitted ? e.cost.slope : 0.0, cfg.min_slope);
    return rep;
}

/// Gaussian-linear adjoint data: forcing d(t) + G(t) beta_t, terminal value w + H beta_T.
inline GaussianLinearData gaussian_data(const Problem& pb, std::size_t D, bool terminal) {
    const auto K = static_cast<Eigen::Index>(pb.K());
    const auto Di = static_cast<Eigen::Index>(D);
    GaussianLinearData g;
    g.directions = D;
    g.d = [K](double t) {
        ModeVector v = ModeVector::Zero(K);
        for (Eigen::Index k = 0; k < K; ++k) v(k) = std::cos(1.0 + t + static_cast<double>(k)) / static_cast<double>(k + 1);
        return v;
    };
    g.G = [K, Di](double t) {
        OperatorMatrix m(K, Di);
        for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index i = 0; i < Di; ++i)
                m(k, i) = (0.5 + t) * std::sin(static_cast<double>(1 + k + 2 * i)) / static_cast<double>(1 + k + i);
        return m;
    };
    g.w = ModeVector::Zero(K);
    if (terminal) {
        for (Eigen::Index k = 0; k < K; ++k) g.w(k) = 1.0 / static_cast<double>((k + 1) * (k + 1));
        g.H = OperatorMatrix(K, Di);
        for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index i = 0; i < Di; ++i)
                g.H(k, i) = std::cos(static_cast<double>(k * Di + i)) / static_cast<double>(1 + k + i);
    }
    return g;
}

struct TraceStudy {
    QTraceReport trace;
    DriftSumTable drift;
};

inline TraceStudy q_trace_study(const RunConfig& cfg, ModelSpec spec, const OutputDir& out, const std::string& tag) {
    const Problem pb(std::move(spec));
    const NoiseGrid noise = model_noise(cfg, pb);
    const ControlField u = pb.constant_control(cfg.u_bar);
    auto X = std::make_shared<const PathEnsemble>(simulate_state(pb, u, noise));
    const std::size_t N = pb.spec().N;
    const CoefficientOperators C(pb, X, u, N);
    const AdjointPair pair = solve_adjoint(pb, C, cost_adjoint_data(pb, X, u), FeatureBasis::standard(X), noise);
    TraceStudy s;
    s.trace = q_trace_diagnostics(pair, pb.spec().alpha, cfg.trace_paths);
    std::vector<std::size_t> n_list;
    for (std::size_t n = 1; n <= N; n *= 2) n_list.push_back(n);
    if (!n_list.empty()) s.drift = drift_sum_partial(pb, pair, C, n_list, pb.spec().alpha, cfg.trace_paths);
    {
        auto os = out.open("q_trace_" + tag + ".csv");
        os << "# schema=1\nstep,time,mean_trace_norm_sq\n";
        for (std::size_t n = 0; n < s.trace.profile.size(); ++n)
            os << n << ',' << format_number(pb.time(n)) << ',' << format_number(s.trace.profile[n]) << '\n';
    }
    {
        auto os = out.open("drift_sums_" + tag + ".csv");
        os << "# schema=1\nn,partial_norm,diff_norm,diff_stderr\n";
        for (std::size_t k = 0; k < s.drift.n_list.size(); ++k)
            os << s.drift.n_list[k] << ',' << format_number(s.drift.partial_norm[k]) << ','
               << format_number(s.drift.diff_norm[k]) << ',' << format_number(s.drift.diff_se[k]) << '\n';
    }
    {
        auto os = out.open("adjoint_p_" + tag + ".csv");
        pair.write_p_csv(os, cfg.export_paths);
    }
    {
        auto os = out.open("adjoint_q_" + tag + ".csv");
        pair.write_q_csv(os, cfg.export_paths);
    }
    return s;
}

inline Report run_adjoint(const RunConfig& cfg, const OutputDir& out) {
    Report rep("adjoint");
    if (cfg.adjoint_compare) {
        // C = 0 against the exact representation on Gaussian-linear data.
        const Problem pb(cfg.model);
        const NoiseGrid noise = model_noise(cfg, pb);
        const std::size_t D = std::min<std::size_t>(pb.M(), 4);
        auto brown = std::make_shared<const PathEnsemble>(brownian_ensemble(noise, D));
        const FeatureBasis features(brown, D, 0);
        const CoefficientOperators C0 = CoefficientOperators::zero(pb, 0);

        const GaussianLinearData full = gaussian_data(pb, D, true);
        const AdjointPair reg = solve_adjoint(pb, C0, full.as_adjoint_data(brown, pb.dt()), features, noise);
        const AdjointPair ref = representation_solver(pb, full, noise);
        rep.at_most("oracle_relative_p_error", relative_p_error(reg, ref), cfg.adjoint_max_error);

        const GaussianLinearData forcing = gaussian_data(pb, D, false);
        const AdjointData fdata = forcing.as_adjoint_data(brown, pb.dt());
        const AdjointPair reg_f = solve_adjoint(pb, C0, fdata, features, noise);
        const RepresentationEstimate est = representation_estimate(reg_f, fdata, pb.spec().alpha);
        rep.info("estimate_lhs", est.lhs);
        rep.info("estimate_rhs", est.rhs);
        rep.at_most("estimate_constant", est.constant, cfg.adjoint_max_constant);
        rep.info("regression_ridged_steps", static_cast<double>(reg.info.ridged_steps));
    }

    // Weighted trace-norm integral of Q at the configured sizes and at half of them.
    ModelSpec fine = cfg.model;
    ModelSpec coarse = cfg.model;
    coarse.K = std::max<std::size_t>(1, fine.K / 2);
    coarse.M = std::max<std::size_t>(1, fine.M / 2);
    coarse.N = fine.N / 2;
    const TraceStudy sc = q_trace_study(cfg, coarse, out, "coarse");
    const TraceStudy sf = q_trace_study(cfg, fine, out, "fine");
    rep.info("q_trace_coarse", sc.trace.value);
    rep.info("q_trace_coarse_stderr", sc.trace.std_error);
    rep.info("q_trace_fine", sf.trace.value);
    rep.info("q_trace_fine_stderr", sf.trace.std_error);
    rep.require("q_trace_finite", std::isfinite(sc.trace.value) && std::isfinite(sf.trace.value));
    const double change = sc.trace.value > 0.0 ? std::abs(sf.trace.value / sc.trace.value - 1.0)
                                               : std::numeric_limits<double>::infinity();
    rep.at_most("q_trace_relative_change", change, 0.25);
    // Consecutive differences of the partial sums must decrease up to two standard errors.
    bool decreasing = true;
    const auto& dr = sf.drift;
    for (std::size_t k = 0; k < dr.diff_norm.size(); ++k) {
        rep.info("drift_diff_norm_n" + std::to_string(dr.n_list[k]), dr.diff_norm[k]);
        if (k > 0)
            decreasing = decreasing && dr.diff_norm[k] <= dr.diff_norm[k - 1] + 2.0 * std::hypot(dr.diff_se[k], dr.diff_se[k - 1]);
    }
    rep.info("drift_class_sup", sf.drift.class_sup);
    rep.require("drift_partial_sums_cauchy_decreasing", decreasing);
    return rep;
}

inline DualityInputs duality_inputs(const Problem& pb, std::size_t N, std::size_t M_gamma, SharedEnsemble X) {
    DualityInputs in;
    in.N = N;
    in.M_gamma = M_gamma;
    in.x = pb.x0();
    ModeVector rho = ModeVector::Zero(static_cast<Eigen::Index>(pb.K()));
    for (Eigen::Index k = 0; k < rho.size(); ++k) rho(k) = 0.5 / static_cast<double>(k + 1);
    in.rho = [rho](std::size_t, std::size_t) { return rho; };
    const OperatorMatrix G = diagonal_gamma(pb, 0.4);
    in.Gamma = [G](std::size_t, std::size_t) { return G; };
    if (X && M_gamma > 0) {
        const auto basis = pb.basis();
        in.gamma = [X, basis](std::size_t p, std::size_t n) {
            const GridVector r = basis.to_grid(X->state(p, n));
            return basis.to_modes(r.unaryExpr([](double v) { return 0.5 * std::tanh(v); }));
        };
    }
    return in;
}

/// Gap of the duality identity for one case at a given noise grid.
inline DualityResult duality_case(const RunConfig& cfg, const Problem& pb, const NoiseGrid& noise,
                                  std::uint64_t boot_seed) {
    const std::size_t N = pb.spec().N;
    const std::size_t adjoint_N = cfg.adjoint_N == static_cast<std::size_t>(-1) ? N : cfg.adjoint_N;
    if (cfg.duality_case == "semigroup") {
        const std::size_t D = std::min<std::size_t>(pb.M(), 4);
        auto brown = std::make_shared<const PathEnsemble>(brownian_ensemble(noise, D));
        const GaussianLinearData g = gaussian_data(pb, D, true);
        const AdjointData data = g.as_adjoint_data(brown, pb.dt());
        const CoefficientOperators C_adj = CoefficientOperators::zero(pb, adjoint_N);
        const CoefficientOperators C_fwd = CoefficientOperators::zero(pb, N);
        const AdjointPair pair = solve_adjoint(pb, C_adj, data, FeatureBasis(brown, D), noise);
        return duality_gap(pb, C_fwd, data, duality_inputs(pb, N, 0, nullptr), pair, noise, boot_seed);
    }
    const ControlField u = pb.constant_control(cfg.u_bar);
    auto X = std::make_shared<const PathEnsemble>(simulate_state(pb, u, noise));
    const CoefficientOperators C_adj(pb, X, u, adjoint_N);
    const CoefficientOperators C_fwd(pb, X, u, N);
    AdjointData data;
    if (cfg.duality_case == "zero") {
        const auto K = static_cast<Eigen::Index>(pb.K());
        data.eta = [K](std::size_t) { return ModeVector::Zero(K); };
    } else {
        data = cost_adjoint_data(pb, X, u);
    }
    const AdjointPair pair = solve_adjoint(pb, C_adj, data, FeatureBasis::standard(X), noise);
    return duality_gap(pb, C_fwd, data, duality_inputs(pb, N, N, X), pair, noise, boot_seed);
}

inline Report run_duality(const RunConfig& cfg, const OutputDir& out) {
    Report rep("duality-check");
    const Problem pb(cfg.model);
    const NoiseGrid noise = model_noise(cfg, pb);
    const DualityResult r = duality_case(cfg, pb, noise, cfg.seed);
    {
        auto os = out.open("duality.csv");
        os << "# schema=1\ncase,paths,lhs,lhs_stderr,rhs,rhs_stderr,gap,bootstrap_half_width\n";
        os << cfg.duality_case << ',' << r.paths << ',' << format_number(r.lhs.value) << ','
           << format_number(r.lhs.std_error) << ',' << format_number(r.rhs.value) << ','
           << format_number(r.rhs.std_error) << ',' << format_number(r.gap) << ',' << format_number(r.half_width)
           << '\n';
    }
    rep.info("lhs", r.lhs.value);
    rep.info("rhs", r.rhs.value);
    rep.info("bootstrap_half_width", r.half_width);
    const double allowed = std::max(cfg.duality_rel * std::abs(r.rhs.value), cfg.duality_widths * r.half_width);
    rep.at_most("abs_gap", std::abs(r.gap), allowed);

    if (cfg.duality_scaling) {
        // Root-mean-square gap over independent replicates at dyadic path counts.
        const std::size_t replicates = 8;
        std::vector<double> ns, rms;
        auto os = out.open("duality_scaling.csv");
        os << "# schema=1\npaths,replicates,rms_gap\n";
        for (std::size_t level = 4; level-- > 0;) {
            const std::size_t n = std::max<std::size_t>(kChunk, cfg.paths >> level);
            double ss = 0.0;
            for (std::size_t k = 0; k < replicates; ++k) {
                const NoiseGrid nz = sample_noise(cfg.seed + 7919 * (k + 1), n, pb.steps(), pb.M(), pb.dt());
                const double g = duality_case(cfg, pb, nz, cfg.seed + k).gap;
                ss += g * g;
            }
            ns.push_back(static_cast<double>(n));
            rms.push_back(std::sqrt(ss / static_cast<double>(replicates)));
            os << n << ',' << replicates << ',' << format_number(rms.back()) << '\n';
        }
        const RateReport fit = rate_report(ns, rms);
        rep.require("gap_scaling_fitted", fit.fitted);
        rep.within("gap_scaling_slope", fit.fitted ? fit.slope : 0.0, -0.65, -0.35);
    }
    return rep;
}

inline Report run_optimize(const RunConfig& cfg, const OutputDir& out, bool gradient_check, bool solve) {
    Report rep("optimize");
    const Problem pb(cfg.model);
    const NoiseGrid noise = model_noise(cfg, pb);
    const auto& spec = pb.spec();
    if (gradient_check) {
        const ControlField u = pb.constant_control(cfg.u_bar);
        const SmpEvaluation ev = evaluate_smp(pb, u, noise);
        const auto dirs = smooth_directions(pb);
        auto os = out.open("gradient_check.csv");
        os << "# schema=1\ndirection,gateaux,gateaux_stderr,pairing,relative_error\n";
        double worst = 0.0;
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            const PathEnsemble Y = simulate_first_variation(pb, ev.xbar, u, dirs[k], noise);
            const Estimate I = gateaux_cost(pb, *ev.xbar, Y, u, dirs[k]);
            const double a = control_pairing(pb, ev.grad.D, dirs[k]);
            const double rel = std::abs(a - I.value) / std::max(std::abs(I.value), 1e-300);
            worst = std::max(worst, rel);
            os << k << ',' << format_number(I.value) << ',' << format_number(I.std_error) << ',' << format_number(a)
               << ',' << format_number(rel) << '\n';
        }
        rep.at_most("gateaux_max_relative_error", worst, spec.drift_du() == 0.0 && spec.sigma_du() == 0.0 ? 1e-3 : 2e-2);
        const FdReport fd = fd_gradient_check(pb, u, ev.grad, dirs, {1e-2, 2e-3}, noise);
        {
            auto fos = out.open("fd_check.csv");
            fos << "# schema=1\ndirection,pairing,relative_error\n";
            for (std::size_t k = 0; k < fd.analytic.size(); ++k)
                fos << k << ',' << format_number(fd.analytic[k]) << ',' << format_number(fd.relative_error[k]) << '\n';
        }
        rep.at_most("fd_median_relative_error", fd.median, 1e-2);
    }
    if (solve) {
        OptimizerOptions opts;
        opts.max_iter = cfg.max_iter;
        opts.vi_random = cfg.vi_random;
        opts.vi_seed = cfg.seed + 17;
        const OptimizeResult res = projected_gradient(pb, pb.constant_control(cfg.u_bar), noise, opts);
        {
            auto os = out.open("optimizer_log.csv");
            os << "# schema=1\niter,J,J_stderr,step,grad_norm,vi_min\n";
            for (const auto& e : res.log)
                os << e.iter << ',' << format_number(e.J) << ',' << format_number(e.J_stderr) << ','
                   << format_number(e.step) << ',' << format_number(e.grad_norm) << ',' << format_number(e.vi_min)
                   << '\n';
        }
        {
            auto os = out.open("control.csv");
            os << "# schema=1\nstep,time,x,u\n";
            const auto& grid = pb.basis().grid();
            for (std::size_t n = 0; n < pb.steps(); ++n)
                for (std::size_t j = 0; j < pb.n_x(); ++j)
                    os << n << ',' << format_number(pb.time(n)) << ',' << format_number(grid(static_cast<Eigen::Index>(j)))
                       << ',' << format_number(res.u(n, j)) << '\n';
        }
        rep.require("converged", res.converged);
        rep.info("iterations", static_cast<double>(res.log.size()));
        rep.info("final_cost", res.log.back().J);
        rep.info("vi_tolerance", res.vi_tol);
        rep.at_least("vi_min_at_optimum", res.log.back().vi_min, -res.vi_tol);
        if (spec.drift_du() == 0.0 && spec.sigma_du() == 0.0) {
            // Separable quadratic: the minimizer is u_ref clipped to the box.
            const double target = std::clamp(spec.u_ref, spec.u_min, spec.u_max);
            rep.at_most("sup_error_to_minimizer", (res.u.values().array() - target).abs().maxCoeff(), cfg.sup_tol);
        }
        // Shift the optimum by a fraction of the box width towards the far face and recheck.
        const double shift = cfg.perturbation * spec.box_width();
        ControlField pert = res.u;
        for (Eigen::Index k = 0; k < pert.values().size(); ++k) {
            double& v = pert.values().data()[k];
            v = (v - spec.u_min < spec.u_max - v) ? std::min(spec.u_max, v + shift) : std::max(spec.u_min, v - shift);
        }
        const SmpEvaluation ep = evaluate_smp(pb, pert, noise);
        const VIResult vi = variational_inequality_check(pb, pert, ep.grad, vi_samples(pb, cfg.vi_random, cfg.seed + 17));
        rep.at_most("vi_min_after_perturbation", vi.min, -res.vi_tol);
    }
    return rep;
}

inline Report run_schatten(const RunConfig& cfg, const OutputDir& out) {
    Report rep("schatten-test");
    rng::Stream stream(cfg.seed, 0x5c4a);
    double dual_err = 0.0;
    std::size_t trace_viol = 0, left_viol = 0, right_viol = 0;
    auto os = out.open("schatten.csv");
    os << "# schema=1\ninstance,rows,cols,trace_norm,dual_form,trace,product_left,product_right\n";
    for (std::size_t k = 0; k < cfg.instances; ++k) {
        const auto r = static_cast<Eigen::Index>(1 + stream.index(cfg.max_dim));
        const auto c = static_cast<Eigen::Index>(1 + stream.index(cfg.max_dim));
        OperatorMatrix L(r, c);
        for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = stream.normal();
        const double tn = trace_norm(L);
        const double dual = trace_norm_dual(L);
        dual_err = std::max(dual_err, std::abs(tn - dual) / std::max(1.0, tn));
        // Square instances for the trace and the product inequalities.
        const auto n = std::max(r, c);
        OperatorMatrix S(n, n), B(n, n);
        for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = stream.normal();
        for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = stream.normal();
        const double ts = trace_norm(S), ob = opnorm(B), tr = trace(S);
        const double left = trace_norm(S * B), right = trace_norm(B * S);
        const double slack = 1e-12 * std::max(1.0, ts * ob);
        if (std::abs(tr) > ts + 1e-12 * std::max(1.0, ts)) ++trace_viol;
        if (left > ts * ob + slack) ++left_viol;
        if (right > ts * ob + slack) ++right_viol;
        os << k << ',' << r << ',' << c << ',' << format_number(tn) << ',' << format_number(dual) << ','
           << format_number(tr) << ',' << format_number(left / (ts * ob)) << ',' << format_number(right / (ts * ob))
           << '\n';
    }
    rep.info("instances", static_cast<double>(cfg.instances));
    rep.at_most("dual_form_max_relative_error", dual_err, 1e-10);
    rep.at_most("trace_bound_violations", static_cast<double>(trace_viol), 0.0);
    rep.at_most("product_left_violations", static_cast<double>(left_viol), 0.0);
    rep.at_most("product_right_violations", static_cast<double>(right_viol), 0.0);
    return rep;
}

inline Report run_gronwall(const RunConfig& cfg, const OutputDir& out) {
    Report rep("gronwall-check");
    const double pi = std::numbers::pi;
    // B(1/2, 1/2) through the convolution identity and through the substitution l = sin^2.
    const double b_closed = beta_convolution(0.25, 1.0, 0.0);
    double b_quad = 0.0;
    {
        const std::size_t n = 20000;
        // int_0^1 l^{-1/2}(1-l)^{-1/2} dl = int_0^{pi/2} 2 d theta, midpoint rule in theta
        for (std::size_t k = 0; k < n; ++k) {
            const double th = (static_cast<double>(k) + 0.5) * (0.5 * pi) / static_cast<double>(n);
            const double l = std::sin(th) * std::sin(th);
            const double jac = 2.0 * std::sin(th) * std::cos(th);
            b_quad += jac / std::sqrt(l * (1.0 - l)) * (0.5 * pi) / static_cast<double>(n);
        }
    }
    rep.at_most("beta_half_half_error", std::abs(b_closed - pi), 1e-6);
    rep.at_most("beta_half_half_quadrature_error", std::abs(b_quad - pi), 1e-6);

    // alpha = 0: the Volterra bound is e^{ct}.
    const std::size_t steps = cfg.gronwall_steps;
    std::vector<double> times(steps + 1), ones(steps + 1, 1.0);
    for (std::size_t n = 0; n <= steps; ++n) times[n] = cfg.gronwall_T * static_cast<double>(n) / static_cast<double>(steps);
    const auto g0 = singular_gronwall(ones, cfg.gronwall_c, 0.0, times);
    double err0 = 0.0;
    for (std::size_t n = 0; n <= steps; ++n)
        err0 = std::max(err0, std::abs(g0[n] - std::exp(cfg.gronwall_c * times[n])) / std::exp(cfg.gronwall_c * times[n]));
    rep.at_most("gronwall_alpha0_relative_error", err0, 1e-4);
    const auto g4 = singular_gronwall(ones, cfg.gronwall_c, cfg.model.alpha, times);
    rep.info("gronwall_alpha_bound_at_T", g4.back());
    {
        auto os = out.open("gronwall.csv");
        os << "# schema=1\ntime,bound_alpha0,exp_ct,bound_alpha\n";
        for (std::size_t n = 0; n <= steps; ++n)
            os << format_number(times[n]) << ',' << format_number(g0[n]) << ','
               << format_number(std::exp(cfg.gronwall_c * times[n])) << ',' << format_number(g4[n]) << '\n';
    }

    // t^{1/2} |e^{tA}|_HS^2 on a dyadic grid, and its small-t limit (8 pi)^{-1/2}.
    const double limit = 1.0 / std::sqrt(8.0 * pi);
    double sup = 0.0, near = 0.0;
    auto os = out.open("semigroup_hs.csv");
    os << "# schema=1\nt,scaled_hs_norm_sq\n";
    for (int m = 0; m <= 24; ++m) {
        const double t = std::ldexp(1.0, -m);
        const double v = std::sqrt(t) * semigroup_hs_norm_sq(t, 1u << 16);
        sup = std::max(sup, v);
        near = v;
        os << format_number(t) << ',' << format_number(v) << '\n';
    }
    rep.at_most("scaled_hs_sup", sup, 0.25);
    rep.at_most("scaled_hs_limit_relative_error", std::abs(near / limit - 1.0), 0.02);

    // Majorization used with horizon <= 1.
    bool major = true;
    for (double a : {0.0, 0.1, 0.25, 0.4})
        for (int m = 0; m <= 20; ++m) {
            const double s = std::ldexp(1.0, -m);
            major = major && std::pow(s, 1.0 - 4.0 * a) <= std::pow(s, -2.0 * a) * (1.0 + 1e-15);
        }
    rep.require("kernel_majorization_on_unit_horizon", major);
    return rep;
}

}  // namespace detail

/// Runs the configured experiment, writes the artifacts and returns the report.
inline Report run_experiment(const RunConfig& cfg) {
    const auto v = config_violations(cfg);
    if (!v.empty()) throw ConfigError(v);
    if (cfg.threads > 0) set_thread_count(cfg.threads);
    const detail::OutputDir out(cfg.out);
    Report rep = [&] {
        const std::string& e = cfg.experiment;
        if (e == "simulate") return detail::run_simulate(cfg, out);
        if (e == "rates") return detail::run_rates(cfg, out);
        if (e == "variation-check") return detail::run_variation(cfg, out);
        if (e == "adjoint") return detail::run_adjoint(cfg, out);
        if (e == "duality-check") return detail::run_duality(cfg, out);
        if (e == "optimize") return detail::run_optimize(cfg, out, cfg.gradient_check, cfg.solve);
        if (e == "schatten-test") return detail::run_schatten(cfg, out);
        return detail::run_gronwall(cfg, out);
    }();
    {
        auto os = out.open("results.csv");
        rep.write_csv(os);
    }
    {
        auto os = out.open("report.txt");
        rep.write_text(os);
    }
    return rep;
}

/// 0 when every assertion passed, 2 otherwise.
inline int exit_code(const Report& rep) { return rep.passed() ? 0 : 2; }

}  // namespace smpheat
