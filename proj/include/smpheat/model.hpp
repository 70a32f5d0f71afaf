#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/error.hpp"
#include "smpheat/spectral.hpp"

namespace smpheat {

enum class SigmaShape { Tanh, Linear };

/// Problem instance for the controlled stochastic heat equation
///
///   dX = (X_xx + b(x, X, u)) dt + sigma(x, X, u) dW,   X(t, 0) = X(t, 1) = 0,
///
/// with cost E int_0^T int_0^1 l(x, X, u) dx dt + E int_0^1 h(x, X_T) dx.
/// Coefficients:
///   b = b0 + b1 r + b2 u
///   sigma = s0 + s1 phi(r) + s2 u,    phi = tanh (default) or identity
///   l = l0 + w_l (r - r_ref(x))^2 + w_u (u - u_ref)^2
///   h = w_h (r - r_T(x))^2 + h_lin(x) r
/// r_ref, r_T, h_lin and x0 are given as mode coefficients (zero padded to K).
struct ModelSpec {
    double alpha = 0.25;
    double T = 0.5;
    std::size_t K = 16;
    std::size_t n_x = 64;
    std::size_t n_steps = 64;
    std::size_t M = 16;
    std::size_t N = 8;

    bool drift_enabled = true;
    double b0 = 0.0, b1 = -0.5, b2 = 1.0;

    SigmaShape sigma_shape = SigmaShape::Tanh;
    double s0 = 0.3, s1 = 0.4, s2 = 0.2;

    double l0 = 0.0, w_l = 1.0, w_u = 0.1, u_ref = 0.0;
    double w_h = 1.0;
    ModeVector r_ref = ModeVector::Constant(1, 0.5);
    ModeVector r_T = ModeVector::Constant(1, 1.0);
    ModeVector h_lin = ModeVector();

    double u_min = -1.0, u_max = 1.0;
    ModeVector x0 = ModeVector::Constant(1, 1.0);

    double dt() const { return T / static_cast<double>(n_steps); }
    double box_width() const { return u_max - u_min; }

    double drift(double r, double u) const { return drift_enabled ? b0 + b1 * r + b2 * u : 0.0; }
    double drift_dr() const { return drift_enabled ? b1 : 0.0; }
    double drift_du() const { return drift_enabled ? b2 : 0.0; }

    double sigma(double r, double u) const {
        const double phi = sigma_shape == SigmaShape::Tanh ? std::tanh(r) : r;
        return s0 + s1 * phi + s2 * u;
    }
    double sigma_dr(double r) const {
        if (sigma_shape == SigmaShape::Linear) return s1;
        const double c = std::cosh(r);
        return s1 / (c * c);
    }
    double sigma_du() const { return s2; }

    double running(double r, double u, double ref) const {
        const double dr = r - ref;
        const double du = u - u_ref;
        return l0 + w_l * dr * dr + w_u * du * du;
    }
    double running_dr(double r, double ref) const { return 2.0 * w_l * (r - ref); }
    double running_du(double u) const { return 2.0 * w_u * (u - u_ref); }

    double terminal(double r, double target, double lin) const {
        const double dr = r - target;
        return w_h * dr * dr + lin * r;
    }
    double terminal_dr(double r, double target, double lin) const { return 2.0 * w_h * (r - target) + lin; }

    /// sup |d sigma / dr| over the coefficient family.
    double sigma_dr_sup() const { return std::abs(s1); }

    /// Lipschitz constant of the Nemytskii coefficients in (r, u), as used in the standing assumptions.
    double lipschitz_bound() const {
        return std::max({std::abs(b1), std::abs(b2), std::abs(s1), std::abs(s2)}) * std::numbers::sqrt2;
    }

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (!(alpha >= 0.0 && alpha < 0.5)) out.emplace_back("alpha must lie in [0, 0.5)");
        if (!(T > 0.0)) out.emplace_back("T must be positive");
        if (K == 0) out.emplace_back("K must be positive");
        if (K > n_x) out.emplace_back("K must not exceed n_x");
        if (M == 0) out.emplace_back("M must be positive");
        if (M > n_x) out.emplace_back("M must not exceed n_x");
        if (N > M) out.emplace_back("N must not exceed M");
        if (n_steps == 0) out.emplace_back("n_steps must be positive");
        if (!(u_min < u_max)) out.emplace_back("u_min must be below u_max");
        auto fits = [&](const ModeVector& v, const char* name) {
            if (static_cast<std::size_t>(v.size()) > K) out.emplace_back(std::string(name) + " has more than K modes");
            if (!v.allFinite()) out.emplace_back(std::string(name) + " has non-finite entries");
        };
        fits(x0, "x0");
        fits(r_ref, "r_ref");
        fits(r_T, "r_T");
        fits(h_lin, "h_lin");
        return out;
    }

    void validate() const {
        auto v = violations();
        if (!v.empty()) throw ConfigError(std::move(v));
    }
};

/// Control u_t(x), piecewise constant on [t_n, t_{n+1}) and sampled on the spatial grid,
/// with values in the box [lo, hi]. Rows are time steps.
class ControlField {
public:
    ControlField() = default;

    ControlField(Eigen::MatrixXd values, double lo, double hi) : values_(std::move(values)), lo_(lo), hi_(hi) {
        if (!(lo < hi)) throw PreconditionError("control box must satisfy u_min < u_max");
    }

    static ControlField constant(std::size_t n_steps, std::size_t n_x, double value, double lo, double hi) {
        return ControlField(
            Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_steps), static_cast<Eigen::Index>(n_x), value), lo,
            hi);
    }

    std::size_t steps() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t grid_size() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

    const Eigen::MatrixXd& values() const noexcept { return values_; }
    Eigen::MatrixXd& values() noexcept { return values_; }
    auto row(std::size_t n) const { return values_.row(static_cast<Eigen::Index>(n)); }
    double operator()(std::size_t n, std::size_t j) const {
        return values_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
    }

    bool in_box(double slack = 0.0) const {
        return values_.size() == 0 || (values_.minCoeff() >= lo_ - slack && values_.maxCoeff() <= hi_ + slack);
    }

    ControlField clipped() const {
        ControlField out = *this;
        out.values_ = values_.cwiseMax(lo_).cwiseMin(hi_);
        return out;
    }

private:
    Eigen::MatrixXd values_;
    double lo_ = 0.0;
    double hi_ = 1.0;
};

/// Validated model together with its spatial discretization.
class Problem {
public:
    explicit Problem(ModelSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        basis_ = SpectralBasis(spec_.K, spec_.n_x, spec_.M);
        r_ref_grid_ = basis_.to_grid(padded(spec_.r_ref));
        r_T_grid_ = basis_.to_grid(padded(spec_.r_T));
        h_lin_grid_ = basis_.to_grid(padded(spec_.h_lin));
        x0_ = padded(spec_.x0);
        step_decay_ = basis_.decay(spec_.dt());
        const double h = basis_.cell();
        cost_weights_ = GridVector::Constant(static_cast<Eigen::Index>(spec_.n_x), h);
        // Composite trapezoid on [0,1] including the Dirichlet nodes; the boundary node
        // borrows the nearest interior control value, so the end weights absorb h/2.
        cost_weights_(0) += 0.5 * h;
        cost_weights_(cost_weights_.size() - 1) += 0.5 * h;
    }

    const ModelSpec& spec() const noexcept { return spec_; }
    const SpectralBasis& basis() const noexcept { return basis_; }
    std::size_t K() const noexcept { return spec_.K; }
    std::size_t M() const noexcept { return spec_.M; }
    std::size_t n_x() const noexcept { return spec_.n_x; }
    std::size_t steps() const noexcept { return spec_.n_steps; }
    double dt() const noexcept { return spec_.dt(); }
    double time(std::size_t n) const noexcept { return static_cast<double>(n) * spec_.dt(); }

    const ModeVector& x0() const noexcept { return x0_; }
    const GridVector& r_ref_grid() const noexcept { return r_ref_grid_; }
    const GridVector& r_T_grid() const noexcept { return r_T_grid_; }
    const GridVector& h_lin_grid() const noexcept { return h_lin_grid_; }
    /// e^{-lambda_k dt}, k <= K.
    const Eigen::VectorXd& step_decay() const noexcept { return step_decay_; }
    /// Spatial quadrature weights of the cost integrals (trapezoid with boundary nodes).
    const GridVector& cost_weights() const noexcept { return cost_weights_; }

    ControlField constant_control(double value) const {
        return ControlField::constant(spec_.n_steps, spec_.n_x, value, spec_.u_min, spec_.u_max);
    }

    ModeVector padded(const ModeVector& v) const {
        ModeVector out = ModeVector::Zero(static_cast<Eigen::Index>(spec_.K));
        const auto n = std::min<Eigen::Index>(v.size(), out.size());
        out.head(n) = v.head(n);
        return out;
    }

    void check_control(const ControlField& u) const {
        if (u.steps() != spec_.n_steps || u.grid_size() != spec_.n_x)
            throw DimensionError("control field shape does not match the time/space grid");
        if (!u.in_box(1e-12)) throw PreconditionError("control outside the box [u_min, u_max]");
    }

private:
    ModelSpec spec_;
    SpectralBasis basis_;
    ModeVector x0_;
    GridVector r_ref_grid_, r_T_grid_, h_lin_grid_;
    Eigen::VectorXd step_decay_;
    GridVector cost_weights_;
};

}  // namespace smpheat
