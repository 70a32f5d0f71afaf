#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/error.hpp"

namespace smpheat {

/// Log-log power-law fit residual ~ C * abscissa^slope.
struct RateReport {
    std::vector<double> abscissae;
    std::vector<double> residuals;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    bool fitted = false;

    void write_csv(std::ostream& os) const {
        os << "epsilon_or_delta,residual,slope_fit,r_squared\n";
        os.precision(17);
        for (std::size_t i = 0; i < abscissae.size(); ++i)
            os << abscissae[i] << ',' << residuals[i] << ',' << slope << ',' << r_squared << '\n';
    }
};

inline RateReport fit_rate(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw DomainError("fit_rate needs at least 3 points");
    RateReport out;
    double sx = 0, sy = 0;
    for (const auto& [x, r] : points) {
        if (!(x > 0.0) || !(r > 0.0)) throw DomainError("fit_rate needs strictly positive abscissae and residuals");
        out.abscissae.push_back(x);
        out.residuals.push_back(r);
        sx += std::log(x);
        sy += std::log(r);
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [x, r] : points) {
        const double dx = std::log(x) - mx, dy = std::log(r) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DomainError("fit_rate needs distinct abscissae");
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    out.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    out.fitted = true;
    return out;
}

/// Builds a report from (abscissa, residual) pairs, fitting only when every residual is positive.
inline RateReport rate_report(const std::vector<double>& abscissae, const std::vector<double>& residuals) {
    std::vector<std::pair<double, double>> pts;
    bool positive = abscissae.size() >= 3;
    for (std::size_t i = 0; i < abscissae.size(); ++i) {
        pts.emplace_back(abscissae[i], residuals[i]);
        positive = positive && residuals[i] > 0.0 && std::isfinite(residuals[i]);
    }
    if (positive) return fit_rate(pts);
    RateReport out;
    out.abscissae = abscissae;
    out.residuals = residuals;
    return out;
}

/// int_zeta^t (t-l)^{-2 alpha} (l-zeta)^{-2 alpha} dl = B(1-2 alpha, 1-2 alpha) (t-zeta)^{1-4 alpha}.
inline double beta_convolution(double alpha, double t, double zeta) {
    if (!(alpha >= 0.0 && alpha < 0.5)) throw DomainError("alpha must lie in [0, 0.5)");
    if (!(t > zeta)) throw DomainError("beta_convolution needs t > zeta");
    const double a = 1.0 - 2.0 * alpha;
    return std::beta(a, a) * std::pow(t - zeta, 1.0 - 4.0 * alpha);
}

namespace detail {
// int_a^b tau^{-beta} dtau for 0 <= a < b.
inline double kernel_moment0(double a, double b, double beta) {
    return (std::pow(b, 1.0 - beta) - std::pow(a, 1.0 - beta)) / (1.0 - beta);
}
inline double kernel_moment1(double a, double b, double beta) {
    return (std::pow(b, 2.0 - beta) - std::pow(a, 2.0 - beta)) / (2.0 - beta);
}
}  // namespace detail

/// Product-integration weights w_j with sum_j w_j u(t_j) = int_{t_0}^{t_m} (t_m - l)^{-beta} u(l) dl
/// exactly for u piecewise linear on the grid. beta in [0, 1).
inline std::vector<double> singular_weights_linear(std::span<const double> times, std::size_t m, double beta) {
    std::vector<double> w(m + 1, 0.0);
    const double tm = times[m];
    for (std::size_t j = 0; j < m; ++j) {
        const double h = times[j + 1] - times[j];
        const double a = tm - times[j + 1];
        const double b = tm - times[j];
        const double m0 = detail::kernel_moment0(a, b, beta);
        const double m1 = detail::kernel_moment1(a, b, beta);
        // tau = t_m - l; the hat functions are (tau - a)/h for u_j and (b - tau)/h for u_{j+1}.
        w[j] += (m1 - a * m0) / h;
        w[j + 1] += (b * m0 - m1) / h;
    }
    return w;
}

/// Weights for integrands piecewise constant on [t_j, t_{j+1}) (left values): w_j = int (t_m - l)^{-beta} dl.
inline std::vector<double> singular_weights_constant(std::span<const double> times, std::size_t m, double beta) {
    std::vector<double> w(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        w[j] = detail::kernel_moment0(times[m] - times[j + 1], times[m] - times[j], beta);
    return w;
}

/// Smallest bound u solving u(t) = e(t) + c int_s^t (t-l)^{-2 alpha} u(l) dl on the grid, obtained
/// by Picard iteration from u = e; by the Volterra comparison principle it majorizes every
/// nonnegative solution of the corresponding inequality.
inline std::vector<double> singular_gronwall(std::span<const double> e, double c, double alpha,
                                             std::span<const double> times) {
    if (!(alpha >= 0.0 && alpha < 0.5)) throw DomainError("alpha must lie in [0, 0.5)");
    if (e.size() != times.size() || times.empty()) throw DimensionError("singular_gronwall: e and time grid differ");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw DomainError("time grid must be strictly increasing");
    for (double v : e)
        if (!(v >= 0.0)) throw DomainError("singular_gronwall needs nonnegative e");

    const std::size_t n = times.size();
    const double beta = 2.0 * alpha;
    std::vector<std::vector<double>> weights(n);
    for (std::size_t m = 1; m < n; ++m) weights[m] = singular_weights_linear(times, m, beta);

    std::vector<double> u(e.begin(), e.end());
    std::vector<double> next(n);
    for (int iter = 0; iter < 50; ++iter) {
        double diff = 0.0, scale = 1.0;
        for (std::size_t m = 0; m < n; ++m) {
            double integral = 0.0;
            for (std::size_t j = 0; j < weights[m].size(); ++j) integral += weights[m][j] * u[j];
            next[m] = e[m] + c * integral;
            diff = std::max(diff, std::abs(next[m] - u[m]));
            scale = std::max(scale, std::abs(next[m]));
        }
        u.swap(next);
        if (diff < 1e-8 * scale) return u;
    }
    throw DivergenceError("singular_gronwall: Picard iteration did not converge in 50 iterations (c too large for the horizon)");
}

}  // namespace smpheat
