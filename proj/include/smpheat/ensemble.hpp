#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "smpheat/error.hpp"
#include "smpheat/noise.hpp"

namespace smpheat {

/// Monte Carlo ensemble of Galerkin coefficient trajectories, [paths x (steps+1) x modes].
class PathEnsemble {
public:
    using Map = Eigen::Map<Eigen::VectorXd>;
    using ConstMap = Eigen::Map<const Eigen::VectorXd>;

    PathEnsemble() = default;
    PathEnsemble(std::size_t paths, std::size_t steps, std::size_t modes, double dt)
        : paths_(paths), steps_(steps), modes_(modes), dt_(dt), data_(paths * (steps + 1) * modes, 0.0) {}

    std::size_t paths() const noexcept { return paths_; }
    /// Number of time steps; states exist at steps + 1 grid times.
    std::size_t steps() const noexcept { return steps_; }
    std::size_t modes() const noexcept { return modes_; }
    double dt() const noexcept { return dt_; }
    double time(std::size_t n) const noexcept { return static_cast<double>(n) * dt_; }

    Map state(std::size_t path, std::size_t step) {
        return Map(data_.data() + offset(path, step), static_cast<Eigen::Index>(modes_));
    }
    ConstMap state(std::size_t path, std::size_t step) const {
        return ConstMap(data_.data() + offset(path, step), static_cast<Eigen::Index>(modes_));
    }

    const std::vector<double>& raw() const noexcept { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// CSV with columns path,step,time,mode,value (modes 1-based). At most max_paths paths.
    void write_csv(std::ostream& os, std::size_t max_paths = static_cast<std::size_t>(-1)) const {
        os << "path,step,time,mode,value\n";
        const std::size_t np = std::min(paths_, max_paths);
        os.precision(17);
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t n = 0; n <= steps_; ++n) {
                const auto x = state(p, n);
                for (std::size_t k = 0; k < modes_; ++k)
                    os << p << ',' << n << ',' << time(n) << ',' << (k + 1) << ',' << x(static_cast<Eigen::Index>(k))
                       << '\n';
            }
    }

private:
    std::size_t offset(std::size_t path, std::size_t step) const {
        return (path * (steps_ + 1) + step) * modes_;
    }

    std::size_t paths_ = 0;
    std::size_t steps_ = 0;
    std::size_t modes_ = 0;
    double dt_ = 0.0;
    std::vector<double> data_;
};

using SharedEnsemble = std::shared_ptr<const PathEnsemble>;

/// Ensemble whose "modes" are the Brownian paths beta^1..beta^count. Used as a
/// regression feature source when a functional depends on the noise directly.
inline PathEnsemble brownian_ensemble(const NoiseGrid& noise, std::size_t count) {
    if (count > noise.directions()) throw DimensionError("brownian_ensemble: more directions than the noise grid");
    PathEnsemble out(noise.paths(), noise.steps(), count, noise.dt());
    for (std::size_t p = 0; p < noise.paths(); ++p)
        for (std::size_t n = 0; n < noise.steps(); ++n)
            for (std::size_t i = 0; i < count; ++i)
                out.state(p, n + 1)(static_cast<Eigen::Index>(i)) =
                    out.state(p, n)(static_cast<Eigen::Index>(i)) + noise.increment(p, n, i);
    return out;
}

/// Mean over paths of |X_n|^power for every grid time.
inline std::vector<double> moment_profile(const PathEnsemble& ens, double power = 2.0) {
    std::vector<double> out(ens.steps() + 1, 0.0);
    for (std::size_t n = 0; n <= ens.steps(); ++n) {
        double s = 0.0;
        for (std::size_t p = 0; p < ens.paths(); ++p) s += std::pow(ens.state(p, n).norm(), power);
        out[n] = ens.paths() ? s / static_cast<double>(ens.paths()) : 0.0;
    }
    return out;
}

/// E sup_n |X_n|^power.
inline double sup_moment(const PathEnsemble& ens, double power = 2.0, std::size_t from_step = 0) {
    double s = 0.0;
    for (std::size_t p = 0; p < ens.paths(); ++p) {
        double m = 0.0;
        for (std::size_t n = from_step; n <= ens.steps(); ++n) m = std::max(m, ens.state(p, n).norm());
        s += std::pow(m, power);
    }
    return ens.paths() ? s / static_cast<double>(ens.paths()) : 0.0;
}

}  // namespace smpheat
