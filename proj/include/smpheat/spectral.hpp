#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "smpheat/error.hpp"

namespace smpheat {

/// Galerkin coefficients of an element of H = L^2([0,1]) in the sine basis.
using ModeVector = Eigen::VectorXd;
/// Values on the interior grid x_j = j/(n_x+1), j = 1..n_x.
using GridVector = Eigen::VectorXd;

/// Dirichlet Laplacian on [0,1]: eigenfunctions e_k(x) = sqrt(2) sin(k pi x) with
/// eigenvalues -(k pi)^2. The generator A is diagonal in this basis, so the
/// semigroup acts as coefficient-wise decay e^{-lambda_k t}.
///
/// The table holds e_k on the grid for k = 1..table_modes(); table_modes() may
/// exceed modes() when the noise is truncated at more directions than the state.
/// With the quadrature weight h = 1/(n_x+1) the sampled functions are exactly
/// orthonormal for k <= n_x (discrete sine transform).
/// sum_{k<=modes} e^{-2 (k pi)^2 t}, the squared Hilbert-Schmidt norm of the truncated e^{tA}.
inline double semigroup_hs_norm_sq(double t, std::size_t modes) {
    if (!(t > 0.0)) throw DomainError("hs_norm_sq needs t > 0");
    double sum = 0.0;
    for (std::size_t k = 1; k <= modes; ++k) {
        const double term = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * static_cast<double>(k * k) * t);
        sum += term;
        if (term < 1e-300) break;
    }
    return sum;
}

class SpectralBasis {
public:
    SpectralBasis() = default;

    SpectralBasis(std::size_t modes, std::size_t grid_points, std::size_t table_modes = 0)
        : modes_(modes), n_x_(grid_points) {
        if (modes == 0) throw DimensionError("spectral basis needs at least one mode");
        if (modes > grid_points)
            throw DimensionError("K = " + std::to_string(modes) + " exceeds n_x = " + std::to_string(grid_points));
        const std::size_t cols = std::max(modes, table_modes);
        if (cols > grid_points)
            throw DimensionError("noise truncation " + std::to_string(cols) + " exceeds n_x = " +
                                 std::to_string(grid_points));
        h_ = 1.0 / static_cast<double>(grid_points + 1);
        grid_.resize(static_cast<Eigen::Index>(grid_points));
        for (std::size_t j = 0; j < grid_points; ++j) grid_(static_cast<Eigen::Index>(j)) = static_cast<double>(j + 1) * h_;
        eigenvalues_.resize(static_cast<Eigen::Index>(cols));
        table_.resize(static_cast<Eigen::Index>(grid_points), static_cast<Eigen::Index>(cols));
        for (std::size_t k = 0; k < cols; ++k) {
            const double freq = static_cast<double>(k + 1) * std::numbers::pi;
            eigenvalues_(static_cast<Eigen::Index>(k)) = freq * freq;
            for (std::size_t j = 0; j < grid_points; ++j)
                table_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                    std::numbers::sqrt2 * std::sin(freq * grid_(static_cast<Eigen::Index>(j)));
        }
        analysis_ = h_ * table_.transpose();
    }

    std::size_t modes() const noexcept { return modes_; }
    std::size_t grid_size() const noexcept { return n_x_; }
    std::size_t table_modes() const noexcept { return static_cast<std::size_t>(table_.cols()); }
    double cell() const noexcept { return h_; }

    /// lambda_k = (k pi)^2 for the 0-based index k (mode k+1).
    double eigenvalue(std::size_t k) const { return eigenvalues_(static_cast<Eigen::Index>(k)); }
    Eigen::VectorXd eigenvalues() const { return eigenvalues_.head(static_cast<Eigen::Index>(modes_)); }
    const GridVector& grid() const noexcept { return grid_; }
    /// n_x x table_modes matrix of e_k(x_j).
    const Eigen::MatrixXd& table() const noexcept { return table_; }

    /// Discrete sine synthesis: sum_k v_k e_k(x_j). v may use up to table_modes() coefficients.
    GridVector to_grid(const Eigen::Ref<const Eigen::VectorXd>& v) const {
        if (static_cast<std::size_t>(v.size()) > table_modes())
            throw DimensionError("mode vector of length " + std::to_string(v.size()) + " exceeds basis table");
        return table_.leftCols(v.size()) * v;
    }

    /// Discrete sine analysis onto the first `count` modes (default: modes()).
    ModeVector to_modes(const Eigen::Ref<const Eigen::VectorXd>& g, std::size_t count = 0) const {
        if (static_cast<std::size_t>(g.size()) != n_x_)
            throw DimensionError("grid array of length " + std::to_string(g.size()) + ", expected " +
                                 std::to_string(n_x_));
        const auto rows = static_cast<Eigen::Index>(count == 0 ? modes_ : count);
        if (rows > table_.cols()) throw DimensionError("requested more modes than the basis table holds");
        return analysis_.topRows(rows) * g;
    }

    /// e^{-lambda_k t} for the first `count` modes (default: modes()).
    Eigen::VectorXd decay(double t, std::size_t count = 0) const {
        if (!(t >= 0.0)) throw DomainError("semigroup time must be non-negative");
        const auto n = static_cast<Eigen::Index>(count == 0 ? modes_ : count);
        return (-t * eigenvalues_.head(n).array()).exp().matrix();
    }

    ModeVector semigroup_apply(double t, const Eigen::Ref<const Eigen::VectorXd>& v) const {
        if (!(t >= 0.0)) throw DomainError("semigroup time must be non-negative");
        if (static_cast<std::size_t>(v.size()) > table_modes()) throw DimensionError("mode vector exceeds basis");
        return (decay(t, static_cast<std::size_t>(v.size())).array() * v.array()).matrix();
    }

    /// Truncated Hilbert-Schmidt norm squared of e^{tA}: sum_{k<=K} e^{-2 lambda_k t}.
    double hs_norm_sq(double t) const { return semigroup_hs_norm_sq(t, modes_); }

private:
    std::size_t modes_ = 0;
    std::size_t n_x_ = 0;
    double h_ = 0.0;
    GridVector grid_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd table_;
    Eigen::MatrixXd analysis_;
};

inline SpectralBasis build_basis(std::size_t modes, std::size_t grid_points, std::size_t table_modes = 0) {
    return SpectralBasis(modes, grid_points, table_modes);
}

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

}  // namespace smpheat
