#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"
#include "smpheat/model.hpp"
#include "smpheat/schatten.hpp"

namespace smpheat {

/// Linearization of the coefficients along a reference pair (X̄, ū).
///
/// C_i v = P_K[ d_r sigma(x, X̄(x), ū(x)) e_i(x) v(x) ], evaluated pseudo-spectrally on the
/// grid. The matrices are never stored: apply() and the fused sums below cost one
/// synthesis/analysis pair. Because the multiplier is a real function, every C_i is
/// symmetric, so C_i^* = C_i on the compression.
class CoefficientOperators {
public:
    CoefficientOperators() = default;

    /// Linearization along a simulated reference ensemble and control.
    CoefficientOperators(const Problem& problem, SharedEnsemble xbar, ControlField ubar, std::size_t couplings)
        : problem_(std::make_shared<Problem>(problem)), xbar_(std::move(xbar)), ubar_(std::move(ubar)),
          couplings_(couplings) {
        if (!xbar_) throw PreconditionError("coefficient operators need a reference ensemble");
        if (xbar_->modes() != problem.K() || xbar_->steps() != problem.steps())
            throw DimensionError("reference ensemble does not match the model grid");
        problem.check_control(ubar_);
        check_couplings();
        zero_ = problem.spec().s1 == 0.0;
    }

    /// C = 0 with the given coupling count (drift derivatives still come from the model).
    static CoefficientOperators zero(const Problem& problem, std::size_t couplings) {
        CoefficientOperators out;
        out.problem_ = std::make_shared<Problem>(problem);
        out.couplings_ = couplings;
        out.zero_ = true;
        out.check_couplings();
        return out;
    }

    /// Deterministic multiplier m(x), the same for every path and step.
    static CoefficientOperators from_multiplier(const Problem& problem, GridVector multiplier, std::size_t couplings) {
        if (static_cast<std::size_t>(multiplier.size()) != problem.n_x())
            throw DimensionError("multiplier field does not match the grid");
        CoefficientOperators out;
        out.problem_ = std::make_shared<Problem>(problem);
        out.couplings_ = couplings;
        out.zero_ = multiplier.isZero(0.0);
        out.multiplier_ = std::move(multiplier);
        out.check_couplings();
        return out;
    }

    const Problem& problem() const { return *problem_; }
    std::size_t couplings() const noexcept { return couplings_; }
    bool is_zero() const noexcept { return zero_; }
    double drift_r() const { return problem_->spec().drift_dr(); }
    double drift_u() const { return problem_->spec().drift_du(); }

    /// d_r sigma on the grid at (path, step).
    GridVector sigma_r(std::size_t path, std::size_t step) const {
        const auto& basis = problem_->basis();
        if (zero_) return GridVector::Zero(static_cast<Eigen::Index>(basis.grid_size()));
        if (multiplier_) return *multiplier_;
        const GridVector r = basis.to_grid(xbar_->state(path, step));
        const auto& spec = problem_->spec();
        return r.unaryExpr([&](double v) { return spec.sigma_dr(v); });
    }

    /// d_u sigma on the grid (constant for the coefficient family).
    GridVector sigma_u() const {
        return GridVector::Constant(static_cast<Eigen::Index>(problem_->n_x()), problem_->spec().sigma_du());
    }

    /// C_i v for the 0-based direction i.
    ModeVector apply(std::size_t i, std::size_t path, std::size_t step, const Eigen::Ref<const ModeVector>& v) const {
        const auto& basis = problem_->basis();
        if (i >= basis.table_modes()) throw DimensionError("coupling direction exceeds the basis table");
        const GridVector g = sigma_r(path, step).cwiseProduct(basis.table().col(static_cast<Eigen::Index>(i)))
                                 .cwiseProduct(basis.to_grid(v));
        return basis.to_modes(g, static_cast<std::size_t>(v.size()));
    }

    /// K x K compression of C_i.
    OperatorMatrix matrix(std::size_t i, std::size_t path, std::size_t step) const {
        const auto& basis = problem_->basis();
        const auto K = static_cast<Eigen::Index>(problem_->K());
        const GridVector w = sigma_r(path, step).cwiseProduct(basis.table().col(static_cast<Eigen::Index>(i)));
        const auto E = basis.table().leftCols(K);
        return basis.cell() * E.transpose() * w.asDiagonal() * E;
    }

    /// sum_{i < count} C_i v dbeta^i given dW(x) = sum_{i < count} dbeta^i e_i(x) on the grid.
    ModeVector noise_apply(std::size_t path, std::size_t step, const Eigen::Ref<const ModeVector>& v,
                           const Eigen::Ref<const GridVector>& dW) const {
        if (zero_) return ModeVector::Zero(v.size());
        const auto& basis = problem_->basis();
        const GridVector g = sigma_r(path, step).cwiseProduct(basis.to_grid(v)).cwiseProduct(dW);
        return basis.to_modes(g, static_cast<std::size_t>(v.size()));
    }

    /// sum_{i < count} C_i^* Q e_i for a K x M' slice Q (count <= M').
    ModeVector adjoint_sum(std::size_t path, std::size_t step, const Eigen::Ref<const OperatorMatrix>& Q,
                           std::size_t count) const {
        if (zero_ || count == 0) return ModeVector::Zero(Q.rows());
        if (count > static_cast<std::size_t>(Q.cols())) throw DimensionError("adjoint_sum: count exceeds Q columns");
        const auto& basis = problem_->basis();
        const auto n = static_cast<Eigen::Index>(count);
        const Eigen::MatrixXd grid_cols = basis.table().leftCols(Q.rows()) * Q.leftCols(n);
        const GridVector diag = (grid_cols.array() * basis.table().leftCols(n).array()).rowwise().sum();
        return basis.to_modes(sigma_r(path, step).cwiseProduct(diag), static_cast<std::size_t>(Q.rows()));
    }

    /// Upper bound sup|d_r sigma| * sup|e_i| for opnorm(C_i).
    double opnorm_bound() const {
        if (zero_) return 0.0;
        const double sup = multiplier_ ? multiplier_->cwiseAbs().maxCoeff() : problem_->spec().sigma_dr_sup();
        return sup * std::numbers::sqrt2;
    }

private:
    void check_couplings() const {
        if (couplings_ > problem_->basis().table_modes())
            throw DimensionError("coupling count exceeds the noise truncation");
    }

    std::shared_ptr<const Problem> problem_;
    SharedEnsemble xbar_;
    ControlField ubar_;
    std::size_t couplings_ = 0;
    bool zero_ = false;
    std::optional<GridVector> multiplier_;
};

}  // namespace smpheat
