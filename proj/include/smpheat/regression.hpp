#pragma once

// Cross-sectional least-squares regression used for the conditional expectations of
// the backward sweep.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"

namespace smpheat {

/// Feature map [1, x_1..x_L, x_a x_b (a <= b < P)] of the state of a source ensemble at a step.
/// A basis without source is the constant feature alone.
class FeatureBasis {
public:
    FeatureBasis() = default;

    FeatureBasis(SharedEnsemble source, std::size_t linear, std::size_t product_modes = 4)
        : source_(std::move(source)), linear_(linear), product_(product_modes) {
        if (!source_) throw PreconditionError("feature basis needs a source ensemble");
        if (linear_ > source_->modes()) throw DimensionError("more linear features than source modes");
        if (product_ > linear_) product_ = linear_;
    }

    /// Linear features in every source mode and products of the first four.
    static FeatureBasis standard(SharedEnsemble source) {
        const std::size_t m = source->modes();
        return FeatureBasis(std::move(source), m, 4);
    }

    bool constant_only() const noexcept { return !source_; }
    const SharedEnsemble& source() const noexcept { return source_; }
    std::size_t linear() const noexcept { return linear_; }
    std::size_t product_modes() const noexcept { return product_; }
    std::size_t size() const noexcept { return 1 + linear_ + product_ * (product_ + 1) / 2; }

    void eval(std::size_t path, std::size_t step, double* out) const {
        out[0] = 1.0;
        if (!source_) return;
        const auto x = source_->state(path, step);
        std::size_t c = 1;
        for (std::size_t a = 0; a < linear_; ++a) out[c++] = x(static_cast<Eigen::Index>(a));
        for (std::size_t a = 0; a < product_; ++a)
            for (std::size_t b = a; b < product_; ++b)
                out[c++] = x(static_cast<Eigen::Index>(a)) * x(static_cast<Eigen::Index>(b));
    }

    Eigen::VectorXd eval(std::size_t path, std::size_t step) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
        eval(path, step, out.data());
        return out;
    }

private:
    SharedEnsemble source_;
    std::size_t linear_ = 0;
    std::size_t product_ = 0;
};

/// Least-squares fit of several targets on one design matrix. Columns with no
/// cross-sectional variation are dropped, the rest standardized; a ridge of
/// 1e-8 trace(G) is added when the Gram matrix condition number exceeds 1e10.
/// Coefficients are returned for the raw features, so prediction is coef^T phi.
class LeastSquares {
public:
    explicit LeastSquares(const Eigen::MatrixXd& design) : features_(design.cols()) {
        const Eigen::Index n = design.rows();
        if (n == 0) throw DimensionError("regression with no samples");
        mean_ = design.colwise().mean().transpose();
        scale_ = Eigen::VectorXd::Zero(features_);
        active_.push_back(0);
        for (Eigen::Index j = 1; j < features_; ++j) {
            const double sd = std::sqrt((design.col(j).array() - mean_(j)).square().sum() / static_cast<double>(n));
            if (sd > 1e-12 * (1.0 + std::abs(mean_(j)))) {
                scale_(j) = sd;
                active_.push_back(j);
            }
        }
        const auto a = static_cast<Eigen::Index>(active_.size());
        z_.resize(n, a);
        z_.col(0).setOnes();
        for (Eigen::Index c = 1; c < a; ++c) {
            const Eigen::Index j = active_[static_cast<std::size_t>(c)];
            z_.col(c) = (design.col(j).array() - mean_(j)) / scale_(j);
        }
        Eigen::MatrixXd gram = z_.transpose() * z_;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        const double lo = std::max(eig.eigenvalues().minCoeff(), 0.0);
        const double hi = eig.eigenvalues().maxCoeff();
        condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        if (condition_ > 1e10) {
            ridged_ = true;
            gram.diagonal().array() += 1e-8 * gram.trace();
        }
        ldlt_.compute(gram);
    }

    double condition() const noexcept { return condition_; }
    bool ridged() const noexcept { return ridged_; }
    std::size_t active() const noexcept { return active_.size(); }

    /// Raw-feature coefficients (features x targets).
    Eigen::MatrixXd solve(const Eigen::MatrixXd& targets) const {
        if (targets.rows() != z_.rows()) throw DimensionError("regression targets have the wrong sample count");
        const Eigen::MatrixXd cz = ldlt_.solve(z_.transpose() * targets);
        Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(features_, targets.cols());
        raw.row(0) = cz.row(0);
        for (std::size_t c = 1; c < active_.size(); ++c) {
            const Eigen::Index j = active_[c];
            raw.row(j) = cz.row(static_cast<Eigen::Index>(c)) / scale_(j);
            raw.row(0) -= cz.row(static_cast<Eigen::Index>(c)) * (mean_(j) / scale_(j));
        }
        return raw;
    }

private:
    Eigen::Index features_;
    Eigen::VectorXd mean_, scale_;
    std::vector<Eigen::Index> active_;
    Eigen::MatrixXd z_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    double condition_ = 1.0;
    bool ridged_ = false;
};

}  // namespace smpheat
