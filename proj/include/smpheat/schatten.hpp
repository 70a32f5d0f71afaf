#pragma once

// Schatten-von Neumann quantities of finite compressions: an operator is
// represented by the K x M matrix of its action on e_1..e_M expressed in
// e_1..e_K. Every quantity below is that of the compression.

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "smpheat/error.hpp"

namespace smpheat {

using OperatorMatrix = Eigen::MatrixXd;

namespace detail {
inline void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* op) {
    if (!m.allFinite()) throw DomainError(std::string(op) + ": non-finite operator entries");
}
}  // namespace detail

/// <L, M>_2 = sum_i <L e_i, M e_i>.
inline double hs_inner(const Eigen::Ref<const Eigen::MatrixXd>& lhs, const Eigen::Ref<const Eigen::MatrixXd>& rhs) {
    if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols())
        throw DimensionError("hs_inner: shape mismatch");
    return (lhs.array() * rhs.array()).sum();
}

inline double hs_norm(const Eigen::Ref<const Eigen::MatrixXd>& op) { return op.norm(); }

inline Eigen::VectorXd singular_values(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    detail::require_finite(op, "singular_values");
    if (op.size() == 0) return Eigen::VectorXd();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(op);
    return svd.singularValues();
}

/// |L|_1 = sum of singular values.
inline double trace_norm(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    detail::require_finite(op, "trace_norm");
    return singular_values(op).sum();
}

inline double opnorm(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    const Eigen::VectorXd s = singular_values(op);
    return s.size() == 0 ? 0.0 : s(0);
}

/// Singular values below 1e-12 of the largest count as zero.
inline Eigen::Index numerical_rank(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    const Eigen::VectorXd s = singular_values(op);
    if (s.size() == 0 || s(0) == 0.0) return 0;
    return (s.array() > 1e-12 * s(0)).count();
}

inline double trace(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    if (op.rows() != op.cols()) throw DimensionError("trace of a non-square compression");
    detail::require_finite(op, "trace");
    return op.trace();
}

/// Maximizer of <B, L>_2 over |B|_op <= 1: B = sum_n f_n g_n^T from the SVD
/// L = sum_n a_n f_n g_n^T, so that <B, L>_2 = |L|_1.
inline OperatorMatrix trace_norm_dual_maximizer(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    detail::require_finite(op, "trace_norm_dual_maximizer");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(op, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double top = s.size() > 0 ? s(0) : 0.0;
    OperatorMatrix b = OperatorMatrix::Zero(op.rows(), op.cols());
    for (Eigen::Index n = 0; n < s.size(); ++n) {
        if (s(n) <= 1e-12 * top) break;
        b += svd.matrixU().col(n) * svd.matrixV().col(n).transpose();
    }
    return b;
}

/// Dual form sup{<B, L>_2 : |B|_op <= 1}, evaluated at the SVD maximizer.
inline double trace_norm_dual(const Eigen::Ref<const Eigen::MatrixXd>& op) {
    return hs_inner(trace_norm_dual_maximizer(op), op);
}

}  // namespace smpheat
