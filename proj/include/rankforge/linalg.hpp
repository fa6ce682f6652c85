#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rankforge/errors.hpp"

namespace rankforge {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Largest absolute difference between a matrix and its transpose.
template <typename Derived>
typename Derived::Scalar asymmetry(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<typename Derived::Scalar>::infinity();
    if (m.size() == 0) return 0;
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

template <typename Derived>
Mat<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
    return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Scalar>
struct JitteredCholesky {
    Eigen::LLT<Mat<Scalar>> llt;
    Scalar jitter = 0;  // absolute amount added to the diagonal
};

/// Cholesky factorization with bounded diagonal repair: on failure, add
/// 1e-10 * mean(diag) and escalate by x10 up to 1e-6 * mean(diag).
template <typename Derived>
JitteredCholesky<typename Derived::Scalar> cholesky_with_jitter(const Eigen::MatrixBase<Derived>& m,
                                                                const std::string& what) {
    using Scalar = typename Derived::Scalar;
    JitteredCholesky<Scalar> out;
    Mat<Scalar> a = m;
    if (!a.allFinite()) throw NumericError(what + ": matrix has non-finite entries");
    out.llt.compute(a);
    if (out.llt.info() == Eigen::Success) return out;

    const Scalar scale = a.diagonal().mean();
    if (!(scale > 0)) throw NumericError(what + ": matrix is not positive definite");
    for (Scalar factor = Scalar(1e-10); factor <= Scalar(1.000001e-6); factor *= 10) {
        out.jitter = factor * scale;
        out.llt.compute(a + out.jitter * Mat<Scalar>::Identity(a.rows(), a.cols()));
        if (out.llt.info() == Eigen::Success) return out;
    }
    throw NumericError(what + ": Cholesky factorization failed after diagonal jitter up to 1e-6*mean(diag)");
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
template <typename Scalar>
Mat<Scalar> spd_inverse(const Eigen::LLT<Mat<Scalar>>& llt) {
    const auto n = llt.matrixLLT().rows();
    return symmetrized(llt.solve(Mat<Scalar>::Identity(n, n)));
}

/// Ratio of extreme eigenvalues of a symmetric matrix; infinity if not positive.
template <typename Derived>
typename Derived::Scalar spd_condition_number(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (m.size() == 0) return Scalar(1);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(m, Eigen::EigenvaluesOnly);
    const Scalar lo = eig.eigenvalues().minCoeff();
    const Scalar hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0)) return std::numeric_limits<Scalar>::infinity();
    return hi / lo;
}

}  // namespace rankforge
