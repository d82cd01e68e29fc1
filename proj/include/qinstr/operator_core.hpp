#pragma once

// Dense complex operators on finite-dimensional Hilbert spaces: adjoints,
// Hermitian eigendecomposition, positivity and normalization checks.
// Everything else in the library is built on top of these primitives.

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "qinstr/errors.hpp"

namespace qinstr {

template <typename Scalar>
using MatrixC = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorR = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Default tolerances, relative to the max-abs scale of the operand.
inline constexpr double kTolHerm = 1e-9;
inline constexpr double kTolPsd = 1e-9;
inline constexpr double kTolTrace = 1e-9;

template <typename Derived>
auto adjoint(const Eigen::MatrixBase<Derived>& a) {
    return a.adjoint().eval();
}

// Largest entrywise |a_ij|; the uniform norm used by every tolerance contract.
template <typename Derived>
auto max_abs(const Eigen::MatrixBase<Derived>& a) {
    using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
    if (a.size() == 0) return Real(0);
    return a.cwiseAbs().maxCoeff();
}

template <typename DerivedA, typename DerivedB>
auto max_abs_diff(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimMismatch("max_abs_diff: shapes " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
    }
    return max_abs(a - b);
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double tol = kTolHerm) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, static_cast<double>(max_abs(a)));
    return static_cast<double>(max_abs(a - a.adjoint())) <= tol * scale;
}

template <typename Scalar>
struct HermitianEigen {
    VectorR<Scalar> eigenvalues; // ascending
    MatrixC<Scalar> eigenvectors; // columns, orthonormal
};

// Eigendecomposition of a Hermitian operator. The input must be Hermitian
// within tol_herm (relative to its max-abs scale); the strictly Hermitian
// part (a + a^dagger)/2 is what gets decomposed, so float dust on the input
// cannot leak asymmetry into the result.
template <typename Derived>
auto hermitian_eigen(const Eigen::MatrixBase<Derived>& a, double tol_herm = kTolHerm) {
    using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
    if (a.rows() != a.cols()) {
        throw DimMismatch("hermitian_eigen: matrix is " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()));
    }
    if (!is_hermitian(a, tol_herm)) {
        throw NotHermitian("hermitian_eigen: deviation " +
                           std::to_string(static_cast<double>(max_abs(a - a.adjoint()))) +
                           " exceeds tolerance");
    }
    MatrixC<Real> sym = ((a + a.adjoint()) / Real(2)).eval().template cast<std::complex<Real>>();
    Eigen::SelfAdjointEigenSolver<MatrixC<Real>> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw Error("hermitian_eigen: eigensolver failed to converge");
    }
    return HermitianEigen<Real>{solver.eigenvalues(), solver.eigenvectors()};
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a, double tol = kTolPsd) {
    auto eig = hermitian_eigen(a, tol);
    const double scale = std::max(1.0, static_cast<double>(max_abs(a)));
    return static_cast<double>(eig.eigenvalues.minCoeff()) >= -tol * scale;
}

// Positive-semidefinite square root via eigendecomposition; negative dust
// eigenvalues within tol are clamped to zero, anything worse throws.
template <typename Derived>
auto psd_sqrt(const Eigen::MatrixBase<Derived>& a, double tol = kTolPsd) {
    using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
    auto eig = hermitian_eigen(a, tol);
    const double scale = std::max(1.0, static_cast<double>(max_abs(a)));
    VectorR<Real> roots(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        Real lambda = eig.eigenvalues[i];
        if (lambda < -tol * scale) {
            throw InvalidParams("psd_sqrt: eigenvalue " + std::to_string(static_cast<double>(lambda)) +
                                " is negative beyond tolerance");
        }
        roots[i] = lambda > Real(0) ? std::sqrt(lambda) : Real(0);
    }
    return MatrixC<Real>(eig.eigenvectors * roots.asDiagonal() *
                         eig.eigenvectors.adjoint());
}

// A state in the Schroedinger picture: Hermitian, PSD, unit trace.
template <typename Scalar>
struct DensityState {
    MatrixC<Scalar> op;

    explicit DensityState(MatrixC<Scalar> matrix, double tol_herm = kTolHerm,
                          double tol_psd = kTolPsd, double tol_trace = kTolTrace)
        : op(std::move(matrix)) {
        if (op.rows() != op.cols()) {
            throw DimMismatch("DensityState: matrix is not square");
        }
        if (!op.allFinite()) {
            throw InvalidParams("DensityState: non-finite entries");
        }
        if (!is_hermitian(op, tol_herm)) {
            throw NotHermitian("DensityState: not Hermitian within tolerance");
        }
        if (!is_psd(op, tol_psd)) {
            throw InvalidParams("DensityState: negative eigenvalue beyond tolerance");
        }
        const double tr = op.trace().real();
        if (std::abs(tr - 1.0) > tol_trace) {
            throw InvalidParams("DensityState: trace " + std::to_string(tr) + " is not 1");
        }
    }

    Eigen::Index dim() const { return op.rows(); }
};

template <typename Scalar>
MatrixC<Scalar> identity_operator(Eigen::Index dim) {
    return MatrixC<Scalar>::Identity(dim, dim);
}

// |ket><bra| on a dim-dimensional space, both indices zero-based.
template <typename Scalar>
MatrixC<Scalar> dyad(Eigen::Index dim, Eigen::Index ket, Eigen::Index bra) {
    MatrixC<Scalar> m = MatrixC<Scalar>::Zero(dim, dim);
    m(ket, bra) = std::complex<Scalar>(1, 0);
    return m;
}

} // namespace qinstr
