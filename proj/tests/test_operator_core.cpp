#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "qinstr/operator_core.hpp"
#include "support.hpp"

using namespace qinstr;
using Complex = std::complex<double>;

TEST_CASE("pauli x eigensystem") {
    MatrixC<double> x(2, 2);
    x << Complex(0), Complex(1), Complex(1), Complex(0);
    const HermitianEigen<double> eig = hermitian_eigen(x);
    CHECK(eig.eigenvalues[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(eig.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
    const MatrixC<double> reconstructed =
        eig.eigenvectors * eig.eigenvalues.cast<Complex>().asDiagonal() * eig.eigenvectors.adjoint();
    CHECK(max_abs_diff(reconstructed, x) < 1e-12);
    const MatrixC<double> gram = eig.eigenvectors.adjoint() * eig.eigenvectors;
    CHECK(max_abs_diff(gram, identity_operator<double>(2)) < 1e-12);
}

TEST_CASE("random hermitian reconstruction, ascending eigenvalues") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index dim = 2 + trial % 5;
        const MatrixC<double> g = testing::random_complex(rng, dim, dim);
        const MatrixC<double> h = g + g.adjoint();
        const HermitianEigen<double> eig = hermitian_eigen(h);
        for (Eigen::Index i = 1; i < dim; ++i) {
            CHECK(eig.eigenvalues[i] >= eig.eigenvalues[i - 1]);
        }
        const MatrixC<double> back =
            eig.eigenvectors * eig.eigenvalues.cast<Complex>().asDiagonal() * eig.eigenvectors.adjoint();
        CHECK(max_abs_diff(back, h) < 1e-10);
    }
}

TEST_CASE("hermiticity checks") {
    MatrixC<double> a(2, 2);
    a << Complex(1), Complex(0, 1), Complex(0, -1), Complex(2);
    CHECK(is_hermitian(a));
    a(0, 1) = Complex(0, 1.5);
    CHECK(!is_hermitian(a));
    CHECK_THROWS_AS(hermitian_eigen(a), NotHermitian);
    CHECK_THROWS_AS(DensityState<double>{a}, NotHermitian);
}

TEST_CASE("psd checks and square root") {
    MatrixC<double> d = MatrixC<double>::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -1e-6;
    CHECK(!is_psd(d));
    d(1, 1) = -1e-12;
    CHECK(is_psd(d));

    Rng rng(42);
    const MatrixC<double> g = testing::random_complex(rng, 4, 4);
    const MatrixC<double> psd = g * g.adjoint();
    const MatrixC<double> root = psd_sqrt(psd);
    CHECK(max_abs_diff(root * root, psd) < 1e-10);
    CHECK(is_hermitian(root));
    CHECK(is_psd(root));

    MatrixC<double> neg = MatrixC<double>::Zero(2, 2);
    neg(0, 0) = 1.0;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(psd_sqrt(neg), InvalidParams);
}

TEST_CASE("density state validation") {
    MatrixC<double> ok = MatrixC<double>::Zero(2, 2);
    ok(0, 0) = 0.5;
    ok(1, 1) = 0.5;
    const DensityState<double> rho(ok);
    CHECK(rho.dim() == 2);

    MatrixC<double> bad_trace = ok;
    bad_trace(0, 0) = 0.6;
    CHECK_THROWS_AS(DensityState<double>{bad_trace}, InvalidParams);

    MatrixC<double> not_psd = MatrixC<double>::Zero(2, 2);
    not_psd(0, 0) = 1.5;
    not_psd(1, 1) = -0.5;
    CHECK_THROWS_AS(DensityState<double>{not_psd}, InvalidParams);

    MatrixC<double> rect(2, 3);
    rect.setZero();
    CHECK_THROWS_AS(DensityState<double>{rect}, DimMismatch);
}

TEST_CASE("shape mismatch and helpers") {
    const MatrixC<double> a = MatrixC<double>::Zero(2, 2);
    const MatrixC<double> b = MatrixC<double>::Zero(3, 3);
    CHECK_THROWS_AS(max_abs_diff(a, b), DimMismatch);

    const MatrixC<double> d = dyad<double>(3, 1, 2);
    CHECK(d(1, 2) == Complex(1));
    CHECK(max_abs(d) == 1.0);
    CHECK(identity_operator<double>(3).trace().real() == doctest::Approx(3.0));
}
