#pragma once

// Deterministic random fixtures shared by the test binaries. Everything is
// seeded explicitly so failures replay exactly.

#include <cstdint>
#include <utility>
#include <vector>

#include "qinstr/instrument.hpp"
#include "qinstr/operator_core.hpp"
#include "qinstr/outcome_kernel.hpp"
#include "qinstr/povm.hpp"
#include "qinstr/rng.hpp"

namespace qinstr::testing {

inline MatrixC<double> random_complex(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    MatrixC<double> g(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            g(r, c) = std::complex<double>(rng.gauss(), rng.gauss());
        }
    }
    return g;
}

inline MatrixC<double> inv_sqrt_psd(const MatrixC<double>& s) {
    const HermitianEigen<double> eig = hermitian_eigen(s);
    VectorR<double> inv(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < inv.size(); ++i) {
        inv[i] = 1.0 / std::sqrt(eig.eigenvalues[i]);
    }
    return eig.eigenvectors * inv.asDiagonal() * eig.eigenvectors.adjoint();
}

// Random instrument: Gaussian Kraus pieces whitened by the inverse square
// root of their normalization sum, so sum K^dagger K = I holds to machine
// precision. Generic position: effects are full rank almost surely.
inline Instrument<double> random_instrument(Eigen::Index dim, Eigen::Index n_outcomes,
                                            int kraus_per_outcome, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<MatrixC<double>>> kraus(static_cast<std::size_t>(n_outcomes));
    MatrixC<double> s = MatrixC<double>::Zero(dim, dim);
    for (auto& list : kraus) {
        for (int j = 0; j < kraus_per_outcome; ++j) {
            list.push_back(random_complex(rng, dim, dim));
            s += list.back().adjoint() * list.back();
        }
    }
    const MatrixC<double> w = inv_sqrt_psd(s);
    for (auto& list : kraus) {
        for (auto& k : list) k = k * w;
    }
    return Instrument<double>(OutcomeSpace::integers(n_outcomes), std::move(kraus));
}

inline Povm<double> random_povm(Eigen::Index dim, Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<MatrixC<double>> effects;
    effects.reserve(static_cast<std::size_t>(n));
    MatrixC<double> s = MatrixC<double>::Zero(dim, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        const MatrixC<double> g = random_complex(rng, dim, dim);
        effects.push_back(g * g.adjoint());
        s += effects.back();
    }
    const MatrixC<double> w = inv_sqrt_psd(s);
    for (auto& e : effects) e = w * e * w;
    return Povm<double>(OutcomeSpace::integers(n), std::move(effects));
}

inline MarkovKernel<double> random_kernel(const OutcomeSpace& source, const OutcomeSpace& target,
                                          std::uint64_t seed) {
    Rng rng(seed);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> rows(source.size(), target.size());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        double sum = 0;
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            rows(i, j) = -std::log(1.0 - rng.uniform());
            sum += rows(i, j);
        }
        rows.row(i) /= sum;
    }
    return MarkovKernel<double>(source, target, std::move(rows));
}

inline DensityState<double> random_density(Eigen::Index dim, std::uint64_t seed) {
    Rng rng(seed);
    const MatrixC<double> g = random_complex(rng, dim, dim);
    MatrixC<double> rho = g * g.adjoint();
    rho /= rho.trace().real();
    return DensityState<double>(std::move(rho));
}

} // namespace qinstr::testing
