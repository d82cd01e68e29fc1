#pragma once

// The concrete detector models on truncated Fock space: photon counting
// (each outcome m removes m photons), the quantum counter (each outcome m
// adds m photons with negative-binomial statistics), the photon number
// observable, and a quadrature discretization of the Poisson-kernel
// intensity observable.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qinstr/errors.hpp"
#include "qinstr/instrument.hpp"
#include "qinstr/operator_core.hpp"
#include "qinstr/povm.hpp"

namespace qinstr {

inline double log_binomial(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
           std::lgamma(static_cast<double>(n - k + 1));
}

// Probability that m of n photons are counted in one interval:
// C(n,m) (1-e^{-lt})^m (e^{-lt})^{n-m}. Evaluated in log space; the
// log1p/expm1 pair keeps the m = n and m = 0 extremes accurate when e^{-lt}
// is tiny, which the delta-limit checks rely on.
inline double p_pc(std::int64_t m, std::int64_t n, double lambda_t) {
    if (lambda_t <= 0) throw InvalidParams("p_pc: lambda_t must be positive");
    if (m < 0 || n < 0 || m > n) return 0.0;
    const double log_beta = std::log1p(-std::exp(-lambda_t)); // log(1 - e^{-lt})
    return std::exp(log_binomial(n, m) + static_cast<double>(m) * log_beta -
                    lambda_t * static_cast<double>(n - m));
}

// Probability that the counter fires m times given n photons present:
// C(n+m,m) (e^{lt}-1)^m e^{-lt(n+m+1)}, a negative binomial in m.
inline double p_qc(std::int64_t m, std::int64_t n, double lambda_t) {
    if (lambda_t <= 0) throw InvalidParams("p_qc: lambda_t must be positive");
    if (m < 0 || n < 0) return 0.0;
    const double log_alpha = std::log(std::expm1(lambda_t));
    return std::exp(log_binomial(n + m, m) + static_cast<double>(m) * log_alpha -
                    lambda_t * static_cast<double>(n + m + 1));
}

// k-fold counting statistics collapse to a single interval of length k:
// p_k(m|n) = C(n,m) (1-e^{-lt k})^m (e^{-lt k})^{n-m}.
inline double p_pc_k(std::int64_t m, std::int64_t n, double lambda_t, int k) {
    if (k < 1) throw InvalidParams("p_pc_k: k must be positive");
    return p_pc(m, n, lambda_t * static_cast<double>(k));
}

// Counter statistics at definite intensity x: Poisson with mean (e^{lt}-1)x.
inline double p_qc_intensity(std::int64_t m, double x, double lambda_t) {
    if (lambda_t <= 0) throw InvalidParams("p_qc_intensity: lambda_t must be positive");
    if (x < 0) throw InvalidParams("p_qc_intensity: x must be nonnegative");
    if (m < 0) return 0.0;
    const double mean = std::expm1(lambda_t) * x;
    if (mean == 0) return m == 0 ? 1.0 : 0.0;
    return std::exp(static_cast<double>(m) * std::log(mean) - mean -
                    std::lgamma(static_cast<double>(m + 1)));
}

struct QuadratureGrid {
    Eigen::VectorXd nodes;   // strictly increasing, in (a, b)
    Eigen::VectorXd weights; // positive
};

// Gauss-Legendre nodes and weights on [a, b] via Newton iteration on the
// Legendre recurrence.
inline QuadratureGrid gauss_legendre(int n, double a, double b) {
    if (n < 1 || !(b > a)) throw InvalidParams("gauss_legendre: need n >= 1 and b > a");
    Eigen::VectorXd x(n), w(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    QuadratureGrid grid;
    grid.nodes = (0.5 * (b - a) * x.array() + 0.5 * (a + b)).matrix();
    grid.weights = (0.5 * (b - a) * w.array()).matrix();
    return grid;
}

// Default discretization of the intensity observable: the integrand
// e^{-x} x^n is smooth and its tail beyond max(40, 5 cutoff) is below 1e-10
// for the supported cutoffs.
inline QuadratureGrid default_x_grid(int cutoff) {
    return gauss_legendre(64, 0.0, std::max(40.0, 5.0 * cutoff));
}

struct ModelParams {
    double lambda_t = 0;
    int cutoff = 0;
    int m_max = 0;
    QuadratureGrid grid;

    void validate() const {
        if (!(lambda_t > 0)) throw InvalidParams("ModelParams: lambda_t must be positive");
        if (cutoff < 0) throw InvalidParams("ModelParams: cutoff must be nonnegative");
        if (m_max < 0) throw InvalidParams("ModelParams: m_max must be nonnegative");
        for (Eigen::Index i = 0; i < grid.nodes.size(); ++i) {
            if (!(grid.weights[i] > 0)) throw InvalidParams("ModelParams: grid weights must be positive");
            if (!(grid.nodes[i] > 0) || (i > 0 && !(grid.nodes[i] > grid.nodes[i - 1]))) {
                throw InvalidParams("ModelParams: grid nodes must be strictly increasing and positive");
            }
        }
    }
};

// Counting m photons removes them: M_m = sum_n sqrt(p_pc(m|n+m)) |n><n+m|.
// Counting never raises photon number, so the truncation to {0..cutoff} is
// exact and the Kraus family is normalized to machine precision.
inline Instrument<double> photon_counting_instrument(double lambda_t, int cutoff) {
    if (cutoff < 0) throw InvalidParams("photon_counting_instrument: cutoff must be nonnegative");
    const Eigen::Index dim = cutoff + 1;
    std::vector<std::vector<MatrixC<double>>> kraus;
    for (std::int64_t m = 0; m <= cutoff; ++m) {
        MatrixC<double> op = MatrixC<double>::Zero(dim, dim);
        for (std::int64_t n = 0; n + m <= cutoff; ++n) {
            op(n, n + m) = std::sqrt(p_pc(m, n + m, lambda_t));
        }
        kraus.push_back({std::move(op)});
    }
    return Instrument<double>(OutcomeSpace::integers(cutoff + 1), std::move(kraus));
}

// The counter adds the m photons it reports: M_m |n> = sqrt(p_qc(m|n)) |n+m>
// on a Fock space of dimension cutoff + m_max + 1, so states supported on
// {0..cutoff} evolve without truncation loss for m <= m_max. The leftover
// weight goes to a diagonal `overflow` Kraus that restores exact
// normalization.
inline Instrument<double> quantum_counter_instrument(double lambda_t, int cutoff, int m_max) {
    if (cutoff < 0 || m_max < 0) {
        throw InvalidParams("quantum_counter_instrument: cutoff and m_max must be nonnegative");
    }
    const Eigen::Index dim = cutoff + m_max + 1;
    std::vector<Label> labels;
    std::vector<std::vector<MatrixC<double>>> kraus;
    Eigen::VectorXd covered = Eigen::VectorXd::Zero(dim);
    for (std::int64_t m = 0; m <= m_max; ++m) {
        MatrixC<double> op = MatrixC<double>::Zero(dim, dim);
        for (std::int64_t n = 0; n + m < dim; ++n) {
            const double p = p_qc(m, n, lambda_t);
            op(n + m, n) = std::sqrt(p);
            covered[n] += p;
        }
        labels.push_back(atom_label(m));
        kraus.push_back({std::move(op)});
    }
    MatrixC<double> ov = MatrixC<double>::Zero(dim, dim);
    for (Eigen::Index n = 0; n < dim; ++n) {
        ov(n, n) = std::sqrt(std::max(1.0 - covered[n], 0.0));
    }
    labels.push_back(atom_label(std::string("overflow")));
    kraus.push_back({std::move(ov)});
    return Instrument<double>(OutcomeSpace(std::move(labels)), std::move(kraus));
}

// Photon number observable: rank-one projectors |n><n|, n = 0..cutoff.
inline Povm<double> number_povm(int cutoff) {
    const Eigen::Index dim = cutoff + 1;
    std::vector<MatrixC<double>> effects;
    for (Eigen::Index n = 0; n < dim; ++n) effects.push_back(dyad<double>(dim, n, n));
    return Povm<double>(OutcomeSpace::integers(dim), std::move(effects));
}

// Poisson-kernel density operator F_x = sum_n e^{-x} x^n / n! |n><n|,
// truncated at the cutoff.
inline MatrixC<double> poisson_effect(double x, int cutoff) {
    if (x < 0) throw InvalidParams("poisson_effect: x must be nonnegative");
    const Eigen::Index dim = cutoff + 1;
    MatrixC<double> f = MatrixC<double>::Zero(dim, dim);
    for (Eigen::Index n = 0; n < dim; ++n) {
        if (x == 0) {
            f(n, n) = (n == 0) ? 1.0 : 0.0;
        } else {
            f(n, n) = std::exp(static_cast<double>(n) * std::log(x) - x -
                               std::lgamma(static_cast<double>(n + 1)));
        }
    }
    return f;
}

// Quadrature shadow of the intensity observable: effect w_j F_{x_j} per
// node plus a `rest` effect absorbing the quadrature defect. If the grid is
// too coarse or short for the cutoff the rest effect dips negative and the
// construction refuses.
inline Povm<double> x_povm(int cutoff, const QuadratureGrid& grid, double tol = kTolPsd) {
    if (grid.nodes.size() == 0) throw InvalidParams("x_povm: empty grid");
    const Eigen::Index dim = cutoff + 1;
    std::vector<Label> labels;
    std::vector<MatrixC<double>> effects;
    MatrixC<double> rest = identity_operator<double>(dim);
    for (Eigen::Index j = 0; j < grid.nodes.size(); ++j) {
        MatrixC<double> eff = grid.weights[j] * poisson_effect(grid.nodes[j], cutoff);
        rest -= eff;
        labels.push_back(atom_label(static_cast<std::int64_t>(j)));
        effects.push_back(std::move(eff));
    }
    for (Eigen::Index n = 0; n < dim; ++n) {
        if (rest(n, n).real() < -tol) {
            throw GridDeficient("x_povm: rest effect entry " + std::to_string(n) + " is " +
                                std::to_string(rest(n, n).real()) + "; grid too coarse for cutoff");
        }
    }
    labels.push_back(atom_label(std::string("rest")));
    effects.push_back(std::move(rest));
    return Povm<double>(OutcomeSpace(std::move(labels)), std::move(effects));
}

} // namespace qinstr
