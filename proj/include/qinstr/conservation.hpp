#pragma once

// Conservation of a POVM by an instrument (I*E equivalent to E), finite
// approximants E_n of the infinitely repeated measurement, the Kolmogorov
// consistency residual between successive approximants, and the witness
// kernel chain that exhibits E_n as a post-processing of any conserved POVM.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qinstr/errors.hpp"
#include "qinstr/instrument.hpp"
#include "qinstr/outcome_kernel.hpp"
#include "qinstr/povm.hpp"

namespace qinstr {

template <typename Scalar>
struct ConservationReport {
    bool conserved = false;
    PreorderCertificate<Scalar> cert_forward;  // I*E <= E
    PreorderCertificate<Scalar> cert_backward; // E <= I*E
    Povm<Scalar> composed;                     // I*E
};

// E_n: the POVM of n successive rounds of the instrument applied to I.
template <typename Scalar>
Povm<Scalar> finite_composition(const Instrument<Scalar>& ins, int n,
                                std::int64_t cap = kExplosionCap) {
    return induced_povm(n_fold(ins, n, cap));
}

// Max over outcomes b of || E_n(b) - sum_w E_{n+1}(b, w) ||_max. The spaces
// must be successive powers: every label of e_n1 extended from a label of
// e_n by one more round's worth of atoms.
template <typename Scalar>
double kolmogorov_consistency(const Povm<Scalar>& e_n, const Povm<Scalar>& e_n1) {
    if (e_n.dim != e_n1.dim) throw DimMismatch("kolmogorov_consistency: dimensions differ");
    const std::size_t arity_n = e_n.space.label(0).size();
    const std::size_t arity_n1 = e_n1.space.label(0).size();
    if (arity_n1 <= arity_n) {
        throw SpaceMismatch("kolmogorov_consistency: second POVM does not extend the first");
    }
    std::vector<MatrixC<Scalar>> sums(static_cast<std::size_t>(e_n.space.size()),
                                      MatrixC<Scalar>::Zero(e_n.dim, e_n.dim));
    for (Eigen::Index i = 0; i < e_n1.space.size(); ++i) {
        const Label& full = e_n1.space.label(i);
        if (full.size() != arity_n1) {
            throw SpaceMismatch("kolmogorov_consistency: ragged labels");
        }
        Label prefix(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(arity_n));
        sums[static_cast<std::size_t>(e_n.space.index(prefix))] += e_n1.effects[static_cast<std::size_t>(i)];
    }
    double residual = 0;
    for (Eigen::Index b = 0; b < e_n.space.size(); ++b) {
        residual = std::max(residual,
                            static_cast<double>(max_abs_diff(
                                e_n.effects[static_cast<std::size_t>(b)], sums[static_cast<std::size_t>(b)])));
    }
    return residual;
}

template <typename Scalar>
ConservationReport<Scalar> conservation_check(const Instrument<Scalar>& ins, const Povm<Scalar>& e,
                                              double tol,
                                              const PreorderOptions& opts = PreorderOptions{}) {
    if (ins.dim != e.dim) throw DimMismatch("conservation_check: dimensions differ");
    Povm<Scalar> composed = compose_povm(ins, e);
    ConservationReport<Scalar> report{false, find_post_processing(composed, e, tol, opts),
                                      find_post_processing(e, composed, tol, opts), std::move(composed)};
    report.conserved = report.cert_forward.feasible && report.cert_backward.feasible;
    return report;
}

template <typename Scalar>
struct InvarianceReport {
    bool verdict1 = false;
    bool verdict2 = false;
    bool match = false;
    ConservationReport<Scalar> report1;
    ConservationReport<Scalar> report2;
};

// Conservation is a property of equivalence classes: two equivalent POVMs
// must get the same verdict. Refuses inputs that are not equivalent.
template <typename Scalar>
InvarianceReport<Scalar> conservation_invariance_check(const Instrument<Scalar>& ins,
                                                       const Povm<Scalar>& e1, const Povm<Scalar>& e2,
                                                       double tol,
                                                       const PreorderOptions& opts = PreorderOptions{}) {
    const EquivalenceResult<Scalar> eq = check_equivalent(e1, e2, tol, opts);
    if (!eq.equivalent) {
        throw NotEquivalent("conservation_invariance_check: inputs are not equivalent at tolerance");
    }
    ConservationReport<Scalar> report1 = conservation_check(ins, e1, tol, opts);
    ConservationReport<Scalar> report2 = conservation_check(ins, e2, tol, opts);
    const bool match = report1.conserved == report2.conserved;
    return InvarianceReport<Scalar>{report1.conserved, report2.conserved, match, std::move(report1),
                                    std::move(report2)};
}

template <typename Scalar>
struct WitnessChain {
    int depth = 0;
    std::vector<MarkovKernel<Scalar>> tilde;     // level k: F-space -> Omega^k x F-space
    std::vector<MarkovKernel<Scalar>> marginals; // level k: F-space -> Omega^k
    std::vector<double> residuals;               // || sum_x tilde^k_x F(x) - (I^{*k} * F) ||_max
    std::vector<double> marginal_residuals;      // || sum_x nu^k_x F(x) - E_k ||_max
};

struct WitnessOptions {
    int max_depth = 4;
    Eigen::Index max_omega = 12;
    PreorderOptions preorder;
    std::function<void(int)> progress; // called with each completed level
};

namespace detail {

// Rebuilds a kernel's target space as product(power, x_space) so the
// marginalization sees (Omega^k, Omega_X) factors; label lists are already
// identical thanks to left-associative flattening.
template <typename Scalar>
MarkovKernel<Scalar> rewrap_target(const MarkovKernel<Scalar>& nu, const OutcomeSpace& power,
                                   const OutcomeSpace& x_space) {
    OutcomeSpace target = product_space(power, x_space);
    if (target.labels() != nu.target().labels()) {
        throw SpaceMismatch("rewrap_target: label order mismatch");
    }
    return MarkovKernel<Scalar>(nu.source(), std::move(target), nu.rows());
}

} // namespace detail

// Builds the witness kernels tilde^1..tilde^n from the conservation
// certificate of I*F <= F and verifies at every level that post-processing
// F through tilde^k reproduces I^{*k} * F, and through the marginal nu^k
// reproduces E_k. Residual tolerances compound linearly with depth.
template <typename Scalar>
WitnessChain<Scalar> minimality_witness(const Instrument<Scalar>& ins, const Povm<Scalar>& f, int n,
                                        double tol, const WitnessOptions& opts = WitnessOptions{}) {
    if (n < 1 || n > opts.max_depth) {
        throw ExplosionCap("minimality_witness: depth " + std::to_string(n) + " outside 1.." +
                           std::to_string(opts.max_depth));
    }
    if (ins.space.size() > opts.max_omega) {
        throw ExplosionCap("minimality_witness: outcome space larger than cap " +
                           std::to_string(opts.max_omega));
    }
    ConservationReport<Scalar> report = conservation_check(ins, f, tol, opts.preorder);
    if (!report.conserved) {
        throw NotConserved("minimality_witness: the POVM is not conserved by the instrument");
    }

    WitnessChain<Scalar> chain;
    chain.depth = n;
    const MarkovKernel<Scalar>& nu1 = *report.cert_forward.kernel; // F-space -> Omega x F-space

    OutcomeSpace power = ins.space;                 // Omega^k as k grows
    Povm<Scalar> composed_k = report.composed;      // I^{*k} * F, grown by composing in front
    MarkovKernel<Scalar> tilde = detail::rewrap_target(nu1, power, f.space);

    for (int k = 1; k <= n; ++k) {
        if (k > 1) {
            // tilde^{k}_x(B) = sum_{(w, x')} tilde^1_{x'}(B restricted at w) tilde^{k-1}_x(w, x'):
            // extend tilde^1 by Omega^{k-1} and compose.
            MarkovKernel<Scalar> step = compose_kernels(extend_kernel(nu1, power), tilde);
            power = product_space(power, ins.space);
            tilde = detail::rewrap_target(step, power, f.space);
            // I^{*k} * F = I * (I^{*(k-1)} * F), new round measured first; the
            // product labels flatten to the same [w_1..w_k, x] order. The
            // composed POVM's space also needs the (Omega^k, Omega_X) wrap.
            Povm<Scalar> grown = compose_povm(ins, composed_k);
            OutcomeSpace wrapped = product_space(power, f.space);
            if (wrapped.labels() != grown.space.labels()) {
                throw SpaceMismatch("minimality_witness: composition label order mismatch");
            }
            composed_k = Povm<Scalar>(std::move(wrapped), std::move(grown.effects));
        }

        const Povm<Scalar> reproduced = post_process(f, tilde);
        double residual = 0;
        for (Eigen::Index i = 0; i < reproduced.space.size(); ++i) {
            residual = std::max(residual, static_cast<double>(max_abs_diff(
                                              reproduced.effects[static_cast<std::size_t>(i)],
                                              composed_k.effects[static_cast<std::size_t>(i)])));
        }

        MarkovKernel<Scalar> marginal = marginal_kernel(tilde, KeepFactor::First);
        const Povm<Scalar> reproduced_ek = post_process(f, marginal);
        // E_k is the x-marginal of I^{*k} * F (measuring F after the k rounds
        // and forgetting its outcome changes nothing).
        const std::size_t keep = power.label(0).size();
        const Povm<Scalar> e_k = coarse_grain(composed_k, [keep](const Label& l) {
            return Label(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(keep));
        });
        double marginal_residual = 0;
        for (Eigen::Index i = 0; i < e_k.space.size(); ++i) {
            marginal_residual = std::max(
                marginal_residual,
                static_cast<double>(max_abs_diff(reproduced_ek.effects[static_cast<std::size_t>(i)],
                                                 e_k.effects[static_cast<std::size_t>(i)])));
        }

        chain.tilde.push_back(tilde);
        chain.marginals.push_back(std::move(marginal));
        chain.residuals.push_back(residual);
        chain.marginal_residuals.push_back(marginal_residual);
        if (opts.progress) opts.progress(k);
    }
    return chain;
}

} // namespace qinstr
