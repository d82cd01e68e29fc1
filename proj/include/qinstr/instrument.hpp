#pragma once

// CP instruments in Kraus form. Heisenberg action I_B(a) = sum_{m in B}
// sum_k K_{m,k}^dagger a K_{m,k}, the induced POVM, Schroedinger branch
// states, and the composition calculus over product outcome spaces.
// Complete positivity is structural: instruments exist only in Kraus form.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qinstr/errors.hpp"
#include "qinstr/operator_core.hpp"
#include "qinstr/outcome_kernel.hpp"
#include "qinstr/povm.hpp"

namespace qinstr {

inline constexpr double kProbFloor = 1e-14;
inline constexpr std::int64_t kExplosionCap = 2'000'000;

template <typename Scalar>
struct Instrument {
    OutcomeSpace space;
    std::vector<std::vector<MatrixC<Scalar>>> kraus; // one nonempty list per label
    Eigen::Index dim;

    Instrument(OutcomeSpace s, std::vector<std::vector<MatrixC<Scalar>>> k, double tol = 1e-9)
        : space(std::move(s)), kraus(std::move(k)), dim(0) {
        if (kraus.empty() || static_cast<Eigen::Index>(kraus.size()) != space.size()) {
            throw SpaceMismatch("Instrument: Kraus list count does not match outcome space");
        }
        if (kraus.front().empty()) throw InvalidParams("Instrument: empty Kraus list");
        dim = kraus.front().front().rows();
        MatrixC<Scalar> total = MatrixC<Scalar>::Zero(dim, dim);
        for (const auto& list : kraus) {
            if (list.empty()) throw InvalidParams("Instrument: empty Kraus list");
            for (const auto& op : list) {
                if (op.rows() != dim || op.cols() != dim) {
                    throw DimMismatch("Instrument: Kraus operators are not square of one dimension");
                }
                total += op.adjoint() * op;
            }
        }
        const double residual =
            static_cast<double>(max_abs_diff(total, identity_operator<Scalar>(dim)));
        if (residual > tol) {
            throw InvalidParams("Instrument: sum K^dagger K misses identity by " +
                                std::to_string(residual));
        }
    }
};

template <typename Scalar>
double instrument_normalization_residual(const Instrument<Scalar>& ins) {
    MatrixC<Scalar> total = MatrixC<Scalar>::Zero(ins.dim, ins.dim);
    for (const auto& list : ins.kraus) {
        for (const auto& op : list) total += op.adjoint() * op;
    }
    return static_cast<double>(max_abs_diff(total, identity_operator<Scalar>(ins.dim)));
}

template <typename Scalar, typename Derived>
MatrixC<Scalar> heisenberg_apply(const Instrument<Scalar>& ins, const std::vector<Label>& subset,
                                 const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != ins.dim || a.cols() != ins.dim) {
        throw DimMismatch("heisenberg_apply: operator dimension does not match instrument");
    }
    MatrixC<Scalar> out = MatrixC<Scalar>::Zero(ins.dim, ins.dim);
    for (const Label& m : subset) {
        for (const auto& op : ins.kraus[static_cast<std::size_t>(ins.space.index(m))]) {
            out += op.adjoint() * a * op;
        }
    }
    return out;
}

template <typename Scalar, typename Derived>
MatrixC<Scalar> heisenberg_apply(const Instrument<Scalar>& ins, const Label& m,
                                 const Eigen::MatrixBase<Derived>& a) {
    return heisenberg_apply(ins, std::vector<Label>{m}, a);
}

template <typename Scalar>
Povm<Scalar> induced_povm(const Instrument<Scalar>& ins) {
    std::vector<MatrixC<Scalar>> effects;
    effects.reserve(ins.kraus.size());
    for (const auto& list : ins.kraus) {
        MatrixC<Scalar> e = MatrixC<Scalar>::Zero(ins.dim, ins.dim);
        for (const auto& op : list) e += op.adjoint() * op;
        effects.push_back(std::move(e));
    }
    return Povm<Scalar>(ins.space, std::move(effects));
}

template <typename Scalar>
struct BranchResult {
    Scalar prob = 0;
    std::optional<DensityState<Scalar>> post; // absent when prob is below the floor
};

// Predual action on states: prob = tr(sum K rho K^dagger), post state is the
// normalized branch. Dual to heisenberg_apply via tr(rho I_m(a)) = prob tr(post a).
template <typename Scalar>
BranchResult<Scalar> schrodinger_branch(const Instrument<Scalar>& ins, const Label& m,
                                        const DensityState<Scalar>& rho) {
    if (rho.dim() != ins.dim) {
        throw DimMismatch("schrodinger_branch: state dimension does not match instrument");
    }
    MatrixC<Scalar> branch = MatrixC<Scalar>::Zero(ins.dim, ins.dim);
    for (const auto& op : ins.kraus[static_cast<std::size_t>(ins.space.index(m))]) {
        branch += op * rho.op * op.adjoint();
    }
    BranchResult<Scalar> out;
    out.prob = std::max(branch.trace().real(), Scalar(0));
    if (out.prob > static_cast<Scalar>(kProbFloor)) {
        out.post.emplace(MatrixC<Scalar>(branch / out.prob));
    }
    return out;
}

// (I1 * I2)_{B1 x B2}(a) = I1_{B1}(I2_{B2}(a)); outcome 1 is measured first,
// so its Kraus factor is applied to the state first and the composite Kraus
// element is K2 K1.
template <typename Scalar>
Instrument<Scalar> compose(const Instrument<Scalar>& i1, const Instrument<Scalar>& i2) {
    if (i1.dim != i2.dim) throw DimMismatch("compose: instrument dimensions differ");
    OutcomeSpace space = product_space(i1.space, i2.space);
    std::vector<std::vector<MatrixC<Scalar>>> kraus;
    kraus.reserve(static_cast<std::size_t>(space.size()));
    for (Eigen::Index m1 = 0; m1 < i1.space.size(); ++m1) {
        for (Eigen::Index m2 = 0; m2 < i2.space.size(); ++m2) {
            const auto& l1 = i1.kraus[static_cast<std::size_t>(m1)];
            const auto& l2 = i2.kraus[static_cast<std::size_t>(m2)];
            std::vector<MatrixC<Scalar>> list;
            list.reserve(l1.size() * l2.size());
            for (const auto& k1 : l1) {
                for (const auto& k2 : l2) {
                    list.push_back(k2 * k1);
                }
            }
            kraus.push_back(std::move(list));
        }
    }
    return Instrument<Scalar>(std::move(space), std::move(kraus));
}

// (I * E)(m, b) = I_m(E(b)): the POVM of measuring the instrument first and
// the POVM afterwards, on the product outcome space.
template <typename Scalar>
Povm<Scalar> compose_povm(const Instrument<Scalar>& ins, const Povm<Scalar>& e) {
    if (ins.dim != e.dim) throw DimMismatch("compose_povm: dimensions differ");
    OutcomeSpace space = product_space(ins.space, e.space);
    std::vector<MatrixC<Scalar>> effects;
    effects.reserve(static_cast<std::size_t>(space.size()));
    for (Eigen::Index m = 0; m < ins.space.size(); ++m) {
        const auto& list = ins.kraus[static_cast<std::size_t>(m)];
        for (Eigen::Index b = 0; b < e.space.size(); ++b) {
            MatrixC<Scalar> eff = MatrixC<Scalar>::Zero(ins.dim, ins.dim);
            for (const auto& op : list) {
                eff += op.adjoint() * e.effects[static_cast<std::size_t>(b)] * op;
            }
            effects.push_back(std::move(eff));
        }
    }
    return Povm<Scalar>(std::move(space), std::move(effects));
}

// Left-folded n-fold composition; labels are flattened n-tuples.
template <typename Scalar>
Instrument<Scalar> n_fold(const Instrument<Scalar>& ins, int n, std::int64_t cap = kExplosionCap) {
    if (n < 1) throw InvalidParams("n_fold: n must be positive");
    double outcomes = 1;
    for (int i = 0; i < n; ++i) outcomes *= static_cast<double>(ins.space.size());
    if (outcomes > static_cast<double>(cap)) {
        throw ExplosionCap("n_fold: " + std::to_string(outcomes) + " product outcomes exceed cap " +
                           std::to_string(cap));
    }
    Instrument<Scalar> out = ins;
    for (int i = 1; i < n; ++i) out = compose(out, ins);
    return out;
}

} // namespace qinstr
