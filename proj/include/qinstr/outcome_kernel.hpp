#pragma once

// Finite outcome spaces with tuple labels, product spaces, and Markov
// kernels (row-stochastic matrices) with composition, extension to a
// product space, and marginalization.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qinstr/errors.hpp"

namespace qinstr {

using Atom = std::variant<std::int64_t, std::string>;

// A label is a flattened tuple of atoms. Scalar labels are 1-tuples.
// Flattening is left-associative, so (A x B) x C and A x (B x C) produce
// literally identical label lists and associativity of products holds as
// plain equality.
using Label = std::vector<Atom>;

inline Label atom_label(std::int64_t v) { return Label{Atom{v}}; }
inline Label atom_label(std::string v) { return Label{Atom{std::move(v)}}; }

inline std::string to_string(const Atom& a) {
    if (std::holds_alternative<std::int64_t>(a)) return std::to_string(std::get<std::int64_t>(a));
    return std::get<std::string>(a);
}

inline std::string to_string(const Label& label) {
    if (label.size() == 1) return to_string(label[0]);
    std::string out = "(";
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (i) out += ",";
        out += to_string(label[i]);
    }
    out += ")";
    return out;
}

class OutcomeSpace {
public:
    explicit OutcomeSpace(std::vector<Label> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw InvalidParams("OutcomeSpace: no labels");
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].empty()) throw InvalidParams("OutcomeSpace: empty label");
            auto [it, inserted] = index_.emplace(labels_[i], static_cast<Eigen::Index>(i));
            if (!inserted) {
                throw InvalidParams("OutcomeSpace: duplicate label " + to_string(labels_[i]));
            }
        }
    }

    // {0, 1, ..., n-1} with integer atoms.
    static OutcomeSpace integers(std::int64_t n) {
        std::vector<Label> labels;
        labels.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) labels.push_back(atom_label(i));
        return OutcomeSpace(std::move(labels));
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(labels_.size()); }
    const Label& label(Eigen::Index i) const { return labels_.at(static_cast<std::size_t>(i)); }
    const std::vector<Label>& labels() const { return labels_; }

    bool has(const Label& l) const { return index_.count(l) > 0; }

    Eigen::Index index(const Label& l) const {
        auto it = index_.find(l);
        if (it == index_.end()) throw UnknownLabel("OutcomeSpace: unknown label " + to_string(l));
        return it->second;
    }

    bool operator==(const OutcomeSpace& other) const { return labels_ == other.labels_; }
    bool operator!=(const OutcomeSpace& other) const { return !(*this == other); }

    // Set only by product_space; lets marginal_kernel recover the factors.
    const std::shared_ptr<const OutcomeSpace>& factor_first() const { return factor_first_; }
    const std::shared_ptr<const OutcomeSpace>& factor_second() const { return factor_second_; }
    bool is_product() const { return factor_first_ != nullptr; }

    friend OutcomeSpace product_space(const OutcomeSpace& s1, const OutcomeSpace& s2);

private:
    std::vector<Label> labels_;
    std::map<Label, Eigen::Index> index_;
    std::shared_ptr<const OutcomeSpace> factor_first_;
    std::shared_ptr<const OutcomeSpace> factor_second_;
};

// Cartesian product, s1-major lexicographic order, labels concatenated
// (flattened tuples).
inline OutcomeSpace product_space(const OutcomeSpace& s1, const OutcomeSpace& s2) {
    std::vector<Label> labels;
    labels.reserve(static_cast<std::size_t>(s1.size() * s2.size()));
    for (Eigen::Index i = 0; i < s1.size(); ++i) {
        for (Eigen::Index j = 0; j < s2.size(); ++j) {
            Label l = s1.label(i);
            const Label& r = s2.label(j);
            l.insert(l.end(), r.begin(), r.end());
            labels.push_back(std::move(l));
        }
    }
    OutcomeSpace out(std::move(labels));
    out.factor_first_ = std::make_shared<const OutcomeSpace>(s1);
    out.factor_second_ = std::make_shared<const OutcomeSpace>(s2);
    return out;
}

enum class KeepFactor { First, Second };

// Row-stochastic map: one probability row over `target` per `source` label.
// rows(i, j) = nu_{source i}(target j).
template <typename Scalar>
class MarkovKernel {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    MarkovKernel(OutcomeSpace source, OutcomeSpace target, Matrix rows)
        : source_(std::move(source)), target_(std::move(target)), rows_(std::move(rows)) {
        if (rows_.rows() != source_.size() || rows_.cols() != target_.size()) {
            throw SpaceMismatch("MarkovKernel: rows are " + std::to_string(rows_.rows()) + "x" +
                                std::to_string(rows_.cols()) + ", spaces need " +
                                std::to_string(source_.size()) + "x" + std::to_string(target_.size()));
        }
        for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
            Scalar sum = 0;
            for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
                const Scalar v = rows_(i, j);
                if (!(v >= Scalar(0)) || !std::isfinite(static_cast<double>(v))) {
                    throw InvalidParams("MarkovKernel: entry (" + std::to_string(i) + "," +
                                        std::to_string(j) + ") = " +
                                        std::to_string(static_cast<double>(v)) + " is not a probability");
                }
                sum += v;
            }
            // Absorb float dust; a larger deviation is a construction bug.
            if (std::abs(static_cast<double>(sum) - 1.0) > 1e-12) {
                throw InvalidParams("MarkovKernel: row " + std::to_string(i) + " sums to " +
                                    std::to_string(static_cast<double>(sum)));
            }
            rows_.row(i) /= sum;
        }
    }

    const OutcomeSpace& source() const { return source_; }
    const OutcomeSpace& target() const { return target_; }
    const Matrix& rows() const { return rows_; }
    Scalar operator()(Eigen::Index src, Eigen::Index tgt) const { return rows_(src, tgt); }

private:
    OutcomeSpace source_;
    OutcomeSpace target_;
    Matrix rows_;
};

template <typename Scalar>
MarkovKernel<Scalar> identity_kernel(const OutcomeSpace& space) {
    using Matrix = typename MarkovKernel<Scalar>::Matrix;
    return MarkovKernel<Scalar>(space, space, Matrix::Identity(space.size(), space.size()));
}

// Deterministic kernel induced by a total map f: source label -> target label.
template <typename Scalar>
MarkovKernel<Scalar> point_kernel(const OutcomeSpace& source, const OutcomeSpace& target,
                                  const std::vector<Eigen::Index>& image) {
    using Matrix = typename MarkovKernel<Scalar>::Matrix;
    if (static_cast<Eigen::Index>(image.size()) != source.size()) {
        throw SpaceMismatch("point_kernel: image size does not match source");
    }
    Matrix rows = Matrix::Zero(source.size(), target.size());
    for (Eigen::Index i = 0; i < source.size(); ++i) rows(i, image[static_cast<std::size_t>(i)]) = 1;
    return MarkovKernel<Scalar>(source, target, rows);
}

// nu3_{w3}(B) = sum_{w2} nu1_{w2}(B) nu2_{w3}(w2): first apply nu2, then nu1.
template <typename Scalar>
MarkovKernel<Scalar> compose_kernels(const MarkovKernel<Scalar>& nu1, const MarkovKernel<Scalar>& nu2) {
    if (nu1.source() != nu2.target()) {
        throw SpaceMismatch("compose_kernels: nu1 source and nu2 target differ");
    }
    return MarkovKernel<Scalar>(nu2.source(), nu1.target(), nu2.rows() * nu1.rows());
}

// Extension of nu: W3 -> W2 to (W1 x W3) -> (W1 x W2); the W1 coordinate is
// passed through untouched, so each row is nu's row placed in its own block.
template <typename Scalar>
MarkovKernel<Scalar> extend_kernel(const MarkovKernel<Scalar>& nu, const OutcomeSpace& omega1) {
    using Matrix = typename MarkovKernel<Scalar>::Matrix;
    OutcomeSpace src = product_space(omega1, nu.source());
    OutcomeSpace tgt = product_space(omega1, nu.target());
    const Eigen::Index n3 = nu.source().size();
    const Eigen::Index n2 = nu.target().size();
    Matrix rows = Matrix::Zero(src.size(), tgt.size());
    for (Eigen::Index w1 = 0; w1 < omega1.size(); ++w1) {
        rows.block(w1 * n3, w1 * n2, n3, n2) = nu.rows();
    }
    return MarkovKernel<Scalar>(std::move(src), std::move(tgt), std::move(rows));
}

// Sum the rows of a product-targeted kernel over the discarded factor.
template <typename Scalar>
MarkovKernel<Scalar> marginal_kernel(const MarkovKernel<Scalar>& nu, KeepFactor keep) {
    using Matrix = typename MarkovKernel<Scalar>::Matrix;
    if (!nu.target().is_product()) {
        throw NotProductSpace("marginal_kernel: target is not a product space");
    }
    const OutcomeSpace& a = *nu.target().factor_first();
    const OutcomeSpace& b = *nu.target().factor_second();
    const Eigen::Index na = a.size();
    const Eigen::Index nb = b.size();
    const OutcomeSpace& kept = (keep == KeepFactor::First) ? a : b;
    Matrix rows = Matrix::Zero(nu.source().size(), kept.size());
    for (Eigen::Index s = 0; s < nu.source().size(); ++s) {
        for (Eigen::Index i = 0; i < na; ++i) {
            for (Eigen::Index j = 0; j < nb; ++j) {
                const Eigen::Index col = (keep == KeepFactor::First) ? i : j;
                rows(s, col) += nu(s, i * nb + j);
            }
        }
    }
    return MarkovKernel<Scalar>(nu.source(), kept, std::move(rows));
}

} // namespace qinstr
