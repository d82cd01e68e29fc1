#pragma once

// Monte Carlo repeated measurement. Generic trajectories sample the branch
// probabilities of any instrument on a density state; the ladder samplers
// exploit that the photon counting and quantum counter models map number
// states to number states, so trajectories reduce to integer Markov chains
// that survive photon numbers far beyond any truncated matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "qinstr/errors.hpp"
#include "qinstr/instrument.hpp"
#include "qinstr/models.hpp"
#include "qinstr/outcome_kernel.hpp"
#include "qinstr/povm.hpp"
#include "qinstr/rng.hpp"

namespace qinstr {

inline constexpr double kBranchSumTol = 1e-10;

template <typename Scalar>
struct Trajectory {
    std::vector<Label> outcomes;       // length k, in measurement order
    std::vector<double> probs;         // branch probability at each step
    DensityState<Scalar> final_state;
};

template <typename Scalar>
Trajectory<Scalar> sample_trajectory(const Instrument<Scalar>& ins, const DensityState<Scalar>& rho0,
                                     int k, std::uint64_t seed) {
    if (k < 1) throw InvalidParams("sample_trajectory: k must be >= 1");
    if (ins.dim != rho0.dim()) throw DimMismatch("sample_trajectory: state dimension mismatch");
    const Povm<Scalar> effects = induced_povm(ins);
    Rng rng(seed);

    Trajectory<Scalar> traj{{}, {}, rho0};
    traj.outcomes.reserve(static_cast<std::size_t>(k));
    traj.probs.reserve(static_cast<std::size_t>(k));
    std::vector<double> p(static_cast<std::size_t>(ins.space.size()));

    for (int step = 0; step < k; ++step) {
        double total = 0;
        for (Eigen::Index i = 0; i < ins.space.size(); ++i) {
            const Scalar raw =
                (traj.final_state.op * effects.effects[static_cast<std::size_t>(i)]).trace().real();
            p[static_cast<std::size_t>(i)] = std::max(static_cast<double>(raw), 0.0);
            total += p[static_cast<std::size_t>(i)];
        }
        if (std::abs(total - 1.0) > kBranchSumTol) {
            throw DeadEnd("sample_trajectory: branch probabilities sum to " + std::to_string(total) +
                          " at step " + std::to_string(step + 1));
        }
        // Inverse CDF in label order; float dust within the tolerance above
        // is absorbed by scaling the uniform draw.
        const double u = rng.uniform() * total;
        double cum = 0;
        Eigen::Index chosen = ins.space.size() - 1;
        for (Eigen::Index i = 0; i < ins.space.size(); ++i) {
            cum += p[static_cast<std::size_t>(i)];
            if (u < cum) {
                chosen = i;
                break;
            }
        }
        const Label& outcome = ins.space.label(chosen);
        BranchResult<Scalar> branch = schrodinger_branch(ins, outcome, traj.final_state);
        if (!branch.post) {
            throw DeadEnd("sample_trajectory: selected branch has vanishing probability");
        }
        traj.outcomes.push_back(outcome);
        traj.probs.push_back(p[static_cast<std::size_t>(chosen)] / total);
        traj.final_state = *branch.post;
    }
    return traj;
}

enum class Statistic { Mk, Xk };

struct ConvergenceStats {
    Statistic statistic = Statistic::Mk;
    int k = 0;
    std::int64_t n_traj = 0;
    std::vector<double> values; // per-trajectory statistic, in trajectory order
    double mean = 0;
    double variance = 0;                      // unbiased (n-1) when n > 1
    std::map<std::int64_t, double> empirical; // relative frequencies, Mk only
};

namespace detail {

inline std::int64_t label_count(const Label& l) {
    if (l.size() != 1 || !std::holds_alternative<std::int64_t>(l[0])) {
        throw InvalidParams("count statistics need single integer outcome labels, got " + to_string(l));
    }
    return std::get<std::int64_t>(l[0]);
}

inline void finalize_stats(ConvergenceStats& stats) {
    const double n = static_cast<double>(stats.values.size());
    double sum = 0;
    for (double v : stats.values) sum += v;
    stats.mean = sum / n;
    double ss = 0;
    for (double v : stats.values) ss += (v - stats.mean) * (v - stats.mean);
    stats.variance = n > 1 ? ss / (n - 1) : 0.0;
}

} // namespace detail

// Fans out derived seeds so trajectory i is reproducible in isolation; the
// aggregation order is the index order, independent of scheduling.
template <typename Scalar>
ConvergenceStats ensemble_stats(const Instrument<Scalar>& ins, const DensityState<Scalar>& rho0, int k,
                                std::int64_t n_traj, std::uint64_t master_seed, Statistic statistic,
                                double lambda_t = 0.0) {
    if (n_traj < 1) throw InvalidParams("ensemble_stats: n_traj must be >= 1");
    if (statistic == Statistic::Xk && !(lambda_t > 0)) {
        throw InvalidParams("ensemble_stats: the Xk statistic needs lambda_t > 0 for its scale");
    }
    ConvergenceStats stats;
    stats.statistic = statistic;
    stats.k = k;
    stats.n_traj = n_traj;
    stats.values.reserve(static_cast<std::size_t>(n_traj));
    const double scale = statistic == Statistic::Xk ? std::exp(-lambda_t * k) : 1.0;
    std::map<std::int64_t, std::int64_t> counts;
    for (std::int64_t i = 0; i < n_traj; ++i) {
        const Trajectory<Scalar> traj =
            sample_trajectory(ins, rho0, k, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
        std::int64_t mk = 0;
        for (const Label& l : traj.outcomes) mk += detail::label_count(l);
        if (statistic == Statistic::Mk) {
            stats.values.push_back(static_cast<double>(mk));
            ++counts[mk];
        } else {
            stats.values.push_back(scale * static_cast<double>(mk));
        }
    }
    for (const auto& [value, count] : counts) {
        stats.empirical[value] = static_cast<double>(count) / static_cast<double>(n_traj);
    }
    detail::finalize_stats(stats);
    return stats;
}

// Independent counts m_i ~ Poisson((e^{lambda_t}-1) e^{lambda_t (i-1)} x),
// i = 1..k: the classical product law the quantum counter statistics
// factorize into at fixed intensity x.
inline std::vector<std::int64_t> classical_product_sampler(double x, double lambda_t, int k,
                                                           std::uint64_t seed) {
    if (!(x >= 0)) throw InvalidParams("classical_product_sampler: x must be >= 0");
    if (!(lambda_t > 0)) throw InvalidParams("classical_product_sampler: lambda_t must be > 0");
    if (k < 1) throw InvalidParams("classical_product_sampler: k must be >= 1");
    Rng rng(seed);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    const double base = std::expm1(lambda_t) * x;
    for (int i = 0; i < k; ++i) {
        counts[static_cast<std::size_t>(i)] = rng.poisson(base * std::exp(lambda_t * i));
    }
    return counts;
}

enum class LadderModel { PhotonCounting, QuantumCounter };

struct LadderTrajectory {
    std::vector<std::int64_t> counts; // outcome m_i per step
    std::int64_t n_final = 0;         // photon number after the last step
};

// Exact number-state trajectory. Photon counting from |n0> draws
// m ~ binomial thinning and descends the ladder; the quantum counter draws
// m ~ NB(n+1, e^{-lambda_t}) and climbs. No truncation enters, so k with
// photon numbers around e^{lambda_t k} is fine for the counter model.
inline LadderTrajectory sample_ladder_trajectory(LadderModel model, std::int64_t n0, double lambda_t,
                                                 int k, std::uint64_t seed) {
    if (n0 < 0) throw InvalidParams("sample_ladder_trajectory: n0 must be >= 0");
    if (!(lambda_t > 0)) throw InvalidParams("sample_ladder_trajectory: lambda_t must be > 0");
    if (k < 1) throw InvalidParams("sample_ladder_trajectory: k must be >= 1");
    if (model == LadderModel::PhotonCounting && n0 > 1000000) {
        throw InvalidParams("sample_ladder_trajectory: photon-counting inversion needs modest n0");
    }
    Rng rng(seed);
    LadderTrajectory traj;
    traj.counts.resize(static_cast<std::size_t>(k), 0);
    std::int64_t n = n0;
    const double p_keep = std::exp(-lambda_t);
    for (int i = 0; i < k; ++i) {
        std::int64_t m = 0;
        if (model == LadderModel::PhotonCounting) {
            // Inverse CDF over the binomial pmf p_pc(m | n).
            const double u = rng.uniform();
            double cum = 0;
            for (m = 0; m < n; ++m) {
                cum += p_pc(m, n, lambda_t);
                if (u < cum) break;
            }
            n -= m;
        } else {
            m = rng.neg_binomial(static_cast<double>(n) + 1.0, p_keep);
            n += m;
        }
        traj.counts[static_cast<std::size_t>(i)] = m;
    }
    traj.n_final = n;
    return traj;
}

inline ConvergenceStats ladder_ensemble_stats(LadderModel model, std::int64_t n0, double lambda_t, int k,
                                              std::int64_t n_traj, std::uint64_t master_seed,
                                              Statistic statistic) {
    if (n_traj < 1) throw InvalidParams("ladder_ensemble_stats: n_traj must be >= 1");
    ConvergenceStats stats;
    stats.statistic = statistic;
    stats.k = k;
    stats.n_traj = n_traj;
    stats.values.reserve(static_cast<std::size_t>(n_traj));
    const double scale = statistic == Statistic::Xk ? std::exp(-lambda_t * k) : 1.0;
    std::map<std::int64_t, std::int64_t> counts;
    for (std::int64_t i = 0; i < n_traj; ++i) {
        const LadderTrajectory traj = sample_ladder_trajectory(
            model, n0, lambda_t, k, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
        std::int64_t mk = 0;
        for (std::int64_t m : traj.counts) mk += m;
        if (statistic == Statistic::Mk) {
            stats.values.push_back(static_cast<double>(mk));
            ++counts[mk];
        } else {
            stats.values.push_back(scale * static_cast<double>(mk));
        }
    }
    for (const auto& [value, count] : counts) {
        stats.empirical[value] = static_cast<double>(count) / static_cast<double>(n_traj);
    }
    detail::finalize_stats(stats);
    return stats;
}

// Total variation distance between two discrete laws on integers.
inline double tv_distance(const std::map<std::int64_t, double>& p, const std::map<std::int64_t, double>& q) {
    double sum = 0;
    auto it_p = p.begin();
    auto it_q = q.begin();
    while (it_p != p.end() || it_q != q.end()) {
        if (it_q == q.end() || (it_p != p.end() && it_p->first < it_q->first)) {
            sum += std::abs(it_p->second);
            ++it_p;
        } else if (it_p == p.end() || it_q->first < it_p->first) {
            sum += std::abs(it_q->second);
            ++it_q;
        } else {
            sum += std::abs(it_p->second - it_q->second);
            ++it_p;
            ++it_q;
        }
    }
    return 0.5 * sum;
}

// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw InvalidParams("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    }
    return d;
}

} // namespace qinstr
