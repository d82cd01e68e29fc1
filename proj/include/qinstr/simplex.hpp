#pragma once

// Dense two-phase simplex for the feasibility LPs behind the post-processing
// preorder:
//   minimize c'x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
// Constraint rows are equilibrated to unit max-abs on entry, so pivot_tol
// means the same thing in every row. Entering follows Dantzig's
// most-negative rule with deterministic tie-breaks, switching to Bland's
// lowest-index rule once the objective has stalled for a full window; runs
// are reproducible and cycling dies out. A column whose positive entries sit
// at or below pivot_tol is never pivoted on (a dust pivot shreds the
// tableau): when only such columns would improve, the solve ends Stalled
// rather than corrupting the basis. Stalled after a feasible phase 1 still
// carries the vertex reached and its objective, an upper bound on the
// optimum; callers needing a certified optimum must treat it as failure.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qinstr/errors.hpp"

namespace qinstr {

enum class LpStatus { Optimal, Infeasible, Unbounded, Stalled };

template <typename Scalar>
struct LpProblem {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    Matrix a_eq; // may have 0 rows
    Vector b_eq;
    Matrix a_ub; // may have 0 rows
    Vector b_ub;
    Vector c;
};

template <typename Scalar>
struct LpResult {
    LpStatus status = LpStatus::Optimal;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
    Scalar objective = 0;
    long iterations = 0;
};

struct LpOptions {
    double pivot_tol = 1e-9;
    double feas_tol = 1e-9;
    long max_iterations = 2000000; // exceeding it reports Stalled, not a throw
};

namespace detail {

template <typename Tableau>
void lp_pivot(Tableau& t, std::vector<Eigen::Index>& basis, Eigen::Index row, Eigen::Index col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
        if (r == row) continue;
        const auto f = t(r, col);
        if (f != 0) t.row(r) -= f * t.row(row);
    }
    basis[static_cast<std::size_t>(row)] = col;
}

// Runs simplex iterations on a tableau whose last row holds the reduced
// costs and last column the rhs (the corner is minus the current objective).
// Columns with index >= col_limit are never allowed to enter.
template <typename Tableau, typename Scalar>
LpStatus lp_iterate(Tableau& t, std::vector<Eigen::Index>& basis, Eigen::Index col_limit,
                    const LpOptions& opts, long& iterations) {
    const Eigen::Index m = t.rows() - 1;
    const Eigen::Index rhs = t.cols() - 1;
    const Scalar tol = static_cast<Scalar>(opts.pivot_tol);
    bool bland = false;
    long since_progress = 0;
    const long stall_window = 100 + 2 * static_cast<long>(m + t.cols());
    Scalar best_corner = t(m, rhs);

    // Min-ratio leaving row for `col`: -1 when every entry is at or below
    // pivot_tol, with `ray` flagging a wholly nonpositive (truly unbounded)
    // column. Ties go to the lowest basic label, deterministically.
    const auto ratio_leave = [&](Eigen::Index col, bool& ray) {
        Eigen::Index leave = -1;
        Scalar best_ratio = 0;
        ray = true;
        for (Eigen::Index r = 0; r < m; ++r) {
            const Scalar a = t(r, col);
            if (a > 0) ray = false;
            if (a <= tol) continue;
            const Scalar ratio = t(r, rhs) / a;
            if (leave < 0 || ratio < best_ratio ||
                (ratio == best_ratio && basis[static_cast<std::size_t>(r)] <
                                            basis[static_cast<std::size_t>(leave)])) {
                leave = r;
                best_ratio = ratio;
            }
        }
        return leave;
    };

    for (;;) {
        Eigen::Index enter = -1;
        Eigen::Index leave = -1;
        bool improving = false;
        if (!bland) {
            Eigen::Index steepest = -1;
            Scalar best_cost = -tol;
            for (Eigen::Index j = 0; j < col_limit; ++j) {
                if (t(m, j) < best_cost) {
                    best_cost = t(m, j);
                    steepest = j;
                }
            }
            if (steepest >= 0) {
                improving = true;
                bool ray = false;
                const Eigen::Index r = ratio_leave(steepest, ray);
                if (ray) return LpStatus::Unbounded;
                if (r >= 0) {
                    enter = steepest;
                    leave = r;
                }
            }
        }
        if (enter < 0) {
            // Bland order; also the fallback when the steepest column is
            // blocked below pivot_tol.
            for (Eigen::Index j = 0; j < col_limit; ++j) {
                if (t(m, j) >= -tol) continue;
                improving = true;
                bool ray = false;
                const Eigen::Index r = ratio_leave(j, ray);
                if (ray) return LpStatus::Unbounded;
                if (r >= 0) {
                    enter = j;
                    leave = r;
                    break;
                }
            }
        }
        if (!improving) return LpStatus::Optimal;
        if (enter < 0) return LpStatus::Stalled; // only dust-pivot columns improve
        lp_pivot(t, basis, leave, enter);
        if (++iterations > opts.max_iterations) return LpStatus::Stalled;
        if (t(m, rhs) > best_corner + Scalar(1e-12) * (Scalar(1) + std::abs(best_corner))) {
            best_corner = t(m, rhs);
            since_progress = 0;
        } else if (!bland && ++since_progress >= stall_window) {
            bland = true;
        }
    }
}

} // namespace detail

template <typename Scalar>
LpResult<Scalar> solve_lp(const LpProblem<Scalar>& p, const LpOptions& opts = LpOptions{}) {
    using Tableau = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Vector = typename LpProblem<Scalar>::Vector;

    const Eigen::Index n = p.c.size();
    const Eigen::Index me = p.a_eq.rows();
    const Eigen::Index mu = p.a_ub.rows();
    const Eigen::Index m = me + mu;
    if ((me > 0 && p.a_eq.cols() != n) || (mu > 0 && p.a_ub.cols() != n)) {
        throw DimMismatch("solve_lp: constraint matrices do not match objective size");
    }

    // Columns: n structural, mu slacks, then one artificial per row that
    // needs one (every eq row; ub rows whose slack ends up with -1), rhs last.
    // First pass decides which rows need artificials so the tableau can be
    // sized exactly.
    std::vector<bool> negate(static_cast<std::size_t>(m), false);
    std::vector<bool> needs_art(static_cast<std::size_t>(m), false);
    Eigen::Index n_art = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
        const bool is_eq = r < me;
        const Scalar b = is_eq ? p.b_eq[r] : p.b_ub[r - me];
        negate[static_cast<std::size_t>(r)] = b < 0;
        needs_art[static_cast<std::size_t>(r)] = is_eq || b < 0;
        if (needs_art[static_cast<std::size_t>(r)]) ++n_art;
    }
    const Eigen::Index cols = n + mu + n_art + 1;
    Tableau t = Tableau::Zero(m + 1, cols);
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m), -1);

    Eigen::Index art = n + mu;
    for (Eigen::Index r = 0; r < m; ++r) {
        const bool is_eq = r < me;
        const Scalar sign = negate[static_cast<std::size_t>(r)] ? Scalar(-1) : Scalar(1);
        // Row equilibration; rescales the row's slack and artificial units
        // only, the feasible set and the reported solution are untouched.
        Scalar s = is_eq ? p.a_eq.row(r).cwiseAbs().maxCoeff()
                         : p.a_ub.row(r - me).cwiseAbs().maxCoeff();
        if (!(s > 0)) s = 1;
        if (is_eq) {
            t.row(r).head(n) = (sign / s) * p.a_eq.row(r);
            t(r, cols - 1) = sign * p.b_eq[r] / s;
        } else {
            t.row(r).head(n) = (sign / s) * p.a_ub.row(r - me);
            t(r, n + (r - me)) = sign; // slack
            t(r, cols - 1) = sign * p.b_ub[r - me] / s;
        }
        if (needs_art[static_cast<std::size_t>(r)]) {
            t(r, art) = 1;
            basis[static_cast<std::size_t>(r)] = art++;
        } else {
            basis[static_cast<std::size_t>(r)] = n + (r - me);
        }
    }
    const Scalar rhs_scale =
        std::max(Scalar(1), m > 0 ? t.col(cols - 1).head(m).cwiseAbs().maxCoeff() : Scalar(0));

    LpResult<Scalar> result;

    // Phase 1: minimize the sum of artificials. Its reduced-cost row is the
    // negated sum of all artificial-basic rows.
    if (n_art > 0) {
        for (Eigen::Index r = 0; r < m; ++r) {
            if (basis[static_cast<std::size_t>(r)] >= n + mu) t.row(m) -= t.row(r);
        }
        t.row(m).segment(n + mu, n_art).setZero();
        const LpStatus st = detail::lp_iterate<Tableau, Scalar>(t, basis, n + mu, opts, result.iterations);
        if (st == LpStatus::Unbounded) throw Error("simplex: phase 1 unbounded");
        if (-t(m, cols - 1) > static_cast<Scalar>(opts.feas_tol) * rhs_scale) {
            result.status = st == LpStatus::Optimal ? LpStatus::Infeasible : LpStatus::Stalled;
            return result;
        }
        // Drive surviving artificials out of the basis where possible; rows
        // with no eligible pivot are redundant constraints and stay parked
        // at value zero (artificials can never re-enter).
        for (Eigen::Index r = 0; r < m; ++r) {
            if (basis[static_cast<std::size_t>(r)] < n + mu) continue;
            for (Eigen::Index j = 0; j < n + mu; ++j) {
                if (std::abs(t(r, j)) > static_cast<Scalar>(opts.pivot_tol)) {
                    detail::lp_pivot(t, basis, r, j);
                    break;
                }
            }
        }
    }

    // Phase 2: restore the true objective, reduce it by the current basis.
    t.row(m).setZero();
    t.row(m).head(n) = p.c;
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index b = basis[static_cast<std::size_t>(r)];
        if (b < n && p.c[b] != 0) t.row(m) -= p.c[b] * t.row(r);
    }
    const LpStatus st = detail::lp_iterate<Tableau, Scalar>(t, basis, n + mu, opts, result.iterations);
    if (st == LpStatus::Unbounded) {
        result.status = LpStatus::Unbounded;
        return result;
    }

    result.x = Vector::Zero(n);
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index b = basis[static_cast<std::size_t>(r)];
        if (b < n) result.x[b] = t(r, cols - 1);
    }
    // Report c'x recomputed from x, not the drifted tableau corner. Under
    // Stalled x is a genuine vertex, so the objective is an upper bound.
    result.objective = p.c.dot(result.x);
    result.status = st;
    return result;
}

} // namespace qinstr
