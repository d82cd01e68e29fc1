#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <vector>

#include "qinstr/povm.hpp"
#include "support.hpp"

using namespace qinstr;
using Complex = std::complex<double>;
using KMatrix = MarkovKernel<double>::Matrix;

namespace {

Povm<double> projective_z() {
    return Povm<double>(OutcomeSpace::integers(2), {dyad<double>(2, 0, 0), dyad<double>(2, 1, 1)});
}

Povm<double> fuzzy_coin() {
    const MatrixC<double> half = 0.5 * identity_operator<double>(2);
    return Povm<double>(OutcomeSpace::integers(2), {half, half});
}

} // namespace

TEST_CASE("povm validation reports each violation kind") {
    CHECK(validate_povm(projective_z()).empty());

    MatrixC<double> skew(2, 2);
    skew << Complex(0.5), Complex(0.3), Complex(-0.3), Complex(0.5);
    const Povm<double> not_herm(OutcomeSpace::integers(2),
                                {skew, identity_operator<double>(2) - skew});
    bool saw_herm = false;
    for (const auto& v : validate_povm(not_herm)) saw_herm |= v.kind == "not_hermitian";
    CHECK(saw_herm);

    MatrixC<double> neg = MatrixC<double>::Zero(2, 2);
    neg(0, 0) = 1.2;
    neg(1, 1) = -0.2;
    const Povm<double> not_psd(OutcomeSpace::integers(2),
                               {neg, identity_operator<double>(2) - neg});
    bool saw_psd = false;
    for (const auto& v : validate_povm(not_psd)) saw_psd |= v.kind == "not_psd";
    CHECK(saw_psd);

    const MatrixC<double> half = 0.5 * identity_operator<double>(2);
    const Povm<double> incomplete(OutcomeSpace::integers(2), {half, 0.25 * half});
    bool saw_inc = false;
    for (const auto& v : validate_povm(incomplete)) saw_inc |= v.kind == "incomplete";
    CHECK(saw_inc);

    CHECK_THROWS_AS(Povm<double>(OutcomeSpace::integers(2), {half}), SpaceMismatch);
}

TEST_CASE("post-processing and coarse-graining") {
    const Povm<double> e2 = projective_z();
    KMatrix rows(2, 2);
    rows << 0.75, 0.25, 0.25, 0.75;
    const MarkovKernel<double> nu(e2.space, OutcomeSpace::integers(2), rows);
    const Povm<double> e1 = post_process(e2, nu);
    CHECK(e1.effects[0](0, 0).real() == doctest::Approx(0.75));
    CHECK(e1.effects[0](1, 1).real() == doctest::Approx(0.25));
    CHECK(validate_povm(e1).empty());

    const MarkovKernel<double> wrong(OutcomeSpace::integers(3), e2.space,
                                     KMatrix::Constant(3, 2, 0.5));
    CHECK_THROWS_AS(post_process(e2, wrong), SpaceMismatch);

    const Povm<double> merged = coarse_grain(e1, [](const Label&) { return atom_label(0); });
    CHECK(merged.space.size() == 1);
    CHECK(max_abs_diff(merged.effects[0], identity_operator<double>(2)) < 1e-12);
}

TEST_CASE("projective is strictly above the coin flip") {
    const Povm<double> sharp = projective_z();
    const Povm<double> fuzzy = fuzzy_coin();

    // The coin flip is a post-processing of the projective measurement.
    const PreorderCertificate<double> down = find_post_processing(fuzzy, sharp, 1e-8);
    CHECK(down.feasible);
    CHECK(down.bound == BoundKind::Exact);
    CHECK(down.residual < 1e-12);
    REQUIRE(down.kernel.has_value());
    const Povm<double> rebuilt = post_process(sharp, *down.kernel);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(max_abs_diff(rebuilt.effects[i], fuzzy.effects[i]) < 1e-10);
    }

    // No kernel can sharpen the coin flip; the best max-abs residual is 0.5.
    const PreorderCertificate<double> up = find_post_processing(sharp, fuzzy, 1e-8);
    CHECK(!up.feasible);
    CHECK(up.residual == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(!up.kernel.has_value());

    const EquivalenceResult<double> eq = check_equivalent(sharp, fuzzy, 1e-8);
    CHECK(!eq.equivalent);
}

TEST_CASE("reflexivity, splits and permutations give equivalence") {
    const Povm<double> e = testing::random_povm(3, 4, 91);
    CHECK(find_post_processing(e, e, 1e-9).feasible);

    // Permute outcomes.
    std::vector<MatrixC<double>> permuted = {e.effects[2], e.effects[0], e.effects[3], e.effects[1]};
    const Povm<double> ep(OutcomeSpace::integers(4), std::move(permuted));
    CHECK(check_equivalent(e, ep, 1e-9).equivalent);

    // Split the first effect proportionally into two outcomes.
    std::vector<MatrixC<double>> split = {0.3 * e.effects[0], 0.7 * e.effects[0], e.effects[1],
                                          e.effects[2], e.effects[3]};
    const Povm<double> es(OutcomeSpace::integers(5), std::move(split));
    CHECK(check_equivalent(e, es, 1e-9).equivalent);

    // Coarse-graining always sits below.
    const Povm<double> merged = coarse_grain(e, [](const Label& l) {
        return std::get<std::int64_t>(l[0]) < 2 ? atom_label(0) : atom_label(1);
    });
    CHECK(find_post_processing(merged, e, 1e-9).feasible);
}

TEST_CASE("preorder is transitive on random chains") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Povm<double> e3 = testing::random_povm(3, 3, 100 + seed);
        const MarkovKernel<double> nu23 =
            testing::random_kernel(e3.space, OutcomeSpace::integers(4), 200 + seed);
        const Povm<double> e2 = post_process(e3, nu23);
        const MarkovKernel<double> nu12 =
            testing::random_kernel(e2.space, OutcomeSpace::integers(2), 300 + seed);
        const Povm<double> e1 = post_process(e2, nu12);

        CHECK(find_post_processing(e2, e3, 1e-9).feasible);
        CHECK(find_post_processing(e1, e3, 1e-9).feasible);
    }
}

TEST_CASE("feasibility is basis independent") {
    // The diagonal fast path and the full component path must agree on
    // unitarily conjugated copies of the same decision problem.
    const Povm<double> sharp = projective_z();
    const Povm<double> fuzzy = fuzzy_coin();
    MatrixC<double> u(2, 2);
    const double s = 1.0 / std::sqrt(2.0);
    u << Complex(s), Complex(0, -s), Complex(0, s), Complex(-s);

    auto rotate = [&u](const Povm<double>& e) {
        std::vector<MatrixC<double>> effects;
        for (const auto& op : e.effects) effects.push_back(u * op * u.adjoint());
        return Povm<double>(e.space, std::move(effects));
    };
    const Povm<double> sharp_r = rotate(sharp);
    const Povm<double> fuzzy_r = rotate(fuzzy);
    CHECK(find_post_processing(fuzzy_r, sharp_r, 1e-8).feasible);
    const PreorderCertificate<double> up = find_post_processing(sharp_r, fuzzy_r, 1e-8);
    CHECK(!up.feasible);
    CHECK(up.residual > 0.2);
}

TEST_CASE("bounding mode certifies without solving the joint LP") {
    PreorderOptions tiny;
    tiny.max_tableau_cells = 1;

    // Feasible side: a permutation is found by the candidate kernel.
    const Povm<double> e = testing::random_povm(2, 3, 55);
    const Povm<double> ep(OutcomeSpace::integers(3), {e.effects[1], e.effects[2], e.effects[0]});
    const PreorderCertificate<double> up = find_post_processing(ep, e, 1e-8, tiny);
    CHECK(up.feasible);
    CHECK(up.bound == BoundKind::Upper);
    REQUIRE(up.kernel.has_value());
    CHECK(up.residual < 1e-12);

    // Infeasible side: the relaxation already proves the 0.5 gap.
    const PreorderCertificate<double> low = find_post_processing(projective_z(), fuzzy_coin(), 1e-8, tiny);
    CHECK(!low.feasible);
    CHECK(low.bound == BoundKind::Lower);
    CHECK(low.residual == doctest::Approx(0.5).epsilon(1e-9));

    // Straddle: the relaxation cannot exclude, the candidate cannot achieve.
    CHECK_THROWS_AS(find_post_processing(fuzzy_coin(), projective_z(), 1e-8, tiny), LpBudgetExceeded);
}

TEST_CASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(find_post_processing(projective_z(), testing::random_povm(3, 2, 5), 1e-8),
                    DimMismatch);
}
