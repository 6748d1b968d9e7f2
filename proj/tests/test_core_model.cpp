#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "plasticell/core_model.hpp"

using namespace plasticell;

namespace {

const FactoryParams reference{1.0, 1.0, 1.5, 1.0};

bool has_issue(const ValidationReport& r, Issue issue) {
    for (const auto& v : r.violations)
        if (v.issue == issue) return true;
    return false;
}

}  // namespace

TEST(FactoryParams, CheckedRejectsNonPositiveAndNonFinite) {
    EXPECT_NO_THROW(FactoryParams::checked(1, 1, 1.5, 1));
    EXPECT_THROW(FactoryParams::checked(0, 1, 1, 1), InvalidInput);
    EXPECT_THROW(FactoryParams::checked(1, -1, 1, 1), InvalidInput);
    EXPECT_THROW(FactoryParams::checked(1, 1, std::nan(""), 1), InvalidInput);
    EXPECT_THROW(FactoryParams::checked(1, 1, 1, std::numeric_limits<double>::infinity()), InvalidInput);
}

TEST(FactoryParams, StabilityIsStrict) {
    EXPECT_TRUE(reference.stable());
    EXPECT_FALSE((FactoryParams{1, 1, 1, 1}).stable());
    EXPECT_FALSE((FactoryParams{2, 1, 1.5, 1}).stable());
}

TEST(FactoryParams, FromLevels) {
    const FactoryParams p = FactoryParams::from_levels(2.0, 4.0);
    EXPECT_DOUBLE_EQ(p.steady_product(), 2.0);
    EXPECT_DOUBLE_EQ(p.limit_product(), 4.0);
    EXPECT_DOUBLE_EQ(p.growth, 1.0);
    EXPECT_DOUBLE_EQ(p.synthesis, 1.0);
}

TEST(DerivedParams, Values) {
    const DerivedParams d = derived_params(reference, 0.5);
    EXPECT_DOUBLE_EQ(d.steady_product, 1.0);
    EXPECT_DOUBLE_EQ(d.limit_product, 1.5);
    EXPECT_DOUBLE_EQ(d.minimum_factory, 0.5 / 1.5);
    EXPECT_TRUE(d.stable());
    EXPECT_THROW(derived_params(reference, -0.1), InvalidInput);
}

TEST(DerivedParams, ScalingRatesTogetherLeavesLevelsAlone) {
    // (G, K) and (R, I) scaled by the same factor keep P_inf and P_lim.
    for (double s : {0.1, 2.0, 37.0}) {
        const FactoryParams q{reference.growth * s, reference.growth_inhibition * s, reference.synthesis * s,
                              reference.synthesis_inhibition * s};
        const DerivedParams a = derived_params(reference, 0.5), b = derived_params(q, 0.5 * s);
        EXPECT_NEAR(a.steady_product, b.steady_product, 1e-14);
        EXPECT_NEAR(a.limit_product, b.limit_product, 1e-14);
        EXPECT_NEAR(a.minimum_factory, b.minimum_factory, 1e-14);
    }
}

TEST(Derivative, ReferenceVectorFieldPoint) {
    const CellRate r = derivative(CellSpec::single(reference), CellState::single(0.5, 0.5), std::vector<double>{0.5});
    EXPECT_DOUBLE_EQ(r.factory[0], 0.25);
    EXPECT_DOUBLE_EQ(r.product[0], 0.25);
}

TEST(Derivative, ZeroAtClosedFormEquilibrium) {
    // F* = (C/R) / (K/G - I/R) = (1/3) / (1 - 2/3) = 1, P* = 1
    const CellRate r = derivative(CellSpec::single(reference), CellState::single(1.0, 1.0), std::vector<double>{0.5});
    EXPECT_NEAR(r.max_abs(), 0.0, 1e-15);
}

TEST(Derivative, OppositionTermByHand) {
    CellSpec spec{{reference, FactoryParams{2, 1, 3, 1}}, OppositionMatrix::pair(0.1, 0.3)};
    const CellState s{{2.0, 3.0}, {0.5, 0.25}};
    const CellRate r = derivative(spec, s, std::vector<double>{0.2, 0.4});
    EXPECT_DOUBLE_EQ(r.factory[0], (1.0 - 0.5 - 0.1 * 3.0) * 2.0);
    EXPECT_DOUBLE_EQ(r.factory[1], (2.0 - 0.25 - 0.3 * 2.0) * 3.0);
    EXPECT_DOUBLE_EQ(r.product[0], (1.5 - 0.5) * 2.0 - 0.2 * 0.5);
    EXPECT_DOUBLE_EQ(r.product[1], (3.0 - 0.25) * 3.0 - 0.4 * 0.25);
}

TEST(Derivative, PermutingFactoriesPermutesRates) {
    const FactoryParams a{1, 1, 1.1, 1}, b{1.3, 0.7, 2.0, 0.9}, c{0.8, 1.2, 1.5, 0.6};
    CellSpec spec{{a, b, c}, OppositionMatrix::from_rows({{0, 0.1, 0.2}, {0.05, 0, 0.3}, {0.15, 0.25, 0}})};
    const CellState s{{1.0, 2.0, 0.5}, {0.3, 0.7, 0.9}};
    const std::vector<double> cons{0.2, 0.4, 0.6};
    const CellRate r = derivative(spec, s, cons);

    const std::size_t perm[3] = {2, 0, 1};  // new index k holds old factory perm[k]
    CellSpec ps{{}, OppositionMatrix(3)};
    CellState pst;
    std::vector<double> pc;
    for (std::size_t k = 0; k < 3; ++k) {
        ps.factories.push_back(spec.factories[perm[k]]);
        pst.factory.push_back(s.factory[perm[k]]);
        pst.product.push_back(s.product[perm[k]]);
        pc.push_back(cons[perm[k]]);
        for (std::size_t l = 0; l < 3; ++l) ps.opposition(k, l) = spec.opposition(perm[k], perm[l]);
    }
    const CellRate pr = derivative(ps, pst, pc);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_DOUBLE_EQ(pr.factory[k], r.factory[perm[k]]);
        EXPECT_DOUBLE_EQ(pr.product[k], r.product[perm[k]]);
    }
}

TEST(Derivative, RejectsBadShapesAndStates) {
    const CellSpec spec = CellSpec::single(reference);
    EXPECT_THROW(derivative(spec, CellState{{1, 1}, {1, 1}}, std::vector<double>{0.5}), InvalidInput);
    EXPECT_THROW(derivative(spec, CellState::single(1, 1), std::vector<double>{0.5, 0.5}), InvalidInput);
    EXPECT_THROW(derivative(spec, CellState::single(-1e-3, 1), std::vector<double>{0.5}), InvalidInput);
    EXPECT_THROW(derivative(spec, CellState::single(1, 1), std::vector<double>{-0.5}), InvalidInput);
}

TEST(Validate, ReportsEachIssue) {
    EXPECT_TRUE(validate(CellSpec::single(reference)).valid());

    const ValidationReport unstable = validate(CellSpec::single({1, 1, 1, 1}));
    EXPECT_TRUE(has_issue(unstable, Issue::stability_violated));
    EXPECT_FALSE(unstable.factories[0].stable);
    EXPECT_DOUBLE_EQ(unstable.factories[0].ratio, 1.0);

    EXPECT_TRUE(has_issue(validate(CellSpec::single({0, 1, 1, 1})), Issue::nonpositive_rate));

    CellSpec neg{{reference, reference}, OppositionMatrix::pair(-0.1, 0.1)};
    EXPECT_TRUE(has_issue(validate(neg), Issue::negative_opposition));

    CellSpec diag{{reference, reference}, OppositionMatrix::from_rows({{0.1, 0}, {0, 0}})};
    EXPECT_TRUE(has_issue(validate(diag), Issue::nonzero_diagonal));

    CellSpec inf{{reference, reference}, OppositionMatrix::pair(std::numeric_limits<double>::infinity(), 0)};
    EXPECT_TRUE(has_issue(validate(inf), Issue::nonfinite_opposition));

    CellSpec shape{{reference, reference}, OppositionMatrix(3)};
    EXPECT_TRUE(has_issue(validate(shape), Issue::dimension_mismatch));
}

TEST(StimulusProfile, PiecewiseConstantLookup) {
    const StimulusProfile p({{{0, 0.2}, {50, 2.2}, {52, 0.2}}, {{0, 1.0}}}, 100);
    EXPECT_EQ(p.size(), 2u);
    EXPECT_DOUBLE_EQ(p.at(0)[0], 0.2);
    EXPECT_DOUBLE_EQ(p.at(49.999)[0], 0.2);
    EXPECT_DOUBLE_EQ(p.at(50)[0], 2.2);
    EXPECT_DOUBLE_EQ(p.at(52)[0], 0.2);
    EXPECT_DOUBLE_EQ(p.at(75)[1], 1.0);
    const std::vector<double> expected{50, 52};
    EXPECT_EQ(p.breakpoints(), expected);
}

TEST(StimulusProfile, RejectsMalformedSegments) {
    EXPECT_THROW(StimulusProfile({{{1, 0.2}}}, 10), InvalidInput);              // does not start at 0
    EXPECT_THROW(StimulusProfile({{{0, 0.2}, {0, 0.3}}}, 10), InvalidInput);    // not increasing
    EXPECT_THROW(StimulusProfile({{{0, -0.2}}}, 10), InvalidInput);             // negative rate
    EXPECT_THROW(StimulusProfile({{{0, 0.2}}}, 0), InvalidInput);               // empty horizon
}
