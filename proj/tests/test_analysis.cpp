#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "plasticell/analysis.hpp"

using namespace plasticell;

namespace {

const FactoryParams reference{1.0, 1.0, 1.5, 1.0};

// Central-difference Jacobian of the one-factory field at (f, p).
std::array<double, 4> numeric_jacobian(const FactoryParams& q, double c, double f, double p) {
    const CellSpec spec = CellSpec::single(q);
    const std::vector<double> cons{c};
    auto rate = [&](double ff, double pp) { return derivative(spec, CellState::single(ff, pp), cons); };
    const double hf = 1e-6 * std::max(1.0, f), hp = 1e-6 * std::max(1.0, p);
    const CellRate fp = rate(f + hf, p), fm = rate(std::max(0.0, f - hf), p);
    const CellRate pp = rate(f, p + hp), pm = rate(f, std::max(0.0, p - hp));
    const double df = f + hf - std::max(0.0, f - hf), dp = p + hp - std::max(0.0, p - hp);
    return {(fp.factory[0] - fm.factory[0]) / df, (pp.factory[0] - pm.factory[0]) / dp,
            (fp.product[0] - fm.product[0]) / df, (pp.product[0] - pm.product[0]) / dp};
}

CellSpec pair(double r, double o12, double o21) {
    return {{FactoryParams{1, 1, r, 1}, FactoryParams{1, 1, r, 1}}, OppositionMatrix::pair(o12, o21)};
}

}  // namespace

TEST(SingleEquilibrium, ClosedForm) {
    const SingleEquilibrium eq = single_equilibrium(reference, 0.5);
    EXPECT_EQ(eq.factory, 1.0);
    EXPECT_EQ(eq.product, 1.0);
}

TEST(SingleEquilibrium, AmplificationRatioIsIndependentOfConsumption) {
    const FactoryParams q{1, 1, 1.1, 1};
    for (double c : {0.2, 1.0, 2.2}) {
        const SingleEquilibrium eq = single_equilibrium(q, c);
        EXPECT_NEAR(eq.factory / (c / q.synthesis), 11.0, 1e-9);
    }
}

TEST(SingleEquilibrium, NonPhysicalThrowsWithRatio) {
    try {
        single_equilibrium({2, 1, 1.5, 1}, 0.5);
        FAIL() << "expected NonPhysicalEquilibrium";
    } catch (const NonPhysicalEquilibrium& e) {
        EXPECT_NEAR(e.ratio(), 2.0 / 1.5, 1e-15);
    }
    EXPECT_THROW(single_equilibrium({1, 1, 1, 1}, 0.5), NonPhysicalEquilibrium);
    EXPECT_THROW(single_equilibrium(reference, -1.0), InvalidInput);
}

TEST(Jacobian, ReferenceSpiralValues) {
    const JacobianMetrics m = jacobian_metrics({1, 1, 5, 1}, 0.5, EquilibriumPoint::nonzero);
    EXPECT_NEAR(m.trace, -0.625, 1e-12);
    EXPECT_NEAR(m.determinant, 0.5, 1e-12);
    EXPECT_NEAR(m.discriminant, -1.609375, 1e-12);
    EXPECT_EQ(classify_linearization(m), StabilityClass::stable_spiral);
}

TEST(Jacobian, OriginIsSaddle) {
    const JacobianMetrics m = jacobian_metrics(reference, 0.5, EquilibriumPoint::origin);
    EXPECT_DOUBLE_EQ(m.trace, 0.5);
    EXPECT_DOUBLE_EQ(m.determinant, -0.5);
    EXPECT_EQ(classify_linearization(m), StabilityClass::saddle);
}

TEST(Jacobian, MatchesFiniteDifferencesOnRandomSets) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    int checked = 0;
    while (checked < 200) {
        const FactoryParams q{u(rng), u(rng), u(rng), u(rng)};
        if (!q.stable()) continue;
        const double c = u(rng);
        const SingleEquilibrium eq = single_equilibrium(q, c);
        const auto j = numeric_jacobian(q, c, eq.factory, eq.product);
        const JacobianMetrics m = jacobian_metrics(q, c, EquilibriumPoint::nonzero);
        const double tr = j[0] + j[3], det = j[0] * j[3] - j[1] * j[2];
        EXPECT_NEAR(m.trace, tr, 1e-6 * std::max(1.0, std::abs(tr)));
        EXPECT_NEAR(m.determinant, det, 1e-6 * std::max(1.0, std::abs(det)));
        ++checked;
    }
}

TEST(Classify, ReferenceCellIsStableNode) {
    const EquilibriumReport r = classify(reference, 0.5);
    EXPECT_EQ(r.stability, StabilityClass::stable_node);
    EXPECT_STREQ(to_string(r.stability), "stable-node");
    EXPECT_NEAR(r.trace, -1.5, 1e-12);
    EXPECT_NEAR(r.determinant, 0.5, 1e-12);
    EXPECT_NEAR(r.discriminant, 0.25, 1e-12);
}

TEST(Classify, UnstableParametersAreNonPhysical) {
    const EquilibriumReport r = classify({1, 1, 0.9, 1}, 0.5);
    EXPECT_EQ(r.stability, StabilityClass::non_physical);
    EXPECT_TRUE(r.factory.empty());
    EXPECT_TRUE(std::isnan(r.trace));
}

TEST(Nullclines, ReferenceSample) {
    const NullclineSet s = nullclines(reference, 0.5, {0.0, 0.75});
    EXPECT_DOUBLE_EQ(s.factory_nullcline_product, 1.0);
    EXPECT_DOUBLE_EQ(s.limit_product, 1.5);
    EXPECT_DOUBLE_EQ(s.product_nullcline[0].factory, 0.0);
    EXPECT_DOUBLE_EQ(s.product_nullcline[1].factory, 0.5);
    EXPECT_THROW(nullclines(reference, 0.5, {1.5}), InvalidInput);
}

TEST(Nullclines, CrossAtEquilibrium) {
    const SingleEquilibrium eq = single_equilibrium(reference, 0.5);
    const NullclineSet s = nullclines(reference, 0.5, {eq.product});
    EXPECT_NEAR(s.product_nullcline[0].factory, eq.factory, 1e-14);
}

TEST(VectorField, MatchesDerivativeOnGrid) {
    const VectorField vf = vector_field(reference, 0.5, {0.0, 0.5, 1.0}, {0.5, 1.0});
    ASSERT_EQ(vf.dfactory.size(), 3u);
    ASSERT_EQ(vf.dfactory[0].size(), 2u);
    EXPECT_DOUBLE_EQ(vf.dfactory[1][0], 0.25);
    EXPECT_DOUBLE_EQ(vf.dproduct[1][0], 0.25);
    EXPECT_DOUBLE_EQ(vf.dfactory[2][1], 0.0);
    EXPECT_DOUBLE_EQ(vf.dproduct[0][1], -0.5);
}

// Frozen from an independent root solve (scipy.optimize.fsolve on the
// four steady-state equations, xtol 1e-14).
TEST(MultiEquilibrium, SymmetricPairReferenceTotals) {
    const CellSpec spec = pair(1.1, 0.05, 0.05);
    const MultiEquilibrium a = multi_equilibrium(spec, {0.4, 0.4});
    EXPECT_NEAR(a.factory[0], 1.8724583, 1e-6);
    EXPECT_NEAR(a.factory[1], 1.8724583, 1e-6);
    EXPECT_NEAR(a.factory[0] + a.factory[1], 3.7449166, 1e-6);

    const MultiEquilibrium b = multi_equilibrium(spec, {0.8, 0.001});
    EXPECT_NEAR(b.factory[0], 7.99471806, 1e-6);
    EXPECT_NEAR(b.factory[1], 0.00120116264, 1e-8);
    EXPECT_NEAR(b.factory[0] + b.factory[1], 7.9959192, 1e-6);
    EXPECT_LT(b.record.max_rate, 1e-7);
}

TEST(MultiEquilibrium, SingleFactoryMatchesClosedForm) {
    const MultiEquilibrium m = multi_equilibrium(CellSpec::single(reference), {0.5});
    EXPECT_NEAR(m.factory[0], 1.0, 1e-9);
    EXPECT_NEAR(m.product[0], 1.0, 1e-12);
}

TEST(MultiEquilibrium, MoreConsumptionMeansMoreFactory) {
    const CellSpec spec = pair(1.1, 0.05, 0.05);
    const MultiEquilibrium m = multi_equilibrium(spec, {0.7, 0.3});
    EXPECT_GT(m.factory[0], m.factory[1]);
}

TEST(MultiEquilibrium, SwappingFactoriesSwapsSolution) {
    const MultiEquilibrium m = multi_equilibrium(pair(1.1, 0.02, 0.08), {0.6, 0.3});
    const MultiEquilibrium s = multi_equilibrium(pair(1.1, 0.08, 0.02), {0.3, 0.6});
    EXPECT_NEAR(m.factory[0], s.factory[1], 1e-8);
    EXPECT_NEAR(m.factory[1], s.factory[0], 1e-8);
}

TEST(MultiEquilibrium, UnusedFactoryGoesExtinct) {
    const MultiEquilibrium m = multi_equilibrium(pair(1.1, 0.05, 0.05), {0.5, 0.0});
    EXPECT_EQ(m.factory[1], 0.0);
    EXPECT_NEAR(m.factory[0], single_equilibrium({1, 1, 1.1, 1}, 0.5).factory, 1e-9);
}

TEST(MultiEquilibrium, StrongOppositionSuppressesWeakerFactory) {
    // O_21 * F_1 exceeds G_2 - K_2 P_2 for any P_2 >= 0, so factory 2 dies out.
    const MultiEquilibrium m = multi_equilibrium(pair(1.1, 0.0, 2.0), {0.5, 0.05});
    EXPECT_EQ(m.factory[1], 0.0);
    EXPECT_LT(m.record.max_rate, 1e-7);
}

TEST(MultiEquilibrium, RejectsInvalidCell) {
    EXPECT_THROW(multi_equilibrium(pair(0.9, 0.05, 0.05), {0.4, 0.4}), InvalidInput);
    EXPECT_THROW(multi_equilibrium(pair(1.1, 0.05, 0.05), {0.4}), InvalidInput);
}
