#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "plasticell/servo.hpp"

using namespace plasticell;

namespace {

IntegratorConfig sparse() {
    IntegratorConfig cfg;
    cfg.output_stride = 100;
    return cfg;
}

double gain_at(const JointTrajectory& tr, double t) {
    const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t - 1e-9);
    return tr.gain[static_cast<std::size_t>(it - tr.times.begin())];
}

}  // namespace

TEST(JointDrive, SaturatesAtAvailableTorque) {
    const auto d = detail::joint_drive(0.0, 0.5, 4.0, 1.0);
    EXPECT_DOUBLE_EQ(d.applied, -1.0);
    EXPECT_DOUBLE_EQ(d.consumption, 1.0);
    const auto e = detail::joint_drive(0.0, -0.1, 2.0, 1.0);
    EXPECT_DOUBLE_EQ(e.applied, 0.2);
    EXPECT_DOUBLE_EQ(e.consumption, 0.2);
}

TEST(JointSpec, RejectsBadSpecs) {
    JointSpec j;
    j.inertia = 0;
    EXPECT_THROW(j.check(), InvalidInput);
    j = JointSpec{};
    j.perturbation = {{1.0, 0.2}};
    EXPECT_THROW(j.check(), InvalidInput);
    j.perturbation = {{0.0, 0.2}, {0.0, 0.3}};
    EXPECT_THROW(j.check(), InvalidInput);
    EXPECT_THROW(simulate_joint(JointSpec{}, 0.0), InvalidInput);
}

TEST(JointSpec, PerturbationLookup) {
    JointSpec j;
    j.perturbation = {{0, 0.1}, {5, 0.3}};
    EXPECT_DOUBLE_EQ(j.perturbation_at(4.99), 0.1);
    EXPECT_DOUBLE_EQ(j.perturbation_at(5.0), 0.3);
}

TEST(Servo, SustainedLoadScalesGain) {
    // Steady gain is the plasticity equilibrium at C = |load|: 10 * load here.
    const JointTrajectory light = simulate_joint(loaded_joint(0.1), 400.0, sparse());
    const JointTrajectory heavy = simulate_joint(loaded_joint(0.3), 400.0, sparse());
    EXPECT_NEAR(light.gain.back(), 1.0, 1e-3);
    EXPECT_NEAR(heavy.gain.back(), 3.0, 1e-3);
    EXPECT_NEAR(light.angle.back(), 0.1, 1e-3);  // load / gain
}

TEST(Servo, UnloadedJointLosesGain) {
    const JointTrajectory tr = simulate_joint(loaded_joint(0.0), 100.0, sparse());
    EXPECT_LT(tr.gain.back(), 1e-3);
    EXPECT_DOUBLE_EQ(tr.consumption.back(), 0.0);
}

TEST(Servo, BreakpointsAreSampled) {
    JointSpec j = loaded_joint(0.1);
    j.perturbation = {{0, 0.1}, {10.005, 0.2}, {12.005, 0.1}};
    const JointTrajectory tr = simulate_joint(j, 20.0, sparse());
    EXPECT_NE(std::find(tr.times.begin(), tr.times.end(), 10.005), tr.times.end());
    EXPECT_NE(std::find(tr.times.begin(), tr.times.end(), 12.005), tr.times.end());
    EXPECT_DOUBLE_EQ(tr.times.back(), 20.0);
}

TEST(Servo, BriefExtraLoadBarelyChangesGain) {
    JointSpec j = loaded_joint(0.1);
    j.perturbation = {{0, 0.1}, {300, 0.2}, {302, 0.1}};
    const JointTrajectory tr = simulate_joint(j, 310.0, sparse());
    const double before = gain_at(tr, 300.0), after = gain_at(tr, 302.0);
    EXPECT_LT(std::abs(after - before), 0.1 * before);
}
