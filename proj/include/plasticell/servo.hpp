#pragma once

// Single servo joint whose proportional gain is a factory quantity. The
// product is the torque available to the motor and the torque actually
// delivered is what consumes it, so a joint that is loaded for long enough
// grows a stiffer gain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "plasticell/core_model.hpp"
#include "plasticell/dynamics.hpp"
#include "plasticell/errors.hpp"

namespace plasticell {

struct TorqueSegment {
    double start;
    double torque;

    friend bool operator==(const TorqueSegment&, const TorqueSegment&) = default;
};

struct JointSpec {
    double inertia = 1.0;
    double damping = 0.5;
    double reference = 0.0;  ///< target angle (rad)
    /// Piecewise-constant external torque; first segment starts at t = 0.
    std::vector<TorqueSegment> perturbation{{0.0, 0.0}};
    FactoryParams plasticity{1.0, 1.0, 1.1, 1.0};

    double initial_angle = 0.0;
    double initial_velocity = 0.0;
    double initial_gain = 1.0;       ///< initial factory level F
    double initial_available = 1.0;  ///< initial product level P

    void check() const {
        if (!(inertia > 0.0) || !std::isfinite(inertia)) throw InvalidInput("joint inertia must be > 0");
        if (!(damping >= 0.0) || !std::isfinite(damping)) throw InvalidInput("joint damping must be >= 0");
        if (!plasticity.positive()) throw InvalidInput("joint plasticity rates must be strictly positive");
        if (perturbation.empty() || perturbation.front().start != 0.0) {
            throw InvalidInput("perturbation profile must start at t = 0");
        }
        for (std::size_t k = 1; k < perturbation.size(); ++k)
            if (!(perturbation[k].start > perturbation[k - 1].start)) {
                throw InvalidInput("perturbation segment starts must be strictly increasing");
            }
        for (const auto& s : perturbation)
            if (!std::isfinite(s.torque)) throw InvalidInput("perturbation torque must be finite");
        if (!(initial_gain >= 0.0) || !(initial_available >= 0.0)) {
            throw InvalidInput("initial gain and available torque must be >= 0");
        }
    }

    double perturbation_at(double t) const {
        auto it = std::upper_bound(perturbation.begin(), perturbation.end(), t,
                                   [](double x, const TorqueSegment& s) { return x < s.start; });
        return it == perturbation.begin() ? perturbation.front().torque : std::prev(it)->torque;
    }
};

struct JointTrajectory {
    std::vector<double> times;
    std::vector<double> angle;
    std::vector<double> velocity;
    std::vector<double> gain;       ///< F
    std::vector<double> available;  ///< P
    std::vector<double> applied;    ///< torque delivered by the motor
    std::vector<double> consumption;
    std::vector<double> perturbation;

    std::size_t size() const noexcept { return times.size(); }
};

namespace detail {

struct JointDrive {
    double applied;
    double consumption;
};

// Desired torque F*(ref - angle), limited to the available torque P.
inline JointDrive joint_drive(double reference, double angle, double gain, double available) {
    const double desired = gain * (reference - angle);
    const double cap = std::max(available, 0.0);
    const double applied = std::clamp(desired, -cap, cap);
    return {applied, std::abs(applied)};
}

}  // namespace detail

/// Co-integrates  inertia * angle'' = applied + perturbation - damping * angle'
/// with the plasticity model of the gain, using C(t) = |applied torque|.
inline JointTrajectory simulate_joint(const JointSpec& spec, double duration, const IntegratorConfig& cfg = {}) {
    spec.check();
    cfg.check();
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidInput("simulate_joint: duration must be > 0");

    const FactoryParams& q = spec.plasticity;
    double perturb = 0.0;
    auto rhs = [&](std::span<const double> y, std::span<double> dy) {
        const detail::JointDrive d = detail::joint_drive(spec.reference, y[0], y[2], y[3]);
        dy[0] = y[1];
        dy[1] = (d.applied + perturb - spec.damping * y[1]) / spec.inertia;
        dy[2] = (q.growth - q.growth_inhibition * y[3]) * y[2];
        dy[3] = (q.synthesis - q.synthesis_inhibition * y[3]) * y[2] - d.consumption * y[3];
    };

    std::vector<double> cuts{0.0};
    for (const auto& s : spec.perturbation)
        if (s.start > 0.0 && s.start < duration) cuts.push_back(s.start);
    cuts.push_back(duration);

    JointTrajectory out;
    std::vector<double> y{spec.initial_angle, spec.initial_velocity, spec.initial_gain, spec.initial_available};
    std::vector<double> prev(4);
    detail::Rk4 rk(4);

    auto record = [&](double t) {
        const detail::JointDrive d = detail::joint_drive(spec.reference, y[0], y[2], y[3]);
        out.times.push_back(t);
        out.angle.push_back(y[0]);
        out.velocity.push_back(y[1]);
        out.gain.push_back(y[2]);
        out.available.push_back(y[3]);
        out.applied.push_back(d.applied);
        out.consumption.push_back(d.consumption);
        out.perturbation.push_back(perturb);
    };

    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        perturb = spec.perturbation_at(a);
        const long steps = detail::steps_for(b - a, cfg.step);
        record(a);
        for (long k = 0; k < steps; ++k) {
            const double t0 = a + static_cast<double>(k) * cfg.step;
            const double t1 = (k + 1 == steps) ? b : a + static_cast<double>(k + 1) * cfg.step;
            std::copy(y.begin(), y.end(), prev.begin());
            rk.step(rhs, y, t1 - t0);
            for (double v : y) {
                if (!std::isfinite(v)) {
                    throw DivergenceError("joint state became non-finite at t = " + std::to_string(t1), t1, prev);
                }
            }
            // Only F and P are sign-constrained.
            for (std::size_t i = 2; i < 4; ++i) {
                if (y[i] < 0.0) {
                    if (y[i] > -detail::negative_dust) {
                        y[i] = 0.0;
                    } else {
                        throw StepSizeError("joint gain or available torque went negative at t = " +
                                                std::to_string(t1) + "; reduce the step size",
                                            t1);
                    }
                }
            }
            if (k + 1 < steps && (k + 1) % cfg.output_stride == 0) record(t1);
        }
        if (s + 2 == cuts.size()) record(b);
    }
    return out;
}

/// The default joint under a constant load, started at rest at the
/// reference with unit gain and available torque.
inline JointSpec loaded_joint(double torque) {
    JointSpec j;
    j.perturbation = {{0.0, torque}};
    return j;
}

}  // namespace plasticell
