#pragma once

// Parametric studies of the plasticity model: time-constant measurement and
// its (P_inf, P_lim) heatmap, the short/long consumption pulse transient,
// two-factory opposition surfaces and the total-capacity map.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "plasticell/analysis.hpp"
#include "plasticell/core_model.hpp"
#include "plasticell/dynamics.hpp"
#include "plasticell/errors.hpp"
#include "plasticell/parallel.hpp"

namespace plasticell {

// ---------------------------------------------------------------------------
// Grids

struct Axis {
    std::string name;
    double min = 0.0;
    double max = 1.0;
    std::size_t count = 1;

    double value(std::size_t k) const {
        if (count <= 1) return min;
        return min + (max - min) * static_cast<double>(k) / static_cast<double>(count - 1);
    }

    std::vector<double> values() const {
        std::vector<double> v(count);
        for (std::size_t k = 0; k < count; ++k) v[k] = value(k);
        return v;
    }

    void check() const {
        if (count == 0) throw InvalidInput("axis '" + name + "' needs at least one point");
        if (!std::isfinite(min) || !std::isfinite(max) || max < min) {
            throw InvalidInput("axis '" + name + "' needs finite min <= max");
        }
    }
};

enum class CellMark { value, invalid, oscillatory, failed };

inline const char* to_string(CellMark m) {
    switch (m) {
        case CellMark::value: return "value";
        case CellMark::invalid: return "invalid";
        case CellMark::oscillatory: return "oscillatory";
        case CellMark::failed: return "failed";
    }
    return "unknown";
}

struct GridCell {
    CellMark mark = CellMark::failed;
    double value = std::numeric_limits<double>::quiet_NaN();  ///< meaningful when finite, whatever the mark
};

/// Rectangular metric grid; cells are stored row-major with x varying fastest.
struct SweepGrid {
    std::string metric;
    Axis x;
    Axis y;
    std::vector<GridCell> cells;

    GridCell& at(std::size_t ix, std::size_t iy) { return cells.at(iy * x.count + ix); }
    const GridCell& at(std::size_t ix, std::size_t iy) const { return cells.at(iy * x.count + ix); }
};

// ---------------------------------------------------------------------------
// Time constants

/// Fraction of a transition that defines one time constant: 1 - 1/e (63.2%).
inline const double time_constant_fraction = 1.0 - std::exp(-1.0);

struct TimeConstantConfig {
    double step = 0.01;
    double max_time = 5e4;
    /// Non-oscillatory runs stop once max |dX/dt| <= settle_tol * |F_after - F_before|;
    /// oscillatory runs stop at the first factory peak.
    double settle_tol = 1e-10;
};

struct TimeConstantResult {
    bool measured = false;
    std::string failure;  ///< why measurement failed, empty otherwise

    double tau_f = std::numeric_limits<double>::quiet_NaN();
    double tau_p = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();  ///< tau_f / tau_p

    /// Linearized variants at the post-step equilibrium: reciprocal of the
    /// slow and fast eigenvalue real parts.
    double linear_tau_f = std::numeric_limits<double>::quiet_NaN();
    double linear_tau_p = std::numeric_limits<double>::quiet_NaN();

    double discriminant = std::numeric_limits<double>::quiet_NaN();
    bool oscillatory = false;  ///< discriminant < 0 at the post-step consumption

    double factory_before = 0.0;  ///< F_inf at the baseline consumption
    double factory_after = 0.0;   ///< F_inf at the stepped consumption
    double factory_peak = 0.0;    ///< max F over the measured response
    double product_trough = 0.0;  ///< first extremum of P after the step
    /// (max F - F_after) / (F_after - F_before), computed without
    /// cancellation; positive when F overshoots its new equilibrium.
    double factory_overshoot = 0.0;
};

/// Measures response times to a step of the minimum factory level
/// F_min: baseline -> baseline + step (consumption C = F_min * R).
///
/// The cell starts at the baseline equilibrium. tau_f is the time for F to
/// cover 63.2% of the way to its new equilibrium. P_inf does not depend on C,
/// so P starts and ends at the same level; tau_p is the time at which P has
/// recovered 63.2% of the way back from its first extremum.
inline TimeConstantResult time_constants(const FactoryParams& params, double f_min_baseline, double f_min_step,
                                         const TimeConstantConfig& cfg = {}) {
    detail::require_params(params, "time_constants");
    if (!params.stable()) detail::throw_non_physical(params, "time_constants");
    if (!(f_min_baseline > 0.0)) throw InvalidInput("time_constants: baseline F_min must be > 0");
    if (!(f_min_step > 0.0)) throw InvalidInput("time_constants: F_min step must be > 0 (a zero step has no transition)");
    if (!(cfg.step > 0.0) || !(cfg.max_time > 0.0)) throw InvalidInput("time_constants: bad step or max_time");

    const double c0 = f_min_baseline * params.synthesis;
    const double c1 = (f_min_baseline + f_min_step) * params.synthesis;

    TimeConstantResult r;
    r.factory_before = single_equilibrium(params, c0).factory;
    r.factory_after = single_equilibrium(params, c1).factory;
    const double p_inf = params.steady_product();

    const JacobianMetrics m = jacobian_metrics(params, c1, EquilibriumPoint::nonzero);
    r.discriminant = m.discriminant;
    r.oscillatory = m.discriminant < 0.0;
    if (r.oscillatory) {
        r.linear_tau_f = r.linear_tau_p = 2.0 / std::abs(m.trace);
    } else {
        const double root = std::sqrt(m.discriminant);
        r.linear_tau_f = 2.0 / (std::abs(m.trace) - root);
        r.linear_tau_p = 2.0 / (std::abs(m.trace) + root);
    }

    // Integrate the deviation from the post-step equilibrium,
    //   u = F - F_after,  v = P - P_inf,
    // with the equilibrium terms cancelled exactly. Sub-ulp overshoots of
    // near-critically damped cells stay representable this way.
    const double k_ = params.growth_inhibition, i_ = params.synthesis_inhibition;
    const double f1 = r.factory_after;
    const double slope = params.synthesis - i_ * p_inf;
    auto rhs = [&](std::span<const double> y, std::span<double> dy) {
        const double f = f1 + y[0];
        dy[0] = -k_ * y[1] * f;
        dy[1] = slope * y[0] - i_ * y[1] * f - c1 * y[1];
    };
    detail::Rk4 rk(2);
    const double u0 = r.factory_before - f1;
    std::vector<double> y{u0, 0.0}, prev(2), rate(2);

    const double u_target = (1.0 - time_constant_fraction) * u0;
    double v_trough = 0.0, v_target = 0.0, u_peak = u0, t = 0.0;
    bool trough_found = false, peak_found = false;

    const long max_steps = detail::steps_for(cfg.max_time, cfg.step);
    for (long k = 0; k < max_steps; ++k) {
        prev = y;
        const double t_prev = t;
        rk.step(rhs, y, cfg.step);
        t = static_cast<double>(k + 1) * cfg.step;
        if (!std::isfinite(y[0]) || !std::isfinite(y[1])) {
            r.failure = "state became non-finite at t = " + std::to_string(t);
            return r;
        }
        if (f1 + y[0] < -detail::negative_dust || p_inf + y[1] < -detail::negative_dust) {
            r.failure = "state went negative at t = " + std::to_string(t) + "; reduce the step size";
            return r;
        }
        auto crossing = [&](double a, double b, double level) {
            return t_prev + (t - t_prev) * (level - a) / (b - a);
        };

        u_peak = std::max(u_peak, y[0]);
        if (std::isnan(r.tau_f) && y[0] >= u_target) r.tau_f = crossing(prev[0], y[0], u_target);

        if (!trough_found) {
            if (y[1] < v_trough) {
                v_trough = y[1];
            } else {
                trough_found = true;
                v_target = (1.0 - time_constant_fraction) * v_trough;
            }
        }
        if (trough_found && std::isnan(r.tau_p) && y[1] >= v_target) r.tau_p = crossing(prev[1], y[1], v_target);
        // du/dt = -K v F changes sign when v turns positive: F has peaked.
        if (trough_found && y[1] > 0.0) peak_found = true;

        if (std::isnan(r.tau_f) || std::isnan(r.tau_p)) continue;
        if (peak_found) break;
        if (!r.oscillatory && (k + 1) % 16 == 0) {
            rhs(y, rate);
            if (std::max(std::abs(rate[0]), std::abs(rate[1])) <= cfg.settle_tol * std::abs(u0)) break;
        }
    }
    r.factory_peak = f1 + u_peak;
    r.factory_overshoot = u_peak / (f1 - r.factory_before);
    r.product_trough = p_inf + v_trough;

    if (std::isnan(r.tau_f) || std::isnan(r.tau_p)) {
        r.failure = std::string("no ") + (std::isnan(r.tau_f) ? "factory" : "product") +
                    " crossing before max_time = " + std::to_string(cfg.max_time);
        return r;
    }
    r.ratio = r.tau_f / r.tau_p;
    r.measured = true;
    return r;
}

/// Adds the empirical tau_f > tau_p check to a validation report.
inline ValidationReport validate(const CellSpec& spec, double f_min_baseline, double f_min_step,
                                 const TimeConstantConfig& cfg = {}) {
    ValidationReport report = validate(spec);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        FactoryStatus& st = report.factories[i];
        if (!st.positive || !st.stable) continue;
        const TimeConstantResult tc = time_constants(spec.factories[i], f_min_baseline, f_min_step, cfg);
        if (!tc.measured) continue;
        st.tau_ordering = tc.tau_f > tc.tau_p;
        if (!*st.tau_ordering) {
            report.add(Issue::tau_ordering_violated, i,
                       "factory responds faster than product: tau_f = " + std::to_string(tc.tau_f) +
                           " <= tau_p = " + std::to_string(tc.tau_p));
        }
    }
    return report;
}

struct TauHeatmapConfig {
    Axis steady_product{"P_inf", 0.1, 5.0, 50};
    Axis limit_product{"P_lim", 0.1, 5.0, 50};
    double f_min_baseline = 0.1;
    double f_min_step = 1.0;
    TimeConstantConfig timing{};
};

struct TauHeatmap {
    /// tau_f / tau_p over x = P_inf, y = P_lim. Oscillatory cells keep their
    /// measured ratio in `value`.
    SweepGrid ratio;
    /// Per-cell measurements, same layout as `ratio.cells`; empty optional for
    /// invalid cells.
    std::vector<std::optional<TimeConstantResult>> details;

    /// Same grid with log10 of the ratio.
    SweepGrid log_ratio() const {
        SweepGrid g = ratio;
        g.metric = "log10(tau_f/tau_p)";
        for (auto& c : g.cells)
            if (std::isfinite(c.value) && c.value > 0.0) c.value = std::log10(c.value);
        return g;
    }

    /// linear_tau_f / linear_tau_p (eigenvalue reciprocals), same marks.
    SweepGrid linear_ratio() const {
        SweepGrid g = ratio;
        g.metric = "linear tau_f/tau_p";
        for (std::size_t k = 0; k < g.cells.size(); ++k)
            if (details[k]) g.cells[k].value = details[k]->linear_tau_f / details[k]->linear_tau_p;
        return g;
    }
};

/// Sweeps (P_inf, P_lim) with G = R = 1, i.e. K = 1/P_inf and I = 1/P_lim,
/// stepping F_min (= C) from baseline to baseline + step.
inline TauHeatmap tau_ratio_heatmap(const TauHeatmapConfig& cfg = {}) {
    cfg.steady_product.check();
    cfg.limit_product.check();
    if (!(cfg.steady_product.min > 0.0) || !(cfg.limit_product.min > 0.0)) {
        throw InvalidInput("tau_ratio_heatmap: product-level ranges must be positive");
    }
    TauHeatmap out;
    out.ratio.metric = "tau_f/tau_p";
    out.ratio.x = cfg.steady_product;
    out.ratio.y = cfg.limit_product;
    const std::size_t nx = cfg.steady_product.count, ny = cfg.limit_product.count;
    out.ratio.cells.assign(nx * ny, {});
    out.details.assign(nx * ny, std::nullopt);

    parallel_for(nx * ny, [&](std::size_t k) {
        const double p_inf = cfg.steady_product.value(k % nx);
        const double p_lim = cfg.limit_product.value(k / nx);
        GridCell& cell = out.ratio.cells[k];
        if (p_inf >= p_lim) {
            cell.mark = CellMark::invalid;
            return;
        }
        const TimeConstantResult tc = time_constants(FactoryParams::from_levels(p_inf, p_lim), cfg.f_min_baseline,
                                                     cfg.f_min_step, cfg.timing);
        cell.value = tc.ratio;
        if (tc.oscillatory) {
            cell.mark = CellMark::oscillatory;
        } else {
            cell.mark = tc.measured ? CellMark::value : CellMark::failed;
        }
        out.details[k] = tc;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Pulse transient

struct PulseProtocol {
    double base_consumption = 0.2;
    double pulse_height = 2.0;
    double short_start = 50.0;
    double short_span = 2.0;
    double long_start = 100.0;
    double long_span = 50.0;
    double horizon = 300.0;
};

struct PulseTransient {
    Trajectory trajectory;
    std::vector<double> minimum_factory;  ///< F_min(t) = C(t)/R per sample

    double baseline_factory = 0.0;  ///< F_inf(c_base)
    double pulse_factory = 0.0;     ///< F_inf(c_base + height)
    double steady_product = 0.0;    ///< P_inf
    double steady_net_production = 0.0;  ///< R - I*P_inf

    double short_peak_rise = 0.0;  ///< max F - baseline F, short pulse until the long one
    double long_peak_rise = 0.0;   ///< max F - baseline F, from the long pulse on
    double long_pulse_peak = 0.0;  ///< max F while the long pulse is applied
    /// Max relative deviation of (F, P) from the baseline equilibrium at the
    /// horizon, for a run with only the short pulse and for the full run.
    double short_recovery_error = 0.0;
    double long_recovery_error = 0.0;
    /// Same deviation at the onset of the long pulse (the short pulse has not
    /// fully decayed yet when the two are close together).
    double interpulse_deviation = 0.0;
};

/// Baseline -> short pulse -> baseline -> long pulse -> baseline, starting at
/// the baseline equilibrium.
inline PulseTransient pulse_transient(const FactoryParams& params, const PulseProtocol& proto = {},
                                      const IntegratorConfig& cfg = {}) {
    detail::require_params(params, "pulse_transient");
    if (!(proto.base_consumption > 0.0)) throw InvalidInput("pulse_transient: base consumption must be > 0");
    if (!(proto.pulse_height > 0.0) || !(proto.short_span > 0.0) || !(proto.long_span > 0.0)) {
        throw InvalidInput("pulse_transient: pulse height and spans must be > 0");
    }
    const double short_end = proto.short_start + proto.short_span;
    const double long_end = proto.long_start + proto.long_span;
    if (!(proto.short_start > 0.0) || !(short_end < proto.long_start) || !(long_end < proto.horizon)) {
        throw InvalidInput("pulse_transient: need 0 < short pulse < long pulse < horizon");
    }

    PulseTransient out;
    const SingleEquilibrium base = single_equilibrium(params, proto.base_consumption);
    out.baseline_factory = base.factory;
    out.pulse_factory = single_equilibrium(params, proto.base_consumption + proto.pulse_height).factory;
    out.steady_product = base.product;
    out.steady_net_production = params.synthesis - params.synthesis_inhibition * base.product;

    const double lo = proto.base_consumption, hi = proto.base_consumption + proto.pulse_height;
    const StimulusProfile profile(
        {{{0.0, lo}, {proto.short_start, hi}, {short_end, lo}, {proto.long_start, hi}, {long_end, lo}}},
        proto.horizon);
    const CellSpec spec = CellSpec::single(params);
    const CellState start = CellState::single(base.factory, base.product);
    out.trajectory = integrate(spec, start, profile, cfg);

    auto deviation_of = [&](const CellState& s) {
        return std::max(std::abs(s.factory[0] - base.factory) / base.factory,
                        std::abs(s.product[0] - base.product) / base.product);
    };
    const Trajectory& tr = out.trajectory;
    auto deviation = [&](std::size_t k) { return deviation_of(tr.states[k]); };
    std::size_t before_long = 0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double t = tr.times[k];
        const double f = tr.states[k].factory[0];
        out.minimum_factory.push_back(tr.stimulus[k][0] / params.synthesis);
        if (t >= proto.short_start && t < proto.long_start) {
            out.short_peak_rise = std::max(out.short_peak_rise, f - base.factory);
            before_long = k;
        }
        if (t >= proto.long_start) out.long_peak_rise = std::max(out.long_peak_rise, f - base.factory);
        if (t >= proto.long_start && t <= long_end) out.long_pulse_peak = std::max(out.long_pulse_peak, f);
    }
    out.interpulse_deviation = deviation(before_long);
    out.long_recovery_error = deviation(tr.size() - 1);

    const StimulusProfile short_only({{{0.0, lo}, {proto.short_start, hi}, {short_end, lo}}}, proto.horizon);
    IntegratorConfig sparse = cfg;
    sparse.output_stride = std::numeric_limits<int>::max();
    const Trajectory alone = integrate(spec, start, short_only, sparse);
    out.short_recovery_error = deviation_of(alone.states.back());
    return out;
}

// ---------------------------------------------------------------------------
// Two-factory opposition studies

struct EquilibriumGrid {
    Axis c1;  ///< consumption of factory 1's product
    Axis c2;
    /// Indexed [i1 * c2.count + i2].
    std::vector<double> factory1;
    std::vector<double> factory2;
    std::vector<bool> failed;

    std::size_t index(std::size_t i1, std::size_t i2) const { return i1 * c2.count + i2; }
};

namespace detail {

inline EquilibriumGrid solve_pair_grid(const CellSpec& spec, double c_min, double c_max, std::size_t resolution,
                                       const SolverOptions& opts) {
    if (spec.size() != 2) throw InvalidInput("two-factory experiment needs exactly 2 factories");
    const ValidationReport vr = validate(spec);
    if (!vr.valid()) throw InvalidInput("invalid cell: " + vr.violations.front().message);
    if (!(c_min > 0.0) || !(c_max >= c_min) || !std::isfinite(c_max)) {
        throw InvalidInput("consumption range must satisfy 0 < min <= max");
    }
    if (resolution == 0) throw InvalidInput("resolution must be >= 1");

    EquilibriumGrid g;
    g.c1 = {"C_1", c_min, c_max, resolution};
    g.c2 = {"C_2", c_min, c_max, resolution};
    const std::size_t n = resolution * resolution;
    g.factory1.assign(n, std::numeric_limits<double>::quiet_NaN());
    g.factory2 = g.factory1;
    std::vector<char> failed(n, 0);
    parallel_for(n, [&](std::size_t k) {
        const std::vector<double> c{g.c1.value(k / resolution), g.c2.value(k % resolution)};
        try {
            const MultiEquilibrium eq = multi_equilibrium(spec, c, opts);
            g.factory1[k] = eq.factory[0];
            g.factory2[k] = eq.factory[1];
        } catch (const NumericalError&) {
            failed[k] = 1;
        }
    });
    g.failed.assign(failed.begin(), failed.end());
    return g;
}

}  // namespace detail

struct CurvePoint {
    double factory1;
    double factory2;
};

struct OppositionSurface {
    EquilibriumGrid grid;

    /// Equilibria at fixed C_1 = c1.value(i1), C_2 sweeping.
    std::vector<CurvePoint> constant_c1(std::size_t i1) const {
        std::vector<CurvePoint> out;
        for (std::size_t i2 = 0; i2 < grid.c2.count; ++i2) {
            const std::size_t k = grid.index(i1, i2);
            if (!grid.failed[k]) out.push_back({grid.factory1[k], grid.factory2[k]});
        }
        return out;
    }

    /// Equilibria at fixed C_2 = c2.value(i2), C_1 sweeping.
    std::vector<CurvePoint> constant_c2(std::size_t i2) const {
        std::vector<CurvePoint> out;
        for (std::size_t i1 = 0; i1 < grid.c1.count; ++i1) {
            const std::size_t k = grid.index(i1, i2);
            if (!grid.failed[k]) out.push_back({grid.factory1[k], grid.factory2[k]});
        }
        return out;
    }
};

/// Steady-state factory levels of a two-factory cell over a square grid of
/// consumption rates. Solver failures are marked per cell.
inline OppositionSurface opposition_surface(const CellSpec& spec, double c_min = 0.1, double c_max = 1.0,
                                            std::size_t resolution = 50, const SolverOptions& opts = {}) {
    return {detail::solve_pair_grid(spec, c_min, c_max, resolution, opts)};
}

struct CapacityMapResult {
    EquilibriumGrid grid;
    std::vector<double> total;          ///< F_1 + F_2 (NaN where failed)
    std::vector<double> total_consumption;  ///< TotCon = C_1 + C_2
};

/// Total factory capacity of a cell with two identical factories and
/// symmetric opposition.
inline CapacityMapResult capacity_map(const CellSpec& spec, double c_min = 0.1, double c_max = 1.0,
                                      std::size_t resolution = 50, const SolverOptions& opts = {}) {
    if (spec.size() != 2) throw InvalidInput("capacity_map needs exactly 2 factories");
    if (!(spec.factories[0] == spec.factories[1])) throw InvalidInput("capacity_map needs identical factories");
    if (spec.opposition(0, 1) != spec.opposition(1, 0)) throw InvalidInput("capacity_map needs symmetric opposition");
    CapacityMapResult out{detail::solve_pair_grid(spec, c_min, c_max, resolution, opts), {}, {}};
    const std::size_t n = out.grid.factory1.size();
    out.total.resize(n);
    out.total_consumption.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.total[k] = out.grid.factory1[k] + out.grid.factory2[k];
        out.total_consumption[k] = out.grid.c1.value(k / resolution) + out.grid.c2.value(k % resolution);
    }
    return out;
}

struct ContourSample {
    double c1;
    double c2;
    double total;
};

/// Total capacity along the line C_1 + C_2 = total_consumption, from
/// (floor, T - floor) to (T - floor, floor).
inline std::vector<ContourSample> totcon_profile(const CellSpec& spec, double total_consumption, std::size_t samples,
                                                 double floor = 1e-3, const SolverOptions& opts = {}) {
    if (samples < 2) throw InvalidInput("totcon_profile needs at least 2 samples");
    if (!(floor > 0.0) || !(total_consumption > 2.0 * floor)) {
        throw InvalidInput("totcon_profile needs 0 < floor < TotCon / 2");
    }
    std::vector<ContourSample> out(samples);
    parallel_for(samples, [&](std::size_t k) {
        const double c1 = floor + (total_consumption - 2.0 * floor) * static_cast<double>(k) /
                                      static_cast<double>(samples - 1);
        const double c2 = total_consumption - c1;
        const MultiEquilibrium eq = multi_equilibrium(spec, {c1, c2}, opts);
        out[k] = {c1, c2, eq.factory[0] + eq.factory[1]};
    });
    return out;
}

}  // namespace plasticell
