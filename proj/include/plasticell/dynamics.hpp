#pragma once

// Fixed-step classical Runge-Kutta integration of the cell model under
// piecewise-constant stimulus profiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "plasticell/core_model.hpp"
#include "plasticell/errors.hpp"

namespace plasticell {

struct IntegratorConfig {
    double step = 0.01;
    int output_stride = 1;  ///< emit one sample every `output_stride` steps
    double steady_tol = 1e-9;
    double max_time = 1e4;
    /// Any factory above this level aborts integration with DivergenceError.
    double escape_bound = std::numeric_limits<double>::infinity();

    void check() const {
        if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInput("integrator step must be finite and > 0");
        if (output_stride < 1) throw InvalidInput("integrator output_stride must be >= 1");
        if (!(steady_tol > 0.0)) throw InvalidInput("integrator steady_tol must be > 0");
        if (!(max_time > 0.0)) throw InvalidInput("integrator max_time must be > 0");
        if (!(escape_bound > 0.0)) throw InvalidInput("integrator escape_bound must be > 0");
    }
};

/// Sampled solution. Breakpoints of the stimulus are always sampled, carrying
/// the consumption that takes effect there.
struct Trajectory {
    std::vector<double> times;
    std::vector<CellState> states;
    std::vector<std::vector<double>> stimulus;
    std::vector<std::vector<double>> net_production;  ///< R_i - I_i * P_i

    std::size_t size() const noexcept { return times.size(); }
};

struct SteadyState {
    CellState state;
    double elapsed = 0.0;
};

namespace detail {

/// Magnitude below which a negative component is treated as rounding dust.
inline constexpr double negative_dust = 1e-12;

/// Classical RK4 over a flat state vector. `Rhs` is callable as
/// `void(std::span<const double> y, std::span<double> dydt)`.
class Rk4 {
  public:
    explicit Rk4(std::size_t n) : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

    template <class Rhs>
    void step(Rhs&& rhs, std::span<double> y, double h) {
        const std::size_t n = y.size();
        rhs(std::span<const double>(y), std::span<double>(k1_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k1_[i];
        rhs(std::span<const double>(tmp_), std::span<double>(k2_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k2_[i];
        rhs(std::span<const double>(tmp_), std::span<double>(k3_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k3_[i];
        rhs(std::span<const double>(tmp_), std::span<double>(k4_));
        for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

  private:
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/// Right-hand side of the cell model over the flat layout [F..., P...].
class CellRhs {
  public:
    CellRhs(const CellSpec& spec, std::span<const double> consumption)
        : spec_(&spec), c_(consumption), n_(spec.size()) {}

    void set_consumption(std::span<const double> c) { c_ = c; }

    void operator()(std::span<const double> y, std::span<double> dy) const {
        evaluate_rates(*spec_, y.first(n_), y.subspan(n_, n_), c_, dy.first(n_), dy.subspan(n_, n_));
    }

  private:
    const CellSpec* spec_;
    std::span<const double> c_;
    std::size_t n_;
};

/// Number of steps of nominal size h covering a span, tolerant to rounding
/// (2.0 / 0.01 must give 200, not 201).
inline long steps_for(double span, double h) {
    const double raw = span / h;
    const double nearest = std::round(raw);
    if (std::abs(raw - nearest) <= 1e-9 * std::max(1.0, nearest)) return std::max(1L, static_cast<long>(nearest));
    return std::max(1L, static_cast<long>(std::ceil(raw)));
}

/// Clamps rounding dust, rejects real negatives and non-finite values.
/// `previous` is the state before the step (for diagnostics).
inline void sanitize(std::span<double> y, std::span<const double> previous, std::size_t n_factories, double t,
                     double escape_bound) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) {
            throw DivergenceError("state became non-finite at t = " + std::to_string(t), t,
                                  std::vector<double>(previous.begin(), previous.end()));
        }
        if (y[i] < 0.0) {
            if (y[i] > -negative_dust) {
                y[i] = 0.0;
            } else {
                throw StepSizeError("component " + std::to_string(i) + " went negative (" + std::to_string(y[i]) +
                                        ") at t = " + std::to_string(t) + "; reduce the step size",
                                    t);
            }
        }
    }
    for (std::size_t i = 0; i < n_factories; ++i) {
        if (y[i] > escape_bound) {
            throw DivergenceError("factory " + std::to_string(i + 1) + " escaped bound " +
                                      std::to_string(escape_bound) + " at t = " + std::to_string(t),
                                  t, std::vector<double>(previous.begin(), previous.end()));
        }
    }
}

inline CellState unflatten(std::span<const double> y, std::size_t n) {
    return {std::vector<double>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)),
            std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(n), y.end())};
}

inline void check_initial(const CellSpec& spec, const CellState& initial, std::size_t c_size, const char* who) {
    require_shape(spec, initial.size(), c_size, who);
    if (initial.product.size() != initial.factory.size()) throw InvalidInput(std::string(who) + ": F and P sizes differ");
    if (!initial.nonnegative()) throw InvalidInput(std::string(who) + ": initial state must be finite and >= 0");
}

}  // namespace detail

/// Integrates from t = 0 to the profile horizon. No step straddles a stimulus
/// breakpoint: each constant segment is integrated on its own grid
/// a, a+h, ..., with the last step shortened to land exactly on the boundary.
inline Trajectory integrate(const CellSpec& spec, const CellState& initial, const StimulusProfile& profile,
                            const IntegratorConfig& cfg) {
    cfg.check();
    detail::check_initial(spec, initial, profile.size(), "integrate");

    const std::size_t n = spec.size();
    std::vector<double> cuts{0.0};
    for (double b : profile.breakpoints()) cuts.push_back(b);
    cuts.push_back(profile.horizon());

    Trajectory out;
    std::vector<double> y = initial.flatten();
    std::vector<double> prev(y.size());
    detail::Rk4 rk(y.size());

    auto record = [&](double t, const std::vector<double>& c) {
        out.times.push_back(t);
        out.states.push_back(detail::unflatten(y, n));
        out.stimulus.push_back(c);
        std::vector<double> pr(n);
        for (std::size_t i = 0; i < n; ++i)
            pr[i] = spec.factories[i].synthesis - spec.factories[i].synthesis_inhibition * y[n + i];
        out.net_production.push_back(std::move(pr));
    };

    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s];
        const double b = cuts[s + 1];
        const std::vector<double> c = profile.at(a);
        detail::CellRhs rhs(spec, c);
        const long steps = detail::steps_for(b - a, cfg.step);

        record(a, c);
        for (long k = 0; k < steps; ++k) {
            const double t0 = a + static_cast<double>(k) * cfg.step;
            const double t1 = (k + 1 == steps) ? b : a + static_cast<double>(k + 1) * cfg.step;
            prev = y;
            rk.step(rhs, y, t1 - t0);
            detail::sanitize(y, prev, n, t1, cfg.escape_bound);
            if (k + 1 < steps && (k + 1) % cfg.output_stride == 0) record(t1, c);
        }
        if (s + 2 == cuts.size()) record(b, c);
    }
    return out;
}

/// Integrates under constant consumption until max |dX/dt| < steady_tol,
/// checked every `output_stride` steps. Throws TimeoutError at max_time.
inline SteadyState run_to_steady(const CellSpec& spec, const CellState& initial, const std::vector<double>& consumption,
                                 const IntegratorConfig& cfg) {
    cfg.check();
    detail::check_initial(spec, initial, consumption.size(), "run_to_steady");
    for (double c : consumption)
        if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("run_to_steady: consumption must be finite and >= 0");

    const std::size_t n = spec.size();
    std::vector<double> y = initial.flatten();
    std::vector<double> prev(y.size()), rate(y.size());
    detail::CellRhs rhs(spec, consumption);
    detail::Rk4 rk(y.size());

    auto steady = [&] {
        rhs(y, rate);
        double m = 0.0;
        for (double v : rate) m = std::max(m, std::abs(v));
        return m < cfg.steady_tol;
    };

    const long max_steps = detail::steps_for(cfg.max_time, cfg.step);
    if (steady()) return {initial, 0.0};
    for (long k = 0; k < max_steps; ++k) {
        const double t1 = static_cast<double>(k + 1) * cfg.step;
        prev = y;
        rk.step(rhs, y, cfg.step);
        detail::sanitize(y, prev, n, t1, cfg.escape_bound);
        if ((k + 1) % cfg.output_stride == 0 && steady()) return {detail::unflatten(y, n), t1};
    }
    throw TimeoutError("no steady state within max_time = " + std::to_string(cfg.max_time), y);
}

// ---------------------------------------------------------------------------
// Boundedness probe

enum class Boundedness { converged, escaped, undecided };

inline const char* to_string(Boundedness b) {
    switch (b) {
        case Boundedness::converged: return "converged";
        case Boundedness::escaped: return "escaped";
        case Boundedness::undecided: return "undecided";
    }
    return "unknown";
}

struct BoundednessConfig {
    double escape_bound = 1e6;  ///< factory level that counts as escape
    /// Converged once max |dX/dt| <= relative_tol * max(1, max |X|).
    double relative_tol = 1e-9;
    double max_step = 0.01;
    /// Step is max_step capped by stability_factor / (local spectral radius).
    double stability_factor = 1.0;
    double max_time = 1e6;
    long max_steps = 200'000'000;
};

struct BoundednessResult {
    Boundedness outcome = Boundedness::undecided;
    CellState state;
    double time = 0.0;
    long steps = 0;
};

namespace detail {

// Upper estimate of the spectral radius of the local Jacobian: exact for
// each factory's own 2x2 block, plus the opposition coupling row sum.
inline double local_stiffness(const CellSpec& spec, std::span<const double> y, std::span<const double> c) {
    const std::size_t n = spec.size();
    double rho = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const FactoryParams& q = spec.factories[i];
        const double f = y[i], p = y[n + i];
        double opposed = 0.0, coupling = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            opposed += spec.opposition(i, j) * y[j];
            coupling += spec.opposition(i, j) * f;
        }
        const double a = q.growth - q.growth_inhibition * p - opposed;
        const double b = -q.growth_inhibition * f;
        const double cc = q.synthesis - q.synthesis_inhibition * p;
        const double d = -q.synthesis_inhibition * f - c[i];
        const double tr = a + d, det = a * d - b * cc;
        const double disc = 0.25 * tr * tr - det;
        const double lam = disc >= 0.0 ? std::abs(0.5 * tr) + std::sqrt(disc) : std::sqrt(std::max(det, 0.0));
        rho = std::max(rho, lam + coupling);
    }
    return rho;
}

}  // namespace detail

/// Decides by simulation whether a trajectory settles or runs away. The step
/// is re-chosen every few steps from the local stiffness so that runaway
/// factory levels (where dP/dt relaxes at rate ~ I*F) stay resolvable.
inline BoundednessResult probe_boundedness(const CellSpec& spec, const CellState& initial,
                                           const std::vector<double>& consumption, const BoundednessConfig& cfg) {
    detail::check_initial(spec, initial, consumption.size(), "probe_boundedness");
    const std::size_t n = spec.size();
    std::vector<double> y = initial.flatten();
    std::vector<double> prev(y.size()), rate(y.size());
    detail::CellRhs rhs(spec, consumption);
    detail::Rk4 rk(y.size());

    BoundednessResult res;
    double t = 0.0, h = cfg.max_step;
    constexpr long restep_every = 16;

    for (long k = 0; k < cfg.max_steps && t < cfg.max_time; ++k) {
        if (k % restep_every == 0) {
            rhs(y, rate);
            double rmax = 0.0, ymax = 1.0;
            for (double v : rate) rmax = std::max(rmax, std::abs(v));
            for (double v : y) ymax = std::max(ymax, std::abs(v));
            if (rmax <= cfg.relative_tol * ymax) {
                res.outcome = Boundedness::converged;
                break;
            }
            const double rho = detail::local_stiffness(spec, y, consumption);
            h = rho > 0.0 ? std::min(cfg.max_step, cfg.stability_factor / rho) : cfg.max_step;
        }
        prev = y;
        rk.step(rhs, y, h);
        t += h;
        res.steps = k + 1;
        detail::sanitize(y, prev, n, t, std::numeric_limits<double>::infinity());
        if (std::any_of(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n),
                        [&](double f) { return f > cfg.escape_bound; })) {
            res.outcome = Boundedness::escaped;
            break;
        }
    }
    res.state = detail::unflatten(y, n);
    res.time = t;
    return res;
}

}  // namespace plasticell
