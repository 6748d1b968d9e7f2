#pragma once

// Closed-form analysis of the plasticity model: nullclines, equilibria,
// linearization and stability classification, plus an iterative solver for
// the coupled multi-factory steady state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "plasticell/core_model.hpp"
#include "plasticell/dynamics.hpp"
#include "plasticell/errors.hpp"

namespace plasticell {

struct SingleEquilibrium {
    double factory;  ///< F_inf
    double product;  ///< P_inf
};

namespace detail {

inline void require_consumption(double c, const char* who) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput(std::string(who) + ": consumption must be finite and >= 0");
}

inline void require_params(const FactoryParams& p, const char* who) {
    if (!p.positive()) throw InvalidInput(std::string(who) + ": G, K, R, I must be strictly positive");
}

[[noreturn]] inline void throw_non_physical(const FactoryParams& p, const char* who) {
    const double ratio = p.steady_product() / p.limit_product();
    throw NonPhysicalEquilibrium(std::string(who) + ": G/K = " + std::to_string(p.steady_product()) +
                                     " is not below R/I = " + std::to_string(p.limit_product()) +
                                     " (ratio " + std::to_string(ratio) + "); no positive equilibrium",
                                 ratio);
}

}  // namespace detail

/// Nonzero equilibrium of one factory:
///   P_inf = G/K,   F_inf = (C/R) / (K/G - I/R) = F_min / (1/P_inf - 1/P_lim).
/// Evaluated as C*P_inf / (R - I*P_inf), the product nullcline at P_inf,
/// which takes fewer roundings.
/// Throws NonPhysicalEquilibrium when G/K >= R/I.
inline SingleEquilibrium single_equilibrium(const FactoryParams& params, double consumption) {
    detail::require_params(params, "single_equilibrium");
    detail::require_consumption(consumption, "single_equilibrium");
    if (!params.stable()) detail::throw_non_physical(params, "single_equilibrium");
    const double p_inf = params.steady_product();
    return {consumption * p_inf / (params.synthesis - params.synthesis_inhibition * p_inf), p_inf};
}

// ---------------------------------------------------------------------------
// Linearization

enum class EquilibriumPoint { origin, nonzero };

struct JacobianMetrics {
    double trace;         ///< delta
    double determinant;   ///< Delta
    double discriminant;  ///< delta^2 - 4 Delta
};

/// Trace and determinant of the single-factory Jacobian.
///   origin:  trace = G - C, det = -C*G
///   nonzero: trace = -C*P_lim / (P_lim - P_inf), det = C*G
inline JacobianMetrics jacobian_metrics(const FactoryParams& params, double consumption, EquilibriumPoint at) {
    detail::require_params(params, "jacobian_metrics");
    detail::require_consumption(consumption, "jacobian_metrics");
    const double g = params.growth, c = consumption;
    double tr = 0.0, det = 0.0;
    if (at == EquilibriumPoint::origin) {
        tr = g - c;
        det = -c * g;
    } else {
        if (!params.stable()) detail::throw_non_physical(params, "jacobian_metrics");
        const double p_lim = params.limit_product();
        tr = -c * p_lim / (p_lim - params.steady_product());
        det = c * g;
    }
    return {tr, det, tr * tr - 4.0 * det};
}

enum class StabilityClass { stable_node, stable_spiral, unstable, saddle, non_physical };

inline const char* to_string(StabilityClass s) {
    switch (s) {
        case StabilityClass::stable_node: return "stable-node";
        case StabilityClass::stable_spiral: return "stable-spiral";
        case StabilityClass::unstable: return "unstable";
        case StabilityClass::saddle: return "saddle";
        case StabilityClass::non_physical: return "non-physical";
    }
    return "unknown";
}

/// Classification of a planar fixed point from its trace and determinant.
/// Marginal cases (trace = 0 or det = 0) count as unstable.
inline StabilityClass classify_linearization(const JacobianMetrics& m) {
    if (m.determinant < 0.0) return StabilityClass::saddle;
    if (!(m.trace < 0.0) || !(m.determinant > 0.0)) return StabilityClass::unstable;
    return m.discriminant < 0.0 ? StabilityClass::stable_spiral : StabilityClass::stable_node;
}

struct EquilibriumReport {
    std::vector<double> factory;  ///< F*, empty when non-physical
    std::vector<double> product;  ///< P*, empty when non-physical
    double trace = std::numeric_limits<double>::quiet_NaN();
    double determinant = std::numeric_limits<double>::quiet_NaN();
    double discriminant = std::numeric_limits<double>::quiet_NaN();
    StabilityClass stability = StabilityClass::non_physical;
};

/// Equilibrium plus stability class of the nonzero fixed point. Never throws
/// for positive rates: a violated stability criterion is reported as
/// non_physical.
inline EquilibriumReport classify(const FactoryParams& params, double consumption) {
    detail::require_params(params, "classify");
    detail::require_consumption(consumption, "classify");
    EquilibriumReport r;
    if (!params.stable()) return r;
    const SingleEquilibrium eq = single_equilibrium(params, consumption);
    const JacobianMetrics m = jacobian_metrics(params, consumption, EquilibriumPoint::nonzero);
    r.factory = {eq.factory};
    r.product = {eq.product};
    r.trace = m.trace;
    r.determinant = m.determinant;
    r.discriminant = m.discriminant;
    r.stability = classify_linearization(m);
    return r;
}

// ---------------------------------------------------------------------------
// Nullclines and vector field

struct NullclinePoint {
    double product;
    double factory;
};

struct NullclineSet {
    double factory_nullcline_product;  ///< the horizontal line P = G/K (the other one is F = 0)
    double limit_product;              ///< pole of the product nullcline, R/I
    std::vector<NullclinePoint> product_nullcline;  ///< F = C*P / (R - I*P)
};

/// Samples the product nullcline at the given product levels; each must lie
/// in [0, R/I).
inline NullclineSet nullclines(const FactoryParams& params, double consumption, const std::vector<double>& product_samples) {
    detail::require_params(params, "nullclines");
    detail::require_consumption(consumption, "nullclines");
    NullclineSet out{params.steady_product(), params.limit_product(), {}};
    out.product_nullcline.reserve(product_samples.size());
    for (double p : product_samples) {
        if (!(p >= 0.0) || !(p < out.limit_product)) {
            throw InvalidInput("nullclines: sample P = " + std::to_string(p) + " outside [0, P_lim = " +
                               std::to_string(out.limit_product) + ")");
        }
        out.product_nullcline.push_back(
            {p, consumption * p / (params.synthesis - params.synthesis_inhibition * p)});
    }
    return out;
}

/// `count` evenly spaced samples on [0, fraction * P_lim].
inline std::vector<double> nullcline_samples(const FactoryParams& params, std::size_t count, double fraction = 0.95) {
    std::vector<double> s(count);
    const double top = fraction * params.limit_product();
    for (std::size_t k = 0; k < count; ++k)
        s[k] = count == 1 ? 0.0 : top * static_cast<double>(k) / static_cast<double>(count - 1);
    return s;
}

struct VectorField {
    std::vector<double> factory_axis;
    std::vector<double> product_axis;
    /// Indexed [factory index][product index].
    std::vector<std::vector<double>> dfactory;
    std::vector<std::vector<double>> dproduct;
};

inline VectorField vector_field(const FactoryParams& params, double consumption, const std::vector<double>& factory_axis,
                                const std::vector<double>& product_axis) {
    detail::require_params(params, "vector_field");
    const CellSpec spec = CellSpec::single(params);
    const std::vector<double> c{consumption};
    VectorField vf{factory_axis, product_axis, {}, {}};
    vf.dfactory.assign(factory_axis.size(), std::vector<double>(product_axis.size()));
    vf.dproduct = vf.dfactory;
    for (std::size_t i = 0; i < factory_axis.size(); ++i) {
        for (std::size_t j = 0; j < product_axis.size(); ++j) {
            const CellRate r = derivative(spec, CellState::single(factory_axis[i], product_axis[j]), c);
            vf.dfactory[i][j] = r.factory[0];
            vf.dproduct[i][j] = r.product[0];
        }
    }
    return vf;
}

// ---------------------------------------------------------------------------
// Multi-factory steady state

struct SolverOptions {
    double damping = 0.5;
    double tolerance = 1e-10;  ///< on the max fixed-point residual
    int max_iterations = 10'000;
    /// Used when the iteration stalls or the extinct set is inconsistent.
    IntegratorConfig fallback{0.01, 100, 1e-11, 1e5};
    /// Max |dX/dt| accepted when verifying the returned point.
    double verify_tolerance = 1e-7;
};

enum class SolveMethod { closed_form, fixed_point, simulation };

inline const char* to_string(SolveMethod m) {
    switch (m) {
        case SolveMethod::closed_form: return "closed-form";
        case SolveMethod::fixed_point: return "fixed-point";
        case SolveMethod::simulation: return "simulation";
    }
    return "unknown";
}

struct ConvergenceRecord {
    SolveMethod method = SolveMethod::fixed_point;
    int iterations = 0;
    std::vector<double> residuals;      ///< max residual per iteration
    std::vector<std::size_t> extinct;   ///< factories projected to F = 0 (zero-based)
    double max_rate = 0.0;              ///< max |dX/dt| at the returned point
    std::vector<std::string> notes;
};

struct MultiEquilibrium {
    std::vector<double> factory;
    std::vector<double> product;
    ConvergenceRecord record;
};

namespace detail {

inline double net_growth(const CellSpec& spec, const std::vector<double>& f, std::size_t i) {
    double opposed = 0.0;
    for (std::size_t j = 0; j < spec.size(); ++j)
        if (j != i) opposed += spec.opposition(i, j) * f[j];
    return spec.factories[i].growth - opposed;
}

// F_i = F_min,i / (K_i / net_i - 1/P_lim,i); zero once net growth is gone.
inline double factory_target(const FactoryParams& q, double consumption, double net) {
    if (net <= 0.0) return 0.0;
    return (consumption / q.synthesis) / (q.growth_inhibition / net - 1.0 / q.limit_product());
}

inline double max_rate(const CellSpec& spec, const std::vector<double>& f, const std::vector<double>& p,
                       const std::vector<double>& c) {
    std::vector<double> df(f.size()), dp(f.size());
    evaluate_rates(spec, f, p, c, df, dp);
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) m = std::max({m, std::abs(df[i]), std::abs(dp[i])});
    return m;
}

inline std::vector<double> products_for(const CellSpec& spec, const std::vector<double>& f) {
    std::vector<double> p(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        p[i] = std::max(0.0, net_growth(spec, f, i)) / spec.factories[i].growth_inhibition;
    return p;
}

}  // namespace detail

/// Solves the coupled steady state
///   F_i = F_min,i / (K_i / (G_i - sum_j O_ij F_j) - 1/P_lim,i),
///   P_i = (G_i - sum_j O_ij F_j) / K_i
/// by damped fixed-point iteration. A factory whose net growth is driven to
/// zero or below is extinguished (F_i = 0) and the reduced system re-solved.
/// If the iteration stalls, or an extinct factory could re-invade, the
/// dynamics are integrated to steady state instead.
inline MultiEquilibrium multi_equilibrium(const CellSpec& spec, const std::vector<double>& consumption,
                                          const SolverOptions& opts = {}) {
    detail::require_shape(spec, spec.size(), consumption.size(), "multi_equilibrium");
    const ValidationReport vr = validate(spec);
    if (!vr.valid()) throw InvalidInput("multi_equilibrium: invalid cell: " + vr.violations.front().message);
    for (double c : consumption) detail::require_consumption(c, "multi_equilibrium");

    const std::size_t n = spec.size();
    MultiEquilibrium out;
    ConvergenceRecord& rec = out.record;

    std::vector<bool> active(n);
    std::vector<double> f(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        active[i] = consumption[i] > 0.0;
        if (active[i]) f[i] = single_equilibrium(spec.factories[i], consumption[i]).factory;
    }

    bool converged = false;
    for (int it = 0; it < opts.max_iterations; ++it) {
        double residual = 0.0;
        bool extinguished = false;
        std::vector<double> next = f;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            const double net = detail::net_growth(spec, f, i);
            if (net <= 0.0) {
                active[i] = false;
                next[i] = 0.0;
                rec.extinct.push_back(i);
                extinguished = true;
                continue;
            }
            const double target = detail::factory_target(spec.factories[i], consumption[i], net);
            residual = std::max(residual, std::abs(target - f[i]));
            next[i] = (1.0 - opts.damping) * f[i] + opts.damping * target;
        }
        f = std::move(next);
        rec.iterations = it + 1;
        rec.residuals.push_back(residual);
        if (extinguished) continue;
        if (residual < opts.tolerance) {
            converged = true;
            break;
        }
    }

    // An extinct factory with positive net growth at the solution would grow
    // back from any perturbation: the projection was premature.
    bool consistent = true;
    if (converged) {
        for (std::size_t i : rec.extinct) {
            if (detail::net_growth(spec, f, i) > 0.0) {
                consistent = false;
                rec.notes.push_back("factory " + std::to_string(i + 1) +
                                    " was extinguished during iteration but has positive net growth at the solution");
            }
        }
    }

    if (converged && consistent) {
        rec.method = n == 1 ? SolveMethod::closed_form : SolveMethod::fixed_point;
        out.factory = f;
        out.product = detail::products_for(spec, f);
        // F = 0 factories with C = 0 keep whatever P they had; report the
        // formula value for uniformity.
        rec.max_rate = detail::max_rate(spec, out.factory, out.product, consumption);
        if (rec.max_rate <= opts.verify_tolerance) return out;
        rec.notes.push_back("fixed point failed verification (max rate " + std::to_string(rec.max_rate) + ")");
    } else if (!converged) {
        rec.notes.push_back("fixed-point iteration stalled after " + std::to_string(rec.iterations) + " iterations");
    }

    // Simulation fallback from the unopposed equilibria.
    CellState start;
    for (std::size_t i = 0; i < n; ++i) {
        const double f0 = consumption[i] > 0.0 ? single_equilibrium(spec.factories[i], consumption[i]).factory : 0.0;
        start.factory.push_back(std::max(f0, 1e-3));
        start.product.push_back(spec.factories[i].steady_product());
    }
    SteadyState ss;
    try {
        ss = run_to_steady(spec, start, consumption, opts.fallback);
    } catch (const NumericalError& e) {
        throw SolverError(std::string("multi_equilibrium: fixed-point iteration failed and simulation fallback failed: ") +
                              e.what(),
                          rec.residuals);
    }
    rec.method = SolveMethod::simulation;
    if (converged) rec.notes.push_back("ambiguous: fixed point and simulation may disagree; simulation result returned");
    rec.extinct.clear();
    out.factory = ss.state.factory;
    out.product = ss.state.product;
    rec.max_rate = detail::max_rate(spec, out.factory, out.product, consumption);
    return out;
}

}  // namespace plasticell
