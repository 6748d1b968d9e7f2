#pragma once

// Data types and governing equations of the factory/product plasticity model.
//
// One factory-product pair evolves as
//
//   dF/dt = (G - K*P - sum_{j!=i} O_ij*F_j) * F
//   dP/dt = (R - I*P) * F - C*P
//
// where C is the environmental consumption rate. With a single factory the
// opposition sum is empty and the classic two-equation form is recovered.
// Quantities are dimensionless; "factory units" and "product units" are nominal.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plasticell/errors.hpp"

namespace plasticell {

/// Intrinsic rates of one factory-product pair.
struct FactoryParams {
    double growth = 1.0;                ///< G, factory self-replication rate
    double growth_inhibition = 1.0;     ///< K, inhibition of factory growth by product
    double synthesis = 1.0;             ///< R, product synthesis per unit factory
    double synthesis_inhibition = 1.0;  ///< I, inhibition of synthesis by product

    /// Validating constructor; throws InvalidInput unless all four rates are
    /// finite and strictly positive. Stability is reported, not enforced: see
    /// stable().
    static FactoryParams checked(double g, double k, double r, double i) {
        FactoryParams p{g, k, r, i};
        if (!p.positive()) {
            throw InvalidInput("factory rates must be finite and strictly positive (G=" +
                               std::to_string(g) + ", K=" + std::to_string(k) +
                               ", R=" + std::to_string(r) + ", I=" + std::to_string(i) + ")");
        }
        return p;
    }

    /// Rates for prescribed (P_inf, P_lim) with G = R = 1.
    static FactoryParams from_levels(double steady_product, double limit_product) {
        return checked(1.0, 1.0 / steady_product, 1.0, 1.0 / limit_product);
    }

    /// P_inf = G/K.
    double steady_product() const noexcept { return growth / growth_inhibition; }
    /// P_lim = R/I.
    double limit_product() const noexcept { return synthesis / synthesis_inhibition; }

    bool positive() const noexcept {
        auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
        return ok(growth) && ok(growth_inhibition) && ok(synthesis) && ok(synthesis_inhibition);
    }

    /// Strict G/K < R/I. Equality is treated as unstable: the equilibrium
    /// factory level has a zero denominator there.
    bool stable() const noexcept { return steady_product() < limit_product(); }

    friend bool operator==(const FactoryParams&, const FactoryParams&) = default;
};

/// Reparameterized view: (P_inf, P_lim, F_min).
struct DerivedParams {
    double steady_product;   ///< P_inf = G/K
    double limit_product;    ///< P_lim = R/I
    double minimum_factory;  ///< F_min = C/R

    bool stable() const noexcept { return steady_product < limit_product; }
};

inline DerivedParams derived_params(const FactoryParams& params, double consumption) {
    if (!params.positive()) throw InvalidInput("derived_params: rates must be strictly positive");
    if (!(consumption >= 0.0) || !std::isfinite(consumption)) {
        throw InvalidInput("derived_params: consumption must be finite and >= 0");
    }
    return {params.steady_product(), params.limit_product(), consumption / params.synthesis};
}

/// Square matrix of opposition rates O_ij (effect of factory j on factory i).
class OppositionMatrix {
  public:
    OppositionMatrix() = default;
    explicit OppositionMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    /// From nested rows. Throws InvalidInput if not square.
    static OppositionMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        OppositionMatrix m(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) throw InvalidInput("opposition matrix must be square");
            for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    static OppositionMatrix symmetric(std::size_t n, double value) {
        OppositionMatrix m(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) m(i, j) = value;
        return m;
    }

    /// Two-factory matrix with O_12 = o12 and O_21 = o21.
    static OppositionMatrix pair(double o12, double o21) {
        OppositionMatrix m(2);
        m(0, 1) = o12;
        m(1, 0) = o21;
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

    std::vector<std::vector<double>> rows() const {
        std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) out[i][j] = (*this)(i, j);
        return out;
    }

    friend bool operator==(const OppositionMatrix&, const OppositionMatrix&) = default;

  private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// N factories plus their opposition matrix.
struct CellSpec {
    std::vector<FactoryParams> factories;
    OppositionMatrix opposition;

    static CellSpec single(const FactoryParams& p) { return {{p}, OppositionMatrix(1)}; }

    std::size_t size() const noexcept { return factories.size(); }
    bool well_formed() const noexcept { return !factories.empty() && opposition.size() == factories.size(); }

    friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

/// Instantaneous factory and product quantities.
struct CellState {
    std::vector<double> factory;
    std::vector<double> product;

    static CellState single(double f, double p) { return {{f}, {p}}; }

    std::size_t size() const noexcept { return factory.size(); }

    bool nonnegative() const noexcept {
        auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
        return std::all_of(factory.begin(), factory.end(), ok) &&
               std::all_of(product.begin(), product.end(), ok);
    }

    /// Factories first, then products.
    std::vector<double> flatten() const {
        std::vector<double> out(factory);
        out.insert(out.end(), product.begin(), product.end());
        return out;
    }

    friend bool operator==(const CellState&, const CellState&) = default;
};

/// Time derivative of a CellState.
struct CellRate {
    std::vector<double> factory;
    std::vector<double> product;

    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : factory) m = std::max(m, std::abs(v));
        for (double v : product) m = std::max(m, std::abs(v));
        return m;
    }
};

struct StimulusSegment {
    double start;        ///< time at which this consumption rate takes effect
    double consumption;  ///< C >= 0

    friend bool operator==(const StimulusSegment&, const StimulusSegment&) = default;
};

/// Piecewise-constant consumption schedule, one segment list per factory.
/// Each list starts at t = 0 with strictly increasing start times.
class StimulusProfile {
  public:
    StimulusProfile() = default;

    StimulusProfile(std::vector<std::vector<StimulusSegment>> segments, double horizon)
        : segments_(std::move(segments)), horizon_(horizon) {
        if (segments_.empty()) throw InvalidInput("stimulus profile needs at least one factory");
        if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
            throw InvalidInput("stimulus horizon must be finite and positive");
        }
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& list = segments_[i];
            const std::string who = "stimulus for factory " + std::to_string(i + 1);
            if (list.empty()) throw InvalidInput(who + " has no segments");
            if (list.front().start != 0.0) throw InvalidInput(who + " must start at t = 0");
            for (std::size_t k = 0; k < list.size(); ++k) {
                if (!(list[k].consumption >= 0.0) || !std::isfinite(list[k].consumption)) {
                    throw InvalidInput(who + ": consumption must be finite and >= 0");
                }
                if (k > 0 && !(list[k].start > list[k - 1].start)) {
                    throw InvalidInput(who + ": segment start times must be strictly increasing");
                }
            }
        }
    }

    static StimulusProfile constant(const std::vector<double>& consumption, double horizon) {
        std::vector<std::vector<StimulusSegment>> seg;
        for (double c : consumption) seg.push_back({{0.0, c}});
        return {std::move(seg), horizon};
    }

    std::size_t size() const noexcept { return segments_.size(); }
    double horizon() const noexcept { return horizon_; }
    const std::vector<StimulusSegment>& segments(std::size_t factory) const { return segments_.at(factory); }

    /// Consumption in force at time t (segments are closed on the left).
    std::vector<double> at(double t) const {
        std::vector<double> c(segments_.size());
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& list = segments_[i];
            auto it = std::upper_bound(list.begin(), list.end(), t,
                                       [](double x, const StimulusSegment& s) { return x < s.start; });
            c[i] = (it == list.begin()) ? list.front().consumption : std::prev(it)->consumption;
        }
        return c;
    }

    /// Sorted, de-duplicated segment starts strictly inside (0, horizon).
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        for (const auto& list : segments_)
            for (const auto& s : list)
                if (s.start > 0.0 && s.start < horizon_) out.push_back(s.start);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    friend bool operator==(const StimulusProfile&, const StimulusProfile&) = default;

  private:
    std::vector<std::vector<StimulusSegment>> segments_;
    double horizon_ = 0.0;
};

namespace detail {

// Unchecked right-hand side used by the integrators.
inline void evaluate_rates(const CellSpec& spec, std::span<const double> f, std::span<const double> p,
                           std::span<const double> c, std::span<double> df, std::span<double> dp) noexcept {
    const std::size_t n = spec.factories.size();
    for (std::size_t i = 0; i < n; ++i) {
        const FactoryParams& q = spec.factories[i];
        double opposed = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) opposed += spec.opposition(i, j) * f[j];
        df[i] = (q.growth - q.growth_inhibition * p[i] - opposed) * f[i];
        dp[i] = (q.synthesis - q.synthesis_inhibition * p[i]) * f[i] - c[i] * p[i];
    }
}

inline void require_shape(const CellSpec& spec, std::size_t state_size, std::size_t c_size, const char* who) {
    if (!spec.well_formed()) {
        throw InvalidInput(std::string(who) + ": spec must have N >= 1 factories and an N x N opposition matrix");
    }
    if (state_size != spec.size() || c_size != spec.size()) {
        throw InvalidInput(std::string(who) + ": dimension mismatch (spec N=" + std::to_string(spec.size()) +
                           ", state " + std::to_string(state_size) + ", consumption " +
                           std::to_string(c_size) + ")");
    }
}

}  // namespace detail

/// Right-hand side of the model. Rejects negative state or consumption.
inline CellRate derivative(const CellSpec& spec, const CellState& state, std::span<const double> consumption) {
    detail::require_shape(spec, state.size(), consumption.size(), "derivative");
    if (state.product.size() != state.factory.size()) throw InvalidInput("derivative: F and P sizes differ");
    if (!state.nonnegative()) throw InvalidInput("derivative: state components must be finite and >= 0");
    for (double c : consumption)
        if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("derivative: consumption must be finite and >= 0");

    CellRate out{std::vector<double>(spec.size()), std::vector<double>(spec.size())};
    detail::evaluate_rates(spec, state.factory, state.product, consumption, out.factory, out.product);
    return out;
}

inline CellRate derivative(const CellSpec& spec, const CellState& state, const std::vector<double>& consumption) {
    return derivative(spec, state, std::span<const double>(consumption));
}

// ---------------------------------------------------------------------------
// Validation

enum class Issue {
    dimension_mismatch,
    nonpositive_rate,
    stability_violated,
    negative_opposition,
    nonzero_diagonal,
    nonfinite_opposition,
    tau_ordering_violated,
};

inline const char* to_string(Issue issue) {
    switch (issue) {
        case Issue::dimension_mismatch: return "dimension-mismatch";
        case Issue::nonpositive_rate: return "nonpositive-rate";
        case Issue::stability_violated: return "stability-violated";
        case Issue::negative_opposition: return "negative-opposition";
        case Issue::nonzero_diagonal: return "nonzero-diagonal";
        case Issue::nonfinite_opposition: return "nonfinite-opposition";
        case Issue::tau_ordering_violated: return "tau-ordering-violated";
    }
    return "unknown";
}

struct Violation {
    Issue issue;
    std::optional<std::size_t> factory;  ///< zero-based; empty for cell-wide issues
    std::string message;
};

struct FactoryStatus {
    bool positive = false;
    bool stable = false;
    double ratio = 0.0;                ///< P_inf / P_lim, < 1 when stable
    std::optional<bool> tau_ordering;  ///< filled only when a time-constant check ran
};

struct ValidationReport {
    std::vector<FactoryStatus> factories;
    std::vector<Violation> violations;

    bool valid() const noexcept { return violations.empty(); }

    void add(Issue issue, std::optional<std::size_t> factory, std::string message) {
        violations.push_back({issue, factory, std::move(message)});
    }
};

/// Checks positivity of every rate, the stability criterion per factory, and
/// the sign/diagonal constraints on the opposition matrix. Never throws.
inline ValidationReport validate(const CellSpec& spec) {
    ValidationReport report;
    if (spec.factories.empty()) {
        report.add(Issue::dimension_mismatch, std::nullopt, "cell has no factories");
        return report;
    }
    if (spec.opposition.size() != spec.size()) {
        report.add(Issue::dimension_mismatch, std::nullopt,
                   "opposition matrix is " + std::to_string(spec.opposition.size()) + "x" +
                       std::to_string(spec.opposition.size()) + " but the cell has " +
                       std::to_string(spec.size()) + " factories");
    }

    for (std::size_t i = 0; i < spec.size(); ++i) {
        const FactoryParams& q = spec.factories[i];
        FactoryStatus st;
        st.positive = q.positive();
        if (!st.positive) {
            report.add(Issue::nonpositive_rate, i, "G, K, R and I must all be strictly positive");
        } else {
            st.ratio = q.steady_product() / q.limit_product();
            st.stable = q.stable();
            if (!st.stable) {
                report.add(Issue::stability_violated, i,
                           "requires G/K < R/I, got G/K = " + std::to_string(q.steady_product()) +
                               " >= R/I = " + std::to_string(q.limit_product()));
            }
        }
        report.factories.push_back(st);
    }

    if (spec.opposition.size() == spec.size()) {
        for (std::size_t i = 0; i < spec.size(); ++i) {
            for (std::size_t j = 0; j < spec.size(); ++j) {
                const double o = spec.opposition(i, j);
                const std::string at = "O[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]";
                if (!std::isfinite(o)) {
                    report.add(Issue::nonfinite_opposition, i, at + " is not finite");
                } else if (i == j && o != 0.0) {
                    report.add(Issue::nonzero_diagonal, i, at + " must be 0");
                } else if (o < 0.0) {
                    report.add(Issue::negative_opposition, i, at + " = " + std::to_string(o) + " is negative");
                }
            }
        }
    }
    return report;
}

}  // namespace plasticell
