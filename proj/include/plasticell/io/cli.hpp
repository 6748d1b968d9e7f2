#pragma once

// Command-line front end. Exit codes: 0 success, 1 configuration or input
// problem, 2 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plasticell/analysis.hpp"
#include "plasticell/core_model.hpp"
#include "plasticell/dynamics.hpp"
#include "plasticell/errors.hpp"
#include "plasticell/experiments.hpp"
#include "plasticell/io/config.hpp"
#include "plasticell/io/serialize.hpp"
#include "plasticell/servo.hpp"

namespace plasticell::io {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_numerical = 2 };

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"simulate",           "equilibrium",  "nullclines", "phase-portrait",
                                                "tau-heatmap",        "pulse-demo",   "opposition-surface",
                                                "capacity-map",       "servo-demo",   "validate"};
    return names;
}

namespace detail {

inline json factory_json(double g, double k, double r, double i) { return {{"G", g}, {"K", k}, {"R", r}, {"I", i}}; }

inline json single_cell(double r) {
    return {{"factories", json::array({factory_json(1, 1, r, 1)})}, {"opposition", {{0}}}};
}

inline json pair_cell(double r, double o) {
    return {{"factories", json::array({factory_json(1, 1, r, 1), factory_json(1, 1, r, 1)})},
            {"opposition", {{0, o}, {o, 0}}}};
}

inline json constant_stimulus(std::size_t n, double c, double horizon) {
    json segs = json::array();
    for (std::size_t i = 0; i < n; ++i) segs.push_back(json::array({{{"t", 0}, {"c", c}}}));
    return {{"horizon", horizon}, {"segments", segs}};
}

}  // namespace detail

/// Built-in scenario used when --config is omitted.
inline ScenarioConfig default_config(const std::string& cmd) {
    json j{{"schema_version", schema_version}};
    json e{{"name", cmd}};
    if (cmd == "simulate") {
        j["model"] = detail::single_cell(1.5);
        j["model"]["initial"] = {{"F", {0.1}}, {"P", {0.1}}};
        j["stimulus"] = detail::constant_stimulus(1, 0.5, 50);
        j["integrator"] = {{"step", 0.01}, {"output_stride", 10}};
    } else if (cmd == "equilibrium" || cmd == "validate") {
        j["model"] = detail::single_cell(1.5);
        e["consumption"] = 0.5;
        if (cmd == "validate") e = {{"name", cmd}, {"f_min_baseline", 0.1}, {"f_min_step", 1.0}};
    } else if (cmd == "nullclines") {
        j["model"] = detail::single_cell(1.5);
        e["consumption"] = 0.5;
        e["samples"] = 100;
        e["fraction"] = 0.95;
    } else if (cmd == "phase-portrait") {
        j["model"] = detail::single_cell(1.5);
        j["model"]["initial"] = {{"F", {0.1}}, {"P", {0.1}}};
        e.update({{"consumption", 0.5}, {"f_max", 2.0}, {"p_max", 1.4}, {"f_count", 15}, {"p_count", 15},
                  {"horizon", 50.0}});
    } else if (cmd == "tau-heatmap") {
        j["model"] = detail::single_cell(1.1);
        e.update({{"p_inf", {{"min", 0.1}, {"max", 5.0}, {"count", 50}}},
                  {"p_lim", {{"min", 0.1}, {"max", 5.0}, {"count", 50}}},
                  {"f_min_baseline", 0.1},
                  {"f_min_step", 1.0}});
    } else if (cmd == "pulse-demo") {
        j["model"] = detail::single_cell(1.1);
        e.update({{"base_consumption", 0.2}, {"pulse_height", 2.0}, {"short_start", 50.0}, {"short_span", 2.0},
                  {"long_start", 100.0}, {"long_span", 50.0}, {"horizon", 300.0}});
        j["integrator"] = {{"step", 0.01}, {"output_stride", 10}};
    } else if (cmd == "opposition-surface") {
        j["model"] = detail::pair_cell(1.1, 0.05);
        e.update({{"c_min", 0.1}, {"c_max", 1.0}, {"resolution", 50}});
    } else if (cmd == "capacity-map") {
        // 46 points put 0.4 and 0.8 on the grid.
        j["model"] = detail::pair_cell(1.1, 0.05);
        e.update({{"c_min", 0.1}, {"c_max", 1.0}, {"resolution", 46}, {"totcon", 0.8}, {"totcon_samples", 41}});
    } else if (cmd == "servo-demo") {
        j["model"] = detail::single_cell(1.1);
        e.update({{"inertia", 1.0},
                  {"damping", 0.5},
                  {"reference", 0.0},
                  {"perturbation", json::array({{{"t", 0}, {"torque", 0.1}},
                                                {{"t", 300}, {"torque", 0.2}},
                                                {{"t", 302}, {"torque", 0.1}},
                                                {{"t", 600}, {"torque", 1.0}}})},
                  {"duration", 1200.0},
                  {"initial_gain", 1.0},
                  {"initial_available", 1.0}});
        j["integrator"] = {{"step", 0.01}, {"output_stride", 10}};
    } else {
        throw ConfigError("", "unknown subcommand '" + cmd + "'");
    }
    j["experiment"] = e;
    j["output"] = {{"dir", "."}, {"format", "csv"}, {"svg", false}, {"prefix", ""}};
    return parse_config(j);
}

namespace detail {

struct RunContext {
    std::string cmd;
    ScenarioConfig cfg;
    std::optional<long> seed;
    std::vector<std::string> written;

    Fields params() const { return Fields(cfg.experiment_params, "experiment"); }

    std::filesystem::path file(const std::string& suffix, const std::string& ext) const {
        const std::string stem = cfg.output.prefix.empty() ? cmd : cfg.output.prefix;
        return std::filesystem::path(cfg.output.dir) / (stem + suffix + "." + ext);
    }

    void emit(const std::string& suffix, const std::string& ext, const std::string& content) {
        const auto path = file(suffix, ext);
        write_file(path, content);
        written.push_back(path.string());
    }

    bool csv() const { return cfg.output.format == "csv"; }

    const FactoryParams& first_factory() const {
        if (cfg.model.factories.empty()) throw ConfigError("model.factories", "expected at least one factory");
        return cfg.model.factories.front();
    }

    void require_single(const char* what) const {
        if (cfg.model.size() != 1) throw ConfigError("model.factories", std::string(what) + " needs exactly 1 factory");
    }

    void require_valid() const {
        const ValidationReport r = validate(cfg.model);
        if (!r.valid()) {
            const Violation& v = r.violations.front();
            const std::string where =
                v.factory ? "model.factories[" + std::to_string(*v.factory) + "]" : std::string("model");
            throw ConfigError(where, v.message);
        }
    }

    /// experiment.consumption (number or per-factory array), else the stimulus at t = 0.
    std::vector<double> consumption() const {
        const std::size_t n = cfg.model.size();
        const Fields p = params();
        std::vector<double> c;
        if (p.has("consumption")) {
            const json& v = p.raw("consumption");
            if (v.is_array()) {
                c = p.numbers("consumption");
            } else {
                c.assign(n, p.number("consumption"));
            }
        } else if (cfg.stimulus) {
            c = cfg.stimulus->at(0.0);
        } else {
            throw ConfigError("experiment.consumption", "required when no stimulus block is given");
        }
        if (c.size() != n) throw ConfigError("experiment.consumption", "expected " + std::to_string(n) + " values");
        for (double x : c)
            if (!(x >= 0.0)) throw ConfigError("experiment.consumption", "must be >= 0");
        return c;
    }

    CellState initial_state() const {
        if (cfg.initial) return *cfg.initial;
        CellState s;
        for (const auto& q : cfg.model.factories) {
            s.factory.push_back(1.0);
            s.product.push_back(q.growth_inhibition > 0 ? q.steady_product() : 0.0);
        }
        return s;
    }
};

inline std::string kv(const std::string& k, double v) { return " " + k + "=" + format_number(v); }

inline std::string join_numbers(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_number(v[k]);
    return s + "]";
}

inline Axis axis_param(const Fields& p, const std::string& key, const std::string& name, Axis fallback) {
    if (!p.has(key)) return fallback;
    Fields a(p.raw(key), p.at(key));
    a.only({"min", "max", "count"});
    Axis ax{name, a.number("min", fallback.min), a.number("max", fallback.max),
            static_cast<std::size_t>(std::max(0L, a.integer("count", static_cast<long>(fallback.count))))};
    if (ax.count < 1) throw ConfigError(a.at("count"), "must be >= 1");
    if (!(ax.max >= ax.min)) throw ConfigError(p.at(key), "needs min <= max");
    return ax;
}

inline std::size_t count_param(const Fields& p, const std::string& key, long fallback, long minimum) {
    const long v = p.integer(key, fallback);
    if (v < minimum) throw ConfigError(p.at(key), "must be >= " + std::to_string(minimum));
    return static_cast<std::size_t>(v);
}

inline std::vector<Series> trajectory_series(const Trajectory& tr) {
    std::vector<Series> out;
    const std::size_t n = tr.states.empty() ? 0 : tr.states.front().factory.size();
    for (std::size_t i = 0; i < n; ++i) {
        Series f{"F_" + std::to_string(i + 1), tr.times, {}}, p{"P_" + std::to_string(i + 1), tr.times, {}};
        for (const auto& s : tr.states) {
            f.y.push_back(s.factory[i]);
            p.y.push_back(s.product[i]);
        }
        out.push_back(std::move(f));
        out.push_back(std::move(p));
    }
    return out;
}

inline void emit_trajectory(RunContext& ctx, const Trajectory& tr, const std::string& suffix) {
    if (ctx.csv()) {
        std::ostringstream os;
        write_trajectory_csv(os, tr);
        ctx.emit(suffix, "csv", os.str());
    } else {
        ctx.emit(suffix, "json", to_json(tr).dump(2) + "\n");
    }
    if (ctx.cfg.output.svg) ctx.emit(suffix, "svg", line_chart_svg(ctx.cmd, "t", trajectory_series(tr)));
}

inline void emit_grid(RunContext& ctx, const SweepGrid& g, const std::string& suffix, bool log_scale) {
    if (ctx.csv()) {
        std::ostringstream os;
        write_grid_csv(os, g);
        ctx.emit(suffix, "csv", os.str());
    } else {
        ctx.emit(suffix, "json", to_json(g).dump(2) + "\n");
    }
    if (ctx.cfg.output.svg) ctx.emit(suffix, "svg", heatmap_svg(g, log_scale));
}

// ---------------------------------------------------------------------------
// Subcommands; each returns the one-line summary.

inline std::string cmd_simulate(RunContext& ctx) {
    ctx.params().only({});
    ctx.require_valid();
    if (!ctx.cfg.stimulus) throw ConfigError("stimulus", "simulate needs a stimulus block");
    const Trajectory tr = integrate(ctx.cfg.model, ctx.initial_state(), *ctx.cfg.stimulus, ctx.cfg.integrator);
    emit_trajectory(ctx, tr, "");
    const CellState& last = tr.states.back();
    return "samples=" + std::to_string(tr.size()) + kv("t_end", tr.times.back()) + " F_end=" +
           join_numbers(last.factory) + " P_end=" + join_numbers(last.product);
}

inline std::string cmd_equilibrium(RunContext& ctx) {
    ctx.params().only({"consumption"});
    const std::vector<double> c = ctx.consumption();
    if (ctx.cfg.model.size() == 1) {
        const FactoryParams& q = ctx.first_factory();
        if (!q.positive()) throw ConfigError("model.factories[0]", "G, K, R, I must be strictly positive");
        const EquilibriumReport r = classify(q, c[0]);
        const JacobianMetrics origin = jacobian_metrics(q, c[0], EquilibriumPoint::origin);
        if (ctx.csv()) {
            std::ostringstream os;
            os << "key,value\nclass," << to_string(r.stability) << '\n';
            os << "F," << (r.factory.empty() ? "nan" : format_number(r.factory[0])) << '\n';
            os << "P," << (r.product.empty() ? "nan" : format_number(r.product[0])) << '\n';
            os << "trace," << format_number(r.trace) << "\ndeterminant," << format_number(r.determinant)
               << "\ndiscriminant," << format_number(r.discriminant) << '\n';
            os << "origin_trace," << format_number(origin.trace) << "\norigin_determinant,"
               << format_number(origin.determinant) << '\n';
            ctx.emit("", "csv", os.str());
        } else {
            json j = to_json(r);
            j["origin"] = {{"trace", origin.trace},
                           {"determinant", origin.determinant},
                           {"discriminant", origin.discriminant},
                           {"class", to_string(classify_linearization(origin))}};
            ctx.emit("", "json", j.dump(2) + "\n");
        }
        std::string line = std::string("class=") + to_string(r.stability);
        if (r.stability == StabilityClass::non_physical) {
            throw NonPhysicalEquilibrium("equilibrium: G/K >= R/I, no physical nonzero equilibrium (report written to " +
                                             ctx.written.back() + ")",
                                         q.steady_product() / q.limit_product());
        }
        return line + kv("F", r.factory[0]) + kv("P", r.product[0]) + kv("trace", r.trace) +
               kv("det", r.determinant) + kv("disc", r.discriminant);
    }
    ctx.require_valid();
    const MultiEquilibrium m = multi_equilibrium(ctx.cfg.model, c);
    if (ctx.csv()) {
        std::ostringstream os;
        os << "factory,F,P\n";
        for (std::size_t i = 0; i < m.factory.size(); ++i)
            os << (i + 1) << ',' << format_number(m.factory[i]) << ',' << format_number(m.product[i]) << '\n';
        ctx.emit("", "csv", os.str());
    } else {
        ctx.emit("", "json", to_json(m).dump(2) + "\n");
    }
    double total = 0.0;
    for (double f : m.factory) total += f;
    return std::string("method=") + to_string(m.record.method) + " F=" + join_numbers(m.factory) + kv("total", total);
}

inline std::string cmd_nullclines(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"consumption", "samples", "fraction"});
    ctx.require_single("nullclines");
    ctx.require_valid();
    const FactoryParams& q = ctx.first_factory();
    const double c = ctx.consumption()[0];
    const double fraction = p.number("fraction", 0.95);
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError(p.at("fraction"), "must lie in (0, 1)");
    const NullclineSet set = nullclines(q, c, nullcline_samples(q, count_param(p, "samples", 100, 2), fraction));
    if (ctx.csv()) {
        std::ostringstream os;
        os << "# factory_nullcline_P," << format_number(set.factory_nullcline_product) << '\n';
        os << "# limit_P," << format_number(set.limit_product) << '\n';
        os << "P,F\n";
        for (const auto& pt : set.product_nullcline) os << format_number(pt.product) << ',' << format_number(pt.factory) << '\n';
        ctx.emit("", "csv", os.str());
    } else {
        json pts = json::array();
        for (const auto& pt : set.product_nullcline) pts.push_back({{"P", pt.product}, {"F", pt.factory}});
        ctx.emit("", "json",
                 json{{"factory_nullcline_P", set.factory_nullcline_product},
                      {"limit_P", set.limit_product},
                      {"product_nullcline", pts}}
                         .dump(2) +
                     "\n");
    }
    if (ctx.cfg.output.svg) {
        Series s{"dP/dt = 0", {}, {}};
        for (const auto& pt : set.product_nullcline) {
            s.x.push_back(pt.product);
            s.y.push_back(pt.factory);
        }
        const double top = s.y.empty() ? 1.0 : s.y.back();
        Series g{"dF/dt = 0", {set.factory_nullcline_product, set.factory_nullcline_product}, {0.0, top}};
        ctx.emit("", "svg", line_chart_svg("nullclines (F against P)", "P", {s, g}));
    }
    const SingleEquilibrium eq = single_equilibrium(q, c);
    return kv("factory_nullcline_P", set.factory_nullcline_product).substr(1) + kv("limit_P", set.limit_product) +
           kv("crossing_F", eq.factory) + " samples=" + std::to_string(set.product_nullcline.size());
}

inline std::string cmd_phase_portrait(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"consumption", "f_max", "p_max", "f_count", "p_count", "horizon"});
    ctx.require_single("phase-portrait");
    ctx.require_valid();
    const FactoryParams& q = ctx.first_factory();
    const double c = ctx.consumption()[0];
    const Axis fa{"F", 0.0, p.positive("f_max", 2.0), count_param(p, "f_count", 15, 2)};
    const Axis pa{"P", 0.0, p.positive("p_max", 1.4), count_param(p, "p_count", 15, 2)};
    const VectorField vf = vector_field(q, c, fa.values(), pa.values());
    if (ctx.csv()) {
        std::ostringstream os;
        os << "F,P,dF,dP\n";
        for (std::size_t i = 0; i < fa.count; ++i)
            for (std::size_t j = 0; j < pa.count; ++j)
                os << format_number(vf.factory_axis[i]) << ',' << format_number(vf.product_axis[j]) << ','
                   << format_number(vf.dfactory[i][j]) << ',' << format_number(vf.dproduct[i][j]) << '\n';
        ctx.emit("", "csv", os.str());
    } else {
        ctx.emit("", "json",
                 json{{"F", vf.factory_axis}, {"P", vf.product_axis}, {"dF", vf.dfactory}, {"dP", vf.dproduct}}.dump(2) +
                     "\n");
    }
    if (ctx.cfg.output.svg) {
        const double horizon = p.positive("horizon", 50.0);
        const Trajectory tr = integrate(ctx.cfg.model, ctx.initial_state(),
                                        StimulusProfile::constant({c}, horizon), ctx.cfg.integrator);
        Series path{"trajectory", {}, {}};
        for (const auto& s : tr.states) {
            path.x.push_back(s.product[0]);
            path.y.push_back(s.factory[0]);
        }
        const NullclineSet set = nullclines(q, c, nullcline_samples(q, 100));
        Series pn{"dP/dt = 0", {}, {}};
        for (const auto& pt : set.product_nullcline)
            if (pt.factory <= fa.max) {
                pn.x.push_back(pt.product);
                pn.y.push_back(pt.factory);
            }
        Series fn{"dF/dt = 0", {set.factory_nullcline_product, set.factory_nullcline_product}, {0.0, fa.max}};
        ctx.emit("", "svg", line_chart_svg("phase portrait (F against P)", "P", {path, pn, fn}));
    }
    const EquilibriumReport r = classify(q, c);
    return "grid=" + std::to_string(fa.count) + "x" + std::to_string(pa.count) + " class=" + to_string(r.stability) +
           kv("F", r.factory[0]) + kv("P", r.product[0]);
}

inline std::string cmd_tau_heatmap(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"p_inf", "p_lim", "f_min_baseline", "f_min_step"});
    TauHeatmapConfig hc;
    hc.steady_product = axis_param(p, "p_inf", "P_inf", hc.steady_product);
    hc.limit_product = axis_param(p, "p_lim", "P_lim", hc.limit_product);
    if (!(hc.steady_product.min > 0.0)) throw ConfigError("experiment.p_inf.min", "must be > 0");
    if (!(hc.limit_product.min > 0.0)) throw ConfigError("experiment.p_lim.min", "must be > 0");
    hc.f_min_baseline = p.positive("f_min_baseline", hc.f_min_baseline);
    hc.f_min_step = p.positive("f_min_step", hc.f_min_step);
    hc.timing.step = ctx.cfg.integrator.step;
    const TauHeatmap h = tau_ratio_heatmap(hc);
    emit_grid(ctx, h.ratio, "", true);
    emit_grid(ctx, h.log_ratio(), "_log", false);
    emit_grid(ctx, h.linear_ratio(), "_linear", true);
    std::size_t value = 0, osc = 0, invalid = 0, failed = 0;
    for (const auto& c : h.ratio.cells) {
        switch (c.mark) {
            case CellMark::value: ++value; break;
            case CellMark::oscillatory: ++osc; break;
            case CellMark::invalid: ++invalid; break;
            case CellMark::failed: ++failed; break;
        }
    }
    return "cells=" + std::to_string(h.ratio.cells.size()) + " value=" + std::to_string(value) +
           " oscillatory=" + std::to_string(osc) + " invalid=" + std::to_string(invalid) +
           " failed=" + std::to_string(failed);
}

inline std::string cmd_pulse_demo(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"base_consumption", "pulse_height", "short_start", "short_span", "long_start", "long_span", "horizon"});
    ctx.require_single("pulse-demo");
    ctx.require_valid();
    PulseProtocol pr;
    pr.base_consumption = p.positive("base_consumption", pr.base_consumption);
    pr.pulse_height = p.positive("pulse_height", pr.pulse_height);
    pr.short_start = p.positive("short_start", pr.short_start);
    pr.short_span = p.positive("short_span", pr.short_span);
    pr.long_start = p.positive("long_start", pr.long_start);
    pr.long_span = p.positive("long_span", pr.long_span);
    pr.horizon = p.positive("horizon", pr.horizon);
    const PulseTransient t = pulse_transient(ctx.first_factory(), pr, ctx.cfg.integrator);
    emit_trajectory(ctx, t.trajectory, "");
    return kv("baseline_F", t.baseline_factory).substr(1) + kv("pulse_F", t.pulse_factory) +
           kv("short_rise", t.short_peak_rise) + kv("long_rise", t.long_peak_rise) +
           kv("long_peak", t.long_pulse_peak) + kv("recovery_error", t.long_recovery_error);
}

inline std::string cmd_opposition_surface(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"c_min", "c_max", "resolution"});
    ctx.require_valid();
    const double lo = p.nonnegative("c_min", 0.1), hi = p.positive("c_max", 1.0);
    if (!(hi >= lo)) throw ConfigError("experiment.c_max", "must be >= c_min");
    const OppositionSurface s = opposition_surface(ctx.cfg.model, lo, hi, count_param(p, "resolution", 50, 1));
    emit_grid(ctx, equilibrium_metric(s.grid, s.grid.factory1, "F_1"), "_F1", false);
    emit_grid(ctx, equilibrium_metric(s.grid, s.grid.factory2, "F_2"), "_F2", false);
    const std::size_t failed = static_cast<std::size_t>(std::count(s.grid.failed.begin(), s.grid.failed.end(), true));
    const double f1max = *std::max_element(s.grid.factory1.begin(), s.grid.factory1.end());
    return "grid=" + std::to_string(s.grid.c1.count) + "x" + std::to_string(s.grid.c2.count) +
           " failed=" + std::to_string(failed) + kv("max_F1", f1max);
}

inline std::string cmd_capacity_map(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"c_min", "c_max", "resolution", "totcon", "totcon_samples"});
    ctx.require_valid();
    const double lo = p.nonnegative("c_min", 0.1), hi = p.positive("c_max", 1.0);
    if (!(hi >= lo)) throw ConfigError("experiment.c_max", "must be >= c_min");
    const CapacityMapResult m = capacity_map(ctx.cfg.model, lo, hi, count_param(p, "resolution", 46, 1));
    emit_grid(ctx, equilibrium_metric(m.grid, m.total, "F_1+F_2"), "_total", false);
    emit_grid(ctx, equilibrium_metric(m.grid, m.grid.factory1, "F_1"), "_F1", false);
    emit_grid(ctx, equilibrium_metric(m.grid, m.grid.factory2, "F_2"), "_F2", false);

    std::string line = "grid=" + std::to_string(m.grid.c1.count) + "x" + std::to_string(m.grid.c2.count);
    if (p.has("totcon")) {
        const double tc = p.positive("totcon", 0.8);
        const auto prof = totcon_profile(ctx.cfg.model, tc, count_param(p, "totcon_samples", 41, 2));
        std::ostringstream os;
        os << "C_1,C_2,total\n";
        for (const auto& s : prof) os << format_number(s.c1) << ',' << format_number(s.c2) << ',' << format_number(s.total) << '\n';
        ctx.emit("_totcon", "csv", os.str());
        const double mid = prof[prof.size() / 2].total;
        const double edge = std::max(prof.front().total, prof.back().total);
        line += kv("totcon", tc) + kv("balanced_total", mid) + kv("lopsided_total", edge);
    }
    return line;
}

inline std::string cmd_servo_demo(RunContext& ctx) {
    const Fields p = ctx.params();
    p.only({"inertia", "damping", "reference", "perturbation", "duration", "initial_angle", "initial_velocity",
            "initial_gain", "initial_available"});
    ctx.require_single("servo-demo");
    ctx.require_valid();
    JointSpec j;
    j.plasticity = ctx.first_factory();
    j.inertia = p.positive("inertia", j.inertia);
    j.damping = p.nonnegative("damping", j.damping);
    j.reference = p.number("reference", j.reference);
    j.initial_angle = p.number("initial_angle", j.initial_angle);
    j.initial_velocity = p.number("initial_velocity", j.initial_velocity);
    j.initial_gain = p.nonnegative("initial_gain", j.initial_gain);
    j.initial_available = p.nonnegative("initial_available", j.initial_available);
    if (p.has("perturbation")) {
        const json& arr = p.raw("perturbation");
        if (!arr.is_array() || arr.empty()) throw ConfigError(p.at("perturbation"), "expected a non-empty array");
        j.perturbation.clear();
        for (std::size_t k = 0; k < arr.size(); ++k) {
            Fields s(arr[k], p.at("perturbation") + "[" + std::to_string(k) + "]");
            s.only({"t", "torque"});
            j.perturbation.push_back({s.number("t"), s.number("torque")});
        }
    }
    try {
        j.check();
    } catch (const InvalidInput& e) {
        throw ConfigError("experiment", e.what());
    }
    const double duration = p.positive("duration", 1200.0);
    const JointTrajectory tr = simulate_joint(j, duration, ctx.cfg.integrator);
    if (ctx.csv()) {
        std::ostringstream os;
        write_servo_csv(os, tr);
        ctx.emit("", "csv", os.str());
    } else {
        ctx.emit("", "json",
                 json{{"t", json_numbers(tr.times)},
                      {"angle", json_numbers(tr.angle)},
                      {"velocity", json_numbers(tr.velocity)},
                      {"F", json_numbers(tr.gain)},
                      {"P", json_numbers(tr.available)},
                      {"applied", json_numbers(tr.applied)},
                      {"C", json_numbers(tr.consumption)},
                      {"perturbation", json_numbers(tr.perturbation)}}
                         .dump(2) +
                     "\n");
    }
    if (ctx.cfg.output.svg) {
        ctx.emit("", "svg",
                 line_chart_svg("servo joint", "t",
                                {{"angle", tr.times, tr.angle}, {"F (gain)", tr.times, tr.gain},
                                 {"P (available)", tr.times, tr.available}}));
    }
    const double peak = *std::max_element(tr.gain.begin(), tr.gain.end());
    return kv("F_start", tr.gain.front()).substr(1) + kv("F_end", tr.gain.back()) + kv("F_max", peak) +
           kv("angle_end", tr.angle.back());
}

inline std::string cmd_validate(RunContext& ctx, bool& valid) {
    const Fields p = ctx.params();
    p.only({"f_min_baseline", "f_min_step"});
    ValidationReport r = validate(ctx.cfg.model);
    if (r.valid() && (p.has("f_min_baseline") || p.has("f_min_step"))) {
        r = validate(ctx.cfg.model, p.positive("f_min_baseline", 0.1), p.positive("f_min_step", 1.0));
    }
    ctx.emit("", "json", to_json(r).dump(2) + "\n");
    valid = r.valid();
    std::string line = std::string("valid=") + (valid ? "true" : "false") +
                       " factories=" + std::to_string(r.factories.size());
    for (const auto& v : r.violations) line += " [" + std::string(to_string(v.issue)) + ": " + v.message + "]";
    return line;
}

}  // namespace detail

/// Runs one subcommand. Output streams are parameters so tests can capture them.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Activator-inhibitor cell plasticity simulator"};
    app.require_subcommand(1);

    struct Flags {
        std::string config, out_dir, format;
        bool svg = false, print_config = false;
        std::optional<long> seed;
    };
    std::map<std::string, Flags> flags;
    const std::map<std::string, std::string> help{
        {"simulate", "integrate a cell under its stimulus profile"},
        {"equilibrium", "steady state and stability class"},
        {"nullclines", "nullclines of a one-factory cell"},
        {"phase-portrait", "vector field of a one-factory cell"},
        {"tau-heatmap", "tau_f/tau_p over the (P_inf, P_lim) plane"},
        {"pulse-demo", "short and long consumption pulses"},
        {"opposition-surface", "two-factory equilibria over (C_1, C_2)"},
        {"capacity-map", "total capacity of two identical opposed factories"},
        {"servo-demo", "servo joint with a plastic gain"},
        {"validate", "check positivity, stability and opposition constraints"}};
    for (const auto& name : subcommands()) {
        Flags& f = flags[name];
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", f.config, "scenario JSON file (built-in default when omitted)");
        sub->add_option("--out", f.out_dir, "output directory (overrides output.dir)");
        sub->add_option("--format", f.format, "csv or json (overrides output.format)")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--svg", f.svg, "also write an SVG chart");
        sub->add_option("--seed", f.seed, "recorded in the summary; every command is deterministic");
        sub->add_flag("--print-config", f.print_config, "print the effective scenario JSON and exit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    std::string cmd;
    for (const auto& name : subcommands())
        if (app.got_subcommand(name)) cmd = name;
    const Flags& f = flags[cmd];

    try {
        detail::RunContext ctx{cmd, f.config.empty() ? default_config(cmd) : load_config(f.config), f.seed, {}};
        if (!ctx.cfg.experiment.empty() && ctx.cfg.experiment != cmd) {
            throw ConfigError("experiment.name", "config is for '" + ctx.cfg.experiment + "', not '" + cmd + "'");
        }
        if (!f.out_dir.empty()) ctx.cfg.output.dir = f.out_dir;
        if (!f.format.empty()) ctx.cfg.output.format = f.format;
        if (f.svg) ctx.cfg.output.svg = true;
        if (f.print_config) {
            out << to_json(ctx.cfg).dump(2) << '\n';
            return exit_ok;
        }

        std::string summary;
        bool valid = true;
        if (cmd == "simulate") summary = detail::cmd_simulate(ctx);
        else if (cmd == "equilibrium") summary = detail::cmd_equilibrium(ctx);
        else if (cmd == "nullclines") summary = detail::cmd_nullclines(ctx);
        else if (cmd == "phase-portrait") summary = detail::cmd_phase_portrait(ctx);
        else if (cmd == "tau-heatmap") summary = detail::cmd_tau_heatmap(ctx);
        else if (cmd == "pulse-demo") summary = detail::cmd_pulse_demo(ctx);
        else if (cmd == "opposition-surface") summary = detail::cmd_opposition_surface(ctx);
        else if (cmd == "capacity-map") summary = detail::cmd_capacity_map(ctx);
        else if (cmd == "servo-demo") summary = detail::cmd_servo_demo(ctx);
        else summary = detail::cmd_validate(ctx, valid);

        out << cmd << ": " << summary;
        if (ctx.seed) out << " seed=" << *ctx.seed;
        if (!ctx.written.empty()) {
            out << " ->";
            for (const auto& w : ctx.written) out << ' ' << w;
        }
        out << '\n';
        return valid ? exit_ok : exit_config;
    } catch (const NumericalError& e) {
        err << cmd << ": numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const NonPhysicalEquilibrium& e) {
        err << cmd << ": " << e.what() << '\n';
        return exit_config;
    } catch (const Error& e) {
        err << cmd << ": error: " << e.what() << '\n';
        return exit_config;
    }
}

}  // namespace plasticell::io
