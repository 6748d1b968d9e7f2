#pragma once

// CSV, JSON and SVG writers. Numbers go through std::to_chars so that the
// same run produces the same bytes on every platform.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plasticell/analysis.hpp"
#include "plasticell/dynamics.hpp"
#include "plasticell/errors.hpp"
#include "plasticell/experiments.hpp"
#include "plasticell/servo.hpp"

namespace plasticell::io {

using json = nlohmann::json;

/// Shortest round-trip decimal form; non-finite values become "nan", "inf", "-inf".
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// JSON number, or null for NaN and infinities.
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json json_numbers(const std::vector<double>& vs) {
    json a = json::array();
    for (double v : vs) a.push_back(json_number(v));
    return a;
}

/// Writes `content` to `path`, creating parent directories.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw IoError(path.string(), "write failed");
}

// ---------------------------------------------------------------------------
// CSV

/// Columns t, F_1..F_N, P_1..P_N, C_1..C_N, PR_1..PR_N.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    const std::size_t n = tr.states.empty() ? 0 : tr.states.front().factory.size();
    os << "t";
    for (const char* tag : {"F", "P", "C", "PR"})
        for (std::size_t i = 0; i < n; ++i) os << ',' << tag << '_' << (i + 1);
    os << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << format_number(tr.times[k]);
        for (double v : tr.states[k].factory) os << ',' << format_number(v);
        for (double v : tr.states[k].product) os << ',' << format_number(v);
        for (double v : tr.stimulus[k]) os << ',' << format_number(v);
        for (double v : tr.net_production[k]) os << ',' << format_number(v);
        os << '\n';
    }
}

inline std::string cell_text(const GridCell& c) {
    return c.mark == CellMark::value ? format_number(c.value) : std::string(to_string(c.mark));
}

/// Axis header rows, then one row per y value with the x values as columns.
inline void write_grid_csv(std::ostream& os, const SweepGrid& g) {
    os << "# metric," << g.metric << '\n';
    os << "# x," << g.x.name << ',' << format_number(g.x.min) << ',' << format_number(g.x.max) << ',' << g.x.count << '\n';
    os << "# y," << g.y.name << ',' << format_number(g.y.min) << ',' << format_number(g.y.max) << ',' << g.y.count << '\n';
    os << g.y.name << '\\' << g.x.name;
    for (std::size_t ix = 0; ix < g.x.count; ++ix) os << ',' << format_number(g.x.value(ix));
    os << '\n';
    for (std::size_t iy = 0; iy < g.y.count; ++iy) {
        os << format_number(g.y.value(iy));
        for (std::size_t ix = 0; ix < g.x.count; ++ix) os << ',' << cell_text(g.at(ix, iy));
        os << '\n';
    }
}

/// One metric of a two-factory equilibrium grid as a SweepGrid with x = C_1, y = C_2.
inline SweepGrid equilibrium_metric(const EquilibriumGrid& g, const std::vector<double>& values, std::string metric) {
    SweepGrid out{std::move(metric), g.c1, g.c2, std::vector<GridCell>(g.c1.count * g.c2.count)};
    for (std::size_t i1 = 0; i1 < g.c1.count; ++i1)
        for (std::size_t i2 = 0; i2 < g.c2.count; ++i2) {
            const std::size_t k = g.index(i1, i2);
            out.at(i1, i2) = g.failed[k] ? GridCell{CellMark::failed, values[k]} : GridCell{CellMark::value, values[k]};
        }
    return out;
}

inline void write_servo_csv(std::ostream& os, const JointTrajectory& tr) {
    os << "t,angle,velocity,F,P,applied,C,perturbation\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << format_number(tr.times[k]) << ',' << format_number(tr.angle[k]) << ',' << format_number(tr.velocity[k])
           << ',' << format_number(tr.gain[k]) << ',' << format_number(tr.available[k]) << ','
           << format_number(tr.applied[k]) << ',' << format_number(tr.consumption[k]) << ','
           << format_number(tr.perturbation[k]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Trajectory& tr) {
    json j;
    j["t"] = json_numbers(tr.times);
    json f = json::array(), p = json::array(), c = json::array(), pr = json::array();
    for (std::size_t k = 0; k < tr.size(); ++k) {
        f.push_back(json_numbers(tr.states[k].factory));
        p.push_back(json_numbers(tr.states[k].product));
        c.push_back(json_numbers(tr.stimulus[k]));
        pr.push_back(json_numbers(tr.net_production[k]));
    }
    j["F"] = f;
    j["P"] = p;
    j["C"] = c;
    j["PR"] = pr;
    return j;
}

inline json to_json(const Axis& a) {
    return {{"name", a.name}, {"min", a.min}, {"max", a.max}, {"count", a.count}};
}

inline json to_json(const SweepGrid& g) {
    json cells = json::array();
    for (std::size_t iy = 0; iy < g.y.count; ++iy) {
        json row = json::array();
        for (std::size_t ix = 0; ix < g.x.count; ++ix) {
            const GridCell& c = g.at(ix, iy);
            row.push_back({{"mark", to_string(c.mark)}, {"value", json_number(c.value)}});
        }
        cells.push_back(row);
    }
    return {{"metric", g.metric}, {"x", to_json(g.x)}, {"y", to_json(g.y)}, {"cells", cells}};
}

inline json to_json(const EquilibriumReport& r) {
    return {{"class", to_string(r.stability)},
            {"F", json_numbers(r.factory)},
            {"P", json_numbers(r.product)},
            {"trace", json_number(r.trace)},
            {"determinant", json_number(r.determinant)},
            {"discriminant", json_number(r.discriminant)}};
}

inline json to_json(const MultiEquilibrium& m) {
    json extinct = m.record.extinct;
    return {{"F", json_numbers(m.factory)},
            {"P", json_numbers(m.product)},
            {"method", to_string(m.record.method)},
            {"iterations", m.record.iterations},
            {"max_rate", json_number(m.record.max_rate)},
            {"extinct", extinct},
            {"notes", m.record.notes}};
}

inline json to_json(const ValidationReport& r) {
    json facs = json::array();
    for (const auto& s : r.factories) {
        json f = {{"positive", s.positive}, {"stable", s.stable}, {"ratio", json_number(s.ratio)}};
        if (s.tau_ordering) f["tau_ordering"] = *s.tau_ordering;
        facs.push_back(f);
    }
    json viol = json::array();
    for (const auto& v : r.violations) {
        json e = {{"issue", to_string(v.issue)}, {"message", v.message}};
        if (v.factory) e["factory"] = *v.factory;
        viol.push_back(e);
    }
    return {{"valid", r.valid()}, {"factories", facs}, {"violations", viol}};
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline const char* palette(std::size_t k) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[k % 6];
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += ch;
        }
    }
    return out;
}

// Maps a value in [lo, hi] to a blue-white-red ramp.
inline std::string ramp(double v, double lo, double hi) {
    double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    t = std::clamp(t, 0.0, 1.0);
    int r, g, b;
    if (t < 0.5) {
        const double s = t / 0.5;
        r = static_cast<int>(59 + s * (247 - 59));
        g = static_cast<int>(76 + s * (247 - 76));
        b = static_cast<int>(192 + s * (247 - 192));
    } else {
        const double s = (t - 0.5) / 0.5;
        r = static_cast<int>(247 + s * (180 - 247));
        g = static_cast<int>(247 + s * (4 - 247));
        b = static_cast<int>(247 + s * (38 - 247));
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace detail

/// Polyline chart of one or more series sharing axes.
inline std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::vector<Series>& series) {
    const double w = 640, h = 400, ml = 60, mr = 140, mt = 30, mb = 45;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"20\" font-size=\"14\">" << detail::svg_escape(title) << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (w - ml - mr) << "\" height=\"" << (h - mt - mb)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"" << (h - mb + 15) << "\" font-size=\"10\">" << format_number(x0) << "</text>\n";
    os << "<text x=\"" << (w - mr) << "\" y=\"" << (h - mb + 15) << "\" font-size=\"10\" text-anchor=\"end\">"
       << format_number(x1) << "</text>\n";
    os << "<text x=\"" << (ml - 4) << "\" y=\"" << (h - mb) << "\" font-size=\"10\" text-anchor=\"end\">"
       << format_number(y0) << "</text>\n";
    os << "<text x=\"" << (ml - 4) << "\" y=\"" << (mt + 10) << "\" font-size=\"10\" text-anchor=\"end\">"
       << format_number(y1) << "</text>\n";
    os << "<text x=\"" << ((ml + w - mr) / 2) << "\" y=\"" << (h - 10) << "\" font-size=\"12\" text-anchor=\"middle\">"
       << detail::svg_escape(xlabel) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        os << "<polyline fill=\"none\" stroke=\"" << detail::palette(s) << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < series[s].x.size(); ++k) {
            if (!std::isfinite(series[s].x[k]) || !std::isfinite(series[s].y[k])) continue;
            os << format_number(std::round(px(series[s].x[k]) * 100) / 100) << ','
               << format_number(std::round(py(series[s].y[k]) * 100) / 100) << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << (w - mr + 10) << "\" y=\"" << (mt + 15 + 16 * s) << "\" font-size=\"12\" fill=\""
           << detail::palette(s) << "\">" << detail::svg_escape(series[s].label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

/// Raster heatmap; non-value cells are drawn grey.
inline std::string heatmap_svg(const SweepGrid& g, bool log_scale = false) {
    const double cell = std::max(4.0, std::min(12.0, 600.0 / static_cast<double>(std::max(g.x.count, g.y.count))));
    const double ml = 60, mt = 30, mb = 45;
    const double w = ml + cell * static_cast<double>(g.x.count) + 20;
    const double h = mt + cell * static_cast<double>(g.y.count) + mb;
    auto shade = [&](double v) { return log_scale ? std::log10(v) : v; };

    double lo = INFINITY, hi = -INFINITY;
    for (const auto& c : g.cells)
        if (c.mark == CellMark::value && std::isfinite(c.value) && (!log_scale || c.value > 0)) {
            lo = std::min(lo, shade(c.value));
            hi = std::max(hi, shade(c.value));
        }

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"20\" font-size=\"14\">" << detail::svg_escape(g.metric)
       << (log_scale ? " (log10)" : "") << "  range " << format_number(lo) << " .. " << format_number(hi) << "</text>\n";
    for (std::size_t iy = 0; iy < g.y.count; ++iy)
        for (std::size_t ix = 0; ix < g.x.count; ++ix) {
            const GridCell& c = g.at(ix, iy);
            std::string fill = "#bbbbbb";
            if (c.mark == CellMark::oscillatory) fill = "#666666";
            if (c.mark == CellMark::value && std::isfinite(c.value) && (!log_scale || c.value > 0))
                fill = detail::ramp(shade(c.value), lo, hi);
            // y grows upwards
            const double x = ml + cell * static_cast<double>(ix);
            const double y = mt + cell * static_cast<double>(g.y.count - 1 - iy);
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"" << fill << "\"/>\n";
        }
    os << "<text x=\"" << ml << "\" y=\"" << (h - 10) << "\" font-size=\"12\">" << detail::svg_escape(g.x.name) << " "
       << format_number(g.x.min) << " .. " << format_number(g.x.max) << "</text>\n";
    os << "<text x=\"4\" y=\"" << (mt + 12) << "\" font-size=\"12\">" << detail::svg_escape(g.y.name) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace plasticell::io
