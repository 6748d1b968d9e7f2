#pragma once

// JSON scenario configuration. Every object rejects unknown keys and every
// diagnostic names the offending field path.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plasticell/core_model.hpp"
#include "plasticell/dynamics.hpp"
#include "plasticell/errors.hpp"

namespace plasticell::io {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

struct OutputOptions {
    std::string dir = ".";
    std::string format = "csv";  ///< csv | json
    bool svg = false;
    std::string prefix;  ///< file stem; empty means the subcommand name

    friend bool operator==(const OutputOptions&, const OutputOptions&) = default;
};

struct ScenarioConfig {
    CellSpec model;
    std::optional<CellState> initial;
    std::optional<StimulusProfile> stimulus;
    std::string experiment;  ///< experiment name, may be empty
    json experiment_params = json::object();
    IntegratorConfig integrator;
    OutputOptions output;

    friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
        auto same_integrator = [](const IntegratorConfig& x, const IntegratorConfig& y) {
            return x.step == y.step && x.output_stride == y.output_stride && x.steady_tol == y.steady_tol &&
                   x.max_time == y.max_time;
        };
        return a.model == b.model && a.initial == b.initial && a.stimulus == b.stimulus &&
               a.experiment == b.experiment && a.experiment_params == b.experiment_params &&
               same_integrator(a.integrator, b.integrator) && a.output == b.output;
    }
};

/// Field-path-aware accessor over a JSON object.
class Fields {
  public:
    Fields(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_->contains(key); }

    const json& raw(const std::string& key) const {
        if (!has(key)) throw ConfigError(at(key), "required field is missing");
        return (*j_)[key];
    }

    double number(const std::string& key) const { return as_number(raw(key), at(key)); }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    double positive(const std::string& key, double fallback) const {
        const double v = number(key, fallback);
        if (!(v > 0.0)) throw ConfigError(at(key), "must be > 0");
        return v;
    }

    double nonnegative(const std::string& key, double fallback) const {
        const double v = number(key, fallback);
        if (!(v >= 0.0)) throw ConfigError(at(key), "must be >= 0");
        return v;
    }

    long integer(const std::string& key, long fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
        return v.get<long>();
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], at(key) + "[" + std::to_string(k) + "]"));
        return out;
    }

    /// Throws on any key not in `allowed`.
    void only(std::initializer_list<const char*> allowed) const {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, _] : j_->items())
            if (!ok.count(key)) throw ConfigError(at(key), "unknown key");
    }

    static double as_number(const json& v, const std::string& where) {
        if (!v.is_number()) throw ConfigError(where, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(where, "must be finite");
        return d;
    }

  private:
    const json* j_;
    std::string path_;
};

namespace detail {

inline std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline CellSpec parse_model(const json& j, std::optional<CellState>& initial) {
    Fields f(j, "model");
    f.only({"factories", "opposition", "initial"});
    const json& facs = f.raw("factories");
    if (!facs.is_array() || facs.empty()) throw ConfigError("model.factories", "expected a non-empty array");

    CellSpec spec;
    for (std::size_t i = 0; i < facs.size(); ++i) {
        Fields q(facs[i], "model.factories[" + std::to_string(i) + "]");
        q.only({"G", "K", "R", "I"});
        // Positivity and stability are reported by `validate`, not here.
        spec.factories.push_back({q.number("G"), q.number("K"), q.number("R"), q.number("I")});
    }
    const std::size_t n = spec.factories.size();
    spec.opposition = OppositionMatrix(n);
    if (f.has("opposition")) {
        const json& o = f.raw("opposition");
        if (!o.is_array() || o.size() != n) {
            throw ConfigError("model.opposition", "expected " + std::to_string(n) + " rows");
        }
        for (std::size_t r = 0; r < n; ++r) {
            const std::string row = "model.opposition[" + std::to_string(r) + "]";
            if (!o[r].is_array() || o[r].size() != n) throw ConfigError(row, "expected " + std::to_string(n) + " entries");
            for (std::size_t c = 0; c < n; ++c)
                spec.opposition(r, c) = Fields::as_number(o[r][c], row + "[" + std::to_string(c) + "]");
        }
    }
    if (f.has("initial")) {
        Fields s(f.raw("initial"), "model.initial");
        s.only({"F", "P"});
        CellState st{s.numbers("F"), s.numbers("P")};
        if (st.factory.size() != n) throw ConfigError("model.initial.F", "expected " + std::to_string(n) + " values");
        if (st.product.size() != n) throw ConfigError("model.initial.P", "expected " + std::to_string(n) + " values");
        if (!st.nonnegative()) throw ConfigError("model.initial", "state components must be >= 0");
        initial = std::move(st);
    }
    return spec;
}

inline StimulusProfile parse_stimulus(const json& j, std::size_t n) {
    Fields f(j, "stimulus");
    f.only({"horizon", "segments"});
    const double horizon = f.number("horizon");
    const json& segs = f.raw("segments");
    if (!segs.is_array() || segs.size() != n) {
        throw ConfigError("stimulus.segments", "expected one segment list per factory (" + std::to_string(n) + ")");
    }
    std::vector<std::vector<StimulusSegment>> lists(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string at = "stimulus.segments[" + std::to_string(i) + "]";
        if (!segs[i].is_array() || segs[i].empty()) throw ConfigError(at, "expected a non-empty array");
        for (std::size_t k = 0; k < segs[i].size(); ++k) {
            Fields s(segs[i][k], at + "[" + std::to_string(k) + "]");
            s.only({"t", "c"});
            lists[i].push_back({s.number("t"), s.number("c")});
        }
    }
    try {
        return StimulusProfile(std::move(lists), horizon);
    } catch (const InvalidInput& e) {
        throw ConfigError("stimulus", e.what());
    }
}

inline IntegratorConfig parse_integrator(const json& j) {
    Fields f(j, "integrator");
    f.only({"step", "output_stride", "steady_tol", "max_time"});
    IntegratorConfig cfg;
    cfg.step = f.positive("step", cfg.step);
    const long stride = f.integer("output_stride", cfg.output_stride);
    if (stride < 1) throw ConfigError(f.at("output_stride"), "must be >= 1");
    cfg.output_stride = static_cast<int>(stride);
    cfg.steady_tol = f.positive("steady_tol", cfg.steady_tol);
    cfg.max_time = f.positive("max_time", cfg.max_time);
    return cfg;
}

inline OutputOptions parse_output(const json& j) {
    Fields f(j, "output");
    f.only({"dir", "format", "svg", "prefix"});
    OutputOptions o;
    o.dir = f.string("dir", o.dir);
    o.format = f.string("format", o.format);
    if (o.format != "csv" && o.format != "json") throw ConfigError(f.at("format"), "expected \"csv\" or \"json\"");
    o.svg = f.boolean("svg", o.svg);
    o.prefix = f.string("prefix", o.prefix);
    return o;
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& root) {
    Fields f(root, "");
    f.only({"schema_version", "model", "stimulus", "experiment", "integrator", "output"});
    if (!f.has("schema_version")) throw ConfigError("schema_version", "required field is missing");
    if (f.integer("schema_version", 0) != schema_version) {
        throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(schema_version) + ")");
    }

    ScenarioConfig cfg;
    cfg.model = detail::parse_model(f.raw("model"), cfg.initial);
    if (f.has("stimulus")) cfg.stimulus = detail::parse_stimulus(f.raw("stimulus"), cfg.model.size());
    if (f.has("experiment")) {
        const json& e = f.raw("experiment");
        Fields ef(e, "experiment");
        cfg.experiment = ef.string("name", "");
        if (cfg.experiment.empty()) throw ConfigError("experiment.name", "required field is missing");
        cfg.experiment_params = e;
        cfg.experiment_params.erase("name");
    }
    if (f.has("integrator")) cfg.integrator = detail::parse_integrator(f.raw("integrator"));
    if (f.has("output")) cfg.output = detail::parse_output(f.raw("output"));
    return cfg;
}

/// Parses JSON text; syntax errors are reported by line and column.
inline ScenarioConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigError(detail::line_column(text, byte), std::string("malformed JSON: ") + e.what());
    }
    return parse_config(root);
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(e.where().empty() ? path : path + ": " + e.where(), e.detail());
    }
}

inline json to_json(const ScenarioConfig& cfg) {
    json j;
    j["schema_version"] = schema_version;

    json facs = json::array();
    for (const auto& q : cfg.model.factories)
        facs.push_back({{"G", q.growth}, {"K", q.growth_inhibition}, {"R", q.synthesis}, {"I", q.synthesis_inhibition}});
    j["model"]["factories"] = facs;
    j["model"]["opposition"] = cfg.model.opposition.rows();
    if (cfg.initial) j["model"]["initial"] = {{"F", cfg.initial->factory}, {"P", cfg.initial->product}};

    if (cfg.stimulus) {
        json segs = json::array();
        for (std::size_t i = 0; i < cfg.stimulus->size(); ++i) {
            json list = json::array();
            for (const auto& s : cfg.stimulus->segments(i)) list.push_back({{"t", s.start}, {"c", s.consumption}});
            segs.push_back(list);
        }
        j["stimulus"] = {{"horizon", cfg.stimulus->horizon()}, {"segments", segs}};
    }
    if (!cfg.experiment.empty()) {
        json e = cfg.experiment_params;
        e["name"] = cfg.experiment;
        j["experiment"] = e;
    }
    j["integrator"] = {{"step", cfg.integrator.step},
                       {"output_stride", cfg.integrator.output_stride},
                       {"steady_tol", cfg.integrator.steady_tol},
                       {"max_time", cfg.integrator.max_time}};
    j["output"] = {{"dir", cfg.output.dir},
                   {"format", cfg.output.format},
                   {"svg", cfg.output.svg},
                   {"prefix", cfg.output.prefix}};
    return j;
}

}  // namespace plasticell::io
