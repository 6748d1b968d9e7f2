#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "plasticell/io/cli.hpp"

using namespace plasticell;
using namespace plasticell::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("plasticell_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "plasticell");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    return out;
}

}  // namespace

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(std::nan("")), "nan");
    EXPECT_EQ(format_number(-INFINITY), "-inf");
    for (double v : {1.0 / 3.0, 1e-300, 6.02214076e23, -2.5e-7}) EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(Config, RoundTripsThroughJson) {
    for (const auto& cmd : subcommands()) {
        const ScenarioConfig cfg = default_config(cmd);
        EXPECT_EQ(parse_config(to_json(cfg)), cfg) << cmd;
    }
    ScenarioConfig cfg = default_config("simulate");
    cfg.model = {{FactoryParams{1, 1, 1.1, 1}, FactoryParams{2, 1, 3, 1}}, OppositionMatrix::pair(0.05, 0.1)};
    cfg.initial = CellState{{1, 2}, {0.5, 0.25}};
    cfg.stimulus = StimulusProfile({{{0, 0.2}, {50, 2.2}}, {{0, 0.3}}}, 80);
    EXPECT_EQ(parse_config(to_json(cfg)), cfg);
    EXPECT_EQ(parse_config_text(to_json(cfg).dump()), cfg);
}

TEST(Config, UnknownKeyNamesFieldPath) {
    json j = to_json(default_config("equilibrium"));
    j["model"]["factories"][0]["Q"] = 1;
    try {
        parse_config(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.where(), "model.factories[0].Q");
    }
    j = to_json(default_config("equilibrium"));
    j["bogus"] = true;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, TypeAndShapeErrorsNameFieldPath) {
    json j = to_json(default_config("equilibrium"));
    j["model"]["factories"][0]["R"] = "big";
    try {
        parse_config(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.where(), "model.factories[0].R");
    }
    j = to_json(default_config("equilibrium"));
    j["model"]["opposition"] = {{0, 1}};
    EXPECT_THROW(parse_config(j), ConfigError);
    j = to_json(default_config("equilibrium"));
    j["schema_version"] = 99;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
    try {
        parse_config_text("{\n  \"schema_version\": 1,\n  \"model\": [1,,]\n}");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.where().rfind("line 3, column", 0), 0u) << e.where();
    }
}

TEST(Csv, TrajectoryColumns) {
    const Trajectory tr = integrate(CellSpec{{FactoryParams{1, 1, 1.5, 1}, FactoryParams{1, 1, 1.5, 1}},
                                             OppositionMatrix(2)},
                                    CellState{{1, 1}, {1, 1}}, StimulusProfile::constant({0.5, 0.5}, 0.05), {});
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    const std::string header = os.str().substr(0, os.str().find('\n'));
    EXPECT_EQ(header, "t,F_1,F_2,P_1,P_2,C_1,C_2,PR_1,PR_2");
}

TEST(Csv, GridMarkers) {
    SweepGrid g{"m", {"x", 0, 1, 2}, {"y", 0, 1, 2},
                {{CellMark::value, 1.5}, {CellMark::invalid, NAN}, {CellMark::oscillatory, 2.0}, {CellMark::failed, NAN}}};
    std::ostringstream os;
    write_grid_csv(os, g);
    EXPECT_EQ(os.str(),
              "# metric,m\n# x,x,0,1,2\n# y,y,0,1,2\ny\\x,0,1\n0,1.5,invalid\n1,oscillatory,failed\n");
}

TEST(Json, EquilibriumReportUsesNullForNaN) {
    const json j = to_json(classify({1, 1, 0.9, 1}, 0.5));
    EXPECT_EQ(j["class"], "non-physical");
    EXPECT_TRUE(j["trace"].is_null());
    EXPECT_TRUE(j["F"].empty());
}

TEST(Files, UnwritablePathIsIoError) {
    EXPECT_THROW(write_file("/proc/plasticell/nope.csv", "x"), IoError);
}

TEST(Svg, WellFormedHeader) {
    const std::string s = line_chart_svg("t", "x", {{"a", {0, 1, 2}, {1, 4, 9}}});
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("<polyline"), std::string::npos);
    SweepGrid g{"m", {"x", 0, 1, 2}, {"y", 0, 1, 1}, {{CellMark::value, 1.0}, {CellMark::value, 3.0}}};
    EXPECT_NE(heatmap_svg(g).find("<rect"), std::string::npos);
}

TEST(Cli, EquilibriumDefaultIsStableNode) {
    const fs::path dir = scratch("eq");
    const CliRun r = cli({"equilibrium", "--out", dir.string(), "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("class=stable-node"), std::string::npos);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
    const json j = json::parse(slurp(dir / "equilibrium.json"));
    EXPECT_EQ(j["class"], "stable-node");
    EXPECT_NEAR(j["F"][0].get<double>(), 1.0, 1e-12);
}

TEST(Cli, ValidateFailsOnUnstableConfig) {
    const fs::path dir = scratch("validate");
    const CliRun r = cli({"validate", "--config", std::string(PLASTICELL_SOURCE_DIR) + "/scenarios/unstable.json",
                          "--out", dir.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("stability-violated"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitOne) {
    const fs::path dir = scratch("bad");
    std::ofstream(dir / "bad.json") << "{\"schema_version\": 1, \"model\": {\"factories\": [{\"G\": 1}]}}";
    const CliRun r = cli({"equilibrium", "--config", (dir / "bad.json").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("model.factories[0].K"), std::string::npos) << r.err;
    EXPECT_EQ(cli({"no-such-command"}).code, 1);
    EXPECT_EQ(cli({"simulate", "--format", "xml"}).code, 1);
}

TEST(Cli, NumericalFailureExitsTwo) {
    const fs::path dir = scratch("numerical");
    json j = to_json(default_config("simulate"));
    // valid but too stiff for the 0.01 step once F approaches 1000
    j["model"]["factories"][0]["R"] = 1.0005;
    j["model"]["initial"] = {{"F", {1.0}}, {"P", {0.5}}};
    j["stimulus"]["horizon"] = 3000.0;
    std::ofstream(dir / "stiff.json") << j.dump();
    const CliRun r = cli({"simulate", "--config", (dir / "stiff.json").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 2) << r.out << r.err;
}

TEST(Cli, CapacityMapBalancedCellTotal) {
    const fs::path dir = scratch("capacity");
    const CliRun r = cli({"capacity-map", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "capacity-map_total.csv");
    std::string line;
    for (int k = 0; k < 3; ++k) std::getline(in, line);
    std::getline(in, line);
    const auto xs = split(line, ',');
    std::size_t col = 0;
    for (std::size_t k = 1; k < xs.size(); ++k)
        if (std::abs(std::stod(xs[k]) - 0.4) < 1e-9) col = k;
    ASSERT_NE(col, 0u);
    bool found = false;
    while (std::getline(in, line)) {
        const auto cells = split(line, ',');
        if (std::abs(std::stod(cells[0]) - 0.4) < 1e-9) {
            EXPECT_NEAR(std::stod(cells[col]), 3.76, 0.05);
            found = true;
        }
    }
    EXPECT_TRUE(found);
}

TEST(Cli, OutputIsByteStable) {
    const fs::path a = scratch("stable_a"), b = scratch("stable_b");
    ASSERT_EQ(cli({"pulse-demo", "--out", a.string(), "--svg"}).code, 0);
    ASSERT_EQ(cli({"pulse-demo", "--out", b.string(), "--svg"}).code, 0);
    EXPECT_EQ(slurp(a / "pulse-demo.csv"), slurp(b / "pulse-demo.csv"));
    EXPECT_EQ(slurp(a / "pulse-demo.svg"), slurp(b / "pulse-demo.svg"));
}

TEST(Cli, ShippedScenariosParse) {
    for (const auto& entry : fs::directory_iterator(fs::path(PLASTICELL_SOURCE_DIR) / "scenarios")) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    }
    for (const auto& cmd : subcommands()) {
        const fs::path p = fs::path(PLASTICELL_SOURCE_DIR) / "scenarios" / (cmd + ".json");
        ASSERT_TRUE(fs::exists(p)) << p;
        EXPECT_EQ(load_config(p.string()), default_config(cmd)) << cmd;
    }
}

TEST(Cli, ExecutableRuns) {
    const fs::path dir = scratch("exe");
    const std::string cmd = std::string(PLASTICELL_CLI) + " nullclines --out " + dir.string() + " > " +
                            (dir / "stdout.txt").string();
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "nullclines.csv"));
    EXPECT_EQ(slurp(dir / "stdout.txt").rfind("nullclines: ", 0), 0u);
}
