#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relapse/report_io.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli = RELAPSE_CLI_PATH;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

struct Workspace {
    fs::path dir;
    explicit Workspace(const char* name) : dir(fs::path("/tmp") / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    fs::path config_path() const { return dir / "config.json"; }

    void write_spec(std::uint64_t seed) const {
        write(dir / "spec.json", R"({
            "n_patients": 150, "n_stations": 6, "n_postcodes": 6,
            "seed": )" + std::to_string(seed) + R"(,
            "start_span_weeks": 120, "min_weeks": 60, "max_weeks": 90,
            "base_weekly_hazard": 0.008,
            "coefficients": {"pm10": 0.7, "no2": 0.7}
        })");
    }

    void write_config(std::uint64_t seed) const {
        write(config_path(), R"({
            "paths": {
                "stations": ")" + (dir / "data/stations.csv").string() + R"(",
                "postcodes": ")" + (dir / "data/postcodes.csv").string() + R"(",
                "patients": ")" + (dir / "data/patients.csv").string() + R"(",
                "relapses": ")" + (dir / "data/relapses.csv").string() + R"(",
                "visits": ")" + (dir / "data/visits.csv").string() + R"(",
                "exposure": ")" + (dir / "exposure.csv").string() + R"(",
                "cohort": ")" + (dir / "cohort.csv").string() + R"(",
                "out_dir": ")" + (dir / "out").string() + R"("
            },
            "seed": )" + std::to_string(seed) + R"(,
            "threads": 1,
            "bootstrap_n": 200,
            "grid": {
                "lr_c": [0.1, 1.0, 10.0],
                "rf_bootstrap": [true],
                "rf_min_samples_leaf": [8],
                "rf_n_estimators": [30]
            }
        })");
    }
};

}  // namespace

TEST_CASE("cli pipeline: synth -> link -> cohort -> run -> report") {
    Workspace ws("relapse_cli_test");
    ws.write_spec(3);
    ws.write_config(3);

    CHECK(run_cli("synth --spec " + (ws.dir / "spec.json").string() + " --out " +
                  (ws.dir / "data").string()) == 0);
    for (const char* name : {"stations.csv", "postcodes.csv", "patients.csv", "relapses.csv", "visits.csv"}) {
        CHECK(fs::exists(ws.dir / "data" / name));
    }

    CHECK(run_cli("link --config " + ws.config_path().string()) == 0);
    CHECK(fs::exists(ws.dir / "exposure.csv"));
    CHECK(fs::exists(ws.dir / "exposure.csv.schema.json"));

    CHECK(run_cli("cohort --config " + ws.config_path().string()) == 0);
    CHECK(fs::exists(ws.dir / "cohort.csv"));
    CHECK(fs::exists(ws.dir / "out/matching_report.txt"));
    const std::string match_report = slurp(ws.dir / "out/matching_report.txt");
    CHECK(match_report.find("cases:") != std::string::npos);
    CHECK(match_report.find("pair:") != std::string::npos);

    CHECK(run_cli("run --config " + ws.config_path().string()) == 0);
    for (const char* name : {"report.json", "report.txt", "features.txt", "bfs_curve.csv", "bfs_curve.svg"}) {
        CHECK(fs::exists(ws.dir / "out" / name));
    }
    const std::string report_json = slurp(ws.dir / "out/report.json");
    const auto report = relapse::report_from_json(report_json);
    CHECK(report.cells.size() == 7);
    for (const auto& cell : report.cells) CHECK(cell.ok);

    // no leftover temp files from atomic writes
    for (const auto& entry : fs::recursive_directory_iterator(ws.dir)) {
        CHECK(entry.path().string().find(".tmp") == std::string::npos);
    }

    SUBCASE("byte-identical rerun") {
        const std::string exposure_before = slurp(ws.dir / "exposure.csv");
        const std::string cohort_before = slurp(ws.dir / "cohort.csv");
        CHECK(run_cli("link --config " + ws.config_path().string()) == 0);
        CHECK(run_cli("cohort --config " + ws.config_path().string()) == 0);
        CHECK(run_cli("run --config " + ws.config_path().string()) == 0);
        CHECK(slurp(ws.dir / "exposure.csv") == exposure_before);
        CHECK(slurp(ws.dir / "cohort.csv") == cohort_before);
        CHECK(slurp(ws.dir / "out/report.json") == report_json);
    }

    SUBCASE("report command regenerates identical emissions") {
        const std::string table_before = slurp(ws.dir / "out/report.txt");
        const std::string svg_before = slurp(ws.dir / "out/bfs_curve.svg");
        const std::string csv_before = slurp(ws.dir / "out/bfs_curve.csv");
        fs::remove(ws.dir / "out/report.txt");
        fs::remove(ws.dir / "out/bfs_curve.svg");
        CHECK(run_cli("report --config " + ws.config_path().string()) == 0);
        CHECK(slurp(ws.dir / "out/report.txt") == table_before);
        CHECK(slurp(ws.dir / "out/bfs_curve.svg") == svg_before);
        CHECK(slurp(ws.dir / "out/bfs_curve.csv") == csv_before);
    }
}

TEST_CASE("cli exit codes") {
    Workspace ws("relapse_cli_errors");
    ws.write_spec(1);
    ws.write_config(1);

    // config error: referenced input files do not exist yet
    CHECK(run_cli("link --config " + ws.config_path().string()) == 2);

    // config error: malformed config
    write(ws.config_path(), "{ not json");
    CHECK(run_cli("link --config " + ws.config_path().string()) == 2);

    // config error: invalid synth spec
    write(ws.dir / "bad_spec.json", R"({"base_weekly_hazard": 2.0})");
    CHECK(run_cli("synth --spec " + (ws.dir / "bad_spec.json").string() + " --out " +
                  (ws.dir / "data").string()) == 2);

    // data error: corrupt CSV past the header
    ws.write_config(1);
    CHECK(run_cli("synth --spec " + (ws.dir / "spec.json").string() + " --out " +
                  (ws.dir / "data").string()) == 0);
    write(ws.dir / "data/stations.csv", "station_id,lat,lon,date,variable,value\ns1,abc,9.0,2013-01-01,pm10,1\n");
    CHECK(run_cli("link --config " + ws.config_path().string()) == 3);

    // unknown flags and missing subcommand are parse errors (CLI11 exit code)
    CHECK(run_cli("") != 0);
    CHECK(run_cli("run") != 0);  // --config required
}

TEST_CASE("seed flag overrides the config") {
    Workspace ws("relapse_cli_seed");
    ws.write_spec(7);
    CHECK(run_cli("synth --spec " + (ws.dir / "spec.json").string() + " --seed 8 --out " +
                  (ws.dir / "a").string()) == 0);
    CHECK(run_cli("synth --spec " + (ws.dir / "spec.json").string() + " --seed 8 --out " +
                  (ws.dir / "b").string()) == 0);
    CHECK(run_cli("synth --spec " + (ws.dir / "spec.json").string() + " --seed 9 --out " +
                  (ws.dir / "c").string()) == 0);
    CHECK(slurp(ws.dir / "a/relapses.csv") == slurp(ws.dir / "b/relapses.csv"));
    CHECK(slurp(ws.dir / "a/relapses.csv") != slurp(ws.dir / "c/relapses.csv"));
}
