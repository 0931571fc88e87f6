#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "relapse/cohort.hpp"
#include "relapse/csv.hpp"
#include "relapse/env_linkage.hpp"
#include "relapse/experiment.hpp"
#include "relapse/parallel.hpp"
#include "relapse/report_io.hpp"
#include "relapse/synthetic.hpp"

namespace {

using namespace relapse;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPartial = 4;

// ${VAR} interpolation for path strings.
std::string interpolate_env(const std::string& s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
            const std::size_t end = s.find('}', i + 2);
            if (end == std::string::npos) throw ConfigError("unterminated ${ in '" + s + "'");
            const std::string name = s.substr(i + 2, end - i - 2);
            const char* value = std::getenv(name.c_str());
            if (value == nullptr) throw ConfigError("environment variable '" + name + "' is not set");
            out += value;
            i = end + 1;
        } else {
            out += s[i++];
        }
    }
    return out;
}

struct RunConfig {
    std::filesystem::path stations, postcodes, patients, relapses, visits;
    std::filesystem::path exposure = "exposure.csv";
    std::filesystem::path cohort = "cohort.csv";
    std::filesystem::path out_dir = "out";

    std::vector<std::string> variables = default_synthetic_spec().variables;
    std::map<std::string, double> thresholds = default_who_thresholds();
    bool per_variable_station = true;

    std::uint64_t seed = 1;
    unsigned threads = 0;  // 0: all cores
    double test_fraction = 0.30;
    std::size_t cv_k = 4;
    std::size_t bootstrap_n = 5000;
    double corr_threshold = 0.3;
    std::vector<std::string> selection_overrides;
    GridSpec grid;
    std::vector<double> bfs_lr_c;  // empty: use grid.lr_c
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
};

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }

    RunConfig config;
    const auto path_of = [&](const nlohmann::json& paths, const char* key,
                             std::filesystem::path& target, bool required) {
        if (paths.contains(key)) {
            target = interpolate_env(paths.at(key).get<std::string>());
        } else if (required) {
            throw ConfigError(std::string("config: paths.") + key + " is required");
        }
    };
    if (!j.contains("paths")) throw ConfigError("config: missing 'paths' object");
    const auto& paths = j.at("paths");
    path_of(paths, "stations", config.stations, true);
    path_of(paths, "postcodes", config.postcodes, true);
    path_of(paths, "patients", config.patients, true);
    path_of(paths, "relapses", config.relapses, true);
    path_of(paths, "visits", config.visits, true);
    path_of(paths, "exposure", config.exposure, false);
    path_of(paths, "cohort", config.cohort, false);
    path_of(paths, "out_dir", config.out_dir, false);

    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("variables", config.variables);
    get("thresholds", config.thresholds);
    get("per_variable_station", config.per_variable_station);
    get("seed", config.seed);
    get("threads", config.threads);
    get("test_fraction", config.test_fraction);
    get("cv_k", config.cv_k);
    get("bootstrap_n", config.bootstrap_n);
    get("corr_threshold", config.corr_threshold);
    get("selection_overrides", config.selection_overrides);
    get("bfs_lr_c", config.bfs_lr_c);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        const auto grid_get = [&](const char* key, auto& field) {
            if (g.contains(key)) field = g.at(key).get<std::decay_t<decltype(field)>>();
        };
        grid_get("lr_c", config.grid.lr_c);
        grid_get("rf_bootstrap", config.grid.rf_bootstrap);
        grid_get("rf_min_samples_leaf", config.grid.rf_min_samples_leaf);
        grid_get("rf_n_estimators", config.grid.rf_n_estimators);
    }

    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.threads) config.threads = *overrides.threads;
    if (overrides.out) config.out_dir = interpolate_env(*overrides.out);

    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
        throw ConfigError("config: test_fraction must lie in (0,1)");
    }
    if (config.cv_k < 2) throw ConfigError("config: cv_k must be >= 2");
    if (config.threads == 0) config.threads = default_threads();
    return config;
}

void require_file(const std::filesystem::path& path, const char* what) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError(std::string(what) + " file not found: '" + path.string() + "'");
    }
}

std::ofstream open_log(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    std::ofstream log(config.out_dir / "run.log", std::ios::app);
    return log;
}

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    return buf;
}

CohortConfig cohort_config_of(const RunConfig& config) {
    CohortConfig cc;
    cc.variables = config.variables;
    cc.thresholds = config.thresholds;
    return cc;
}

int cmd_synth(const std::optional<std::string>& spec_path, const std::string& out_dir,
              const Overrides& overrides) {
    SyntheticSpec spec = default_synthetic_spec();
    if (spec_path) {
        std::ifstream in(*spec_path);
        if (!in) throw ConfigError("cannot open spec file '" + *spec_path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        spec = synthetic_spec_from_json(buf.str());
    }
    if (overrides.seed) spec.seed = *overrides.seed;
    const std::filesystem::path dir = overrides.out ? interpolate_env(*overrides.out) : out_dir;

    const SyntheticDataset dataset = generate_cohort(spec);
    write_dataset(dataset, dir);
    write_file_atomic(dir / "spec.json", synthetic_spec_to_json(spec));
    std::cout << "synth: " << spec.n_patients << " patients (" << dataset.n_relapsers << " with relapses, "
              << dataset.n_relapse_free << " without) -> " << dir.string() << "\n";
    return kExitOk;
}

int cmd_link(const RunConfig& config) {
    require_file(config.stations, "stations");
    require_file(config.postcodes, "postcodes");
    require_file(config.patients, "patients");

    const std::vector<Station> stations = load_stations_csv(config.stations);
    const std::vector<PostcodeLocation> lookup = load_postcodes_csv(config.postcodes);

    // patient -> postcode pairs come from the static table
    std::vector<std::pair<std::string, std::string>> patients;
    {
        // read the full static file but keep only id/postcode
        const DataTable statics = read_csv_file(
            config.patients,
            [] {
                std::vector<ColumnSpec> s;
                for (const char* name :
                     {"id", "postcode", "onset_date", "diagnosis_date", "follow_up_start", "follow_up_end",
                      "ethnicity", "residence_classification"}) {
                    s.push_back({name, ColumnKind::Categorical, ColumnCategory::Meta});
                }
                for (const char* name : {"sex", "age_at_onset", "ms_in_pediatric_age", "spinal_cord_onset",
                                         "brainstem_onset", "eye_onset", "supratentorial_onset",
                                         "other_symptoms_onset"}) {
                    s.push_back({name, ColumnKind::Numeric, ColumnCategory::Meta});
                }
                return s;
            }());
        for (std::size_t r = 0; r < statics.n_rows(); ++r) {
            if (statics.is_missing(r, 0) || statics.is_missing(r, 1)) continue;
            patients.emplace_back(statics.category_at(r, 0), statics.category_at(r, 1));
        }
    }

    ExposureConfig exposure_config;
    exposure_config.variables = config.variables;
    exposure_config.thresholds = config.thresholds;
    exposure_config.per_variable_station = config.per_variable_station;

    const ExposureResult result = build_exposure_table(patients, stations, lookup, exposure_config);

    std::ostringstream csv;
    write_csv(csv, result.table);
    write_file_atomic(config.exposure, csv.str());
    write_file_atomic(config.exposure.string() + ".schema.json", schema_to_json(result.table.schema()));

    auto log = open_log(config);
    log << timestamp() << " link: " << result.table.n_rows() << " exposure rows, "
        << result.diagnostics.size() << " diagnostics\n";
    for (const auto& d : result.diagnostics) std::cerr << "link: " << d << "\n";
    std::cout << "link: wrote " << result.table.n_rows() << " rows for " << patients.size()
              << " patients -> " << config.exposure.string() << "\n";
    if (result.table.n_rows() == 0) std::cerr << "link: warning: empty exposure table\n";
    return result.diagnostics.empty() ? kExitOk : kExitPartial;
}

int cmd_cohort(const RunConfig& config) {
    require_file(config.patients, "patients");
    require_file(config.relapses, "relapses");
    require_file(config.visits, "visits");
    require_file(config.exposure, "exposure");

    const auto exposure_schema_path = config.exposure.string() + ".schema.json";
    require_file(exposure_schema_path, "exposure schema");
    const DataTable exposure = read_csv_file(config.exposure, load_schema_file(exposure_schema_path));

    const CohortConfig cc = cohort_config_of(config);
    const std::vector<PatientTimeline> timelines =
        load_timelines(config.patients, config.relapses, config.visits, exposure, cc);
    const CohortBuildResult result = build_cohort(timelines, cc, config.seed);

    std::ostringstream csv;
    write_csv(csv, result.table);
    write_file_atomic(config.cohort, csv.str());
    write_file_atomic(config.cohort.string() + ".schema.json", schema_to_json(result.table.schema()));

    std::ostringstream match_report;
    match_report << "cases: " << result.n_cases << "\n";
    match_report << "controls: " << result.n_controls << "\n";
    match_report << "unmatched_cases: " << result.unmatched_case_ids.size() << "\n";
    for (const auto& id : result.unmatched_case_ids) match_report << "unmatched: " << id << "\n";
    for (const auto& [case_id, control_id] : result.pairs) {
        match_report << "pair: " << case_id << " " << control_id << "\n";
    }
    write_file_atomic(config.out_dir / "matching_report.txt", match_report.str());

    auto log = open_log(config);
    log << timestamp() << " cohort: " << result.n_cases << " cases, " << result.n_controls
        << " controls, " << result.unmatched_case_ids.size() << " unmatched\n";
    std::cout << "cohort: " << result.n_cases << " cases + " << result.n_controls << " controls ("
              << result.unmatched_case_ids.size() << " unmatched cases) -> " << config.cohort.string()
              << "\n";
    return kExitOk;
}

int cmd_run(const RunConfig& config) {
    require_file(config.cohort, "cohort");
    const auto schema_path = config.cohort.string() + ".schema.json";
    require_file(schema_path, "cohort schema");
    const DataTable cohort = read_csv_file(config.cohort, load_schema_file(schema_path));

    const SplitResult split = stratified_split(cohort, "relapse", config.test_fraction, config.seed);

    ExperimentConfig experiment;
    experiment.grid = config.grid;
    experiment.cv = {config.cv_k, true, config.seed};
    experiment.corr_threshold = config.corr_threshold;
    experiment.selection_overrides = config.selection_overrides;
    experiment.bfs_lr_grid = config.bfs_lr_c.empty() ? config.grid.lr_c : config.bfs_lr_c;
    experiment.bootstrap_n = config.bootstrap_n;
    experiment.seed = config.seed;
    experiment.threads = config.threads;

    const ExperimentReport report = run_experiment(split.train, split.test, "relapse", experiment);
    write_report_files(report, config.out_dir);

    std::size_t failed = 0;
    for (const auto& cell : report.cells) {
        if (!cell.ok) {
            ++failed;
            std::cerr << "run: cell " << model_kind_name(cell.model) << "/"
                      << selection_method_name(cell.setting) << " failed: " << cell.error << "\n";
        }
    }
    auto log = open_log(config);
    log << timestamp() << " run: " << report.cells.size() - failed << "/" << report.cells.size()
        << " cells ok\n";
    std::cout << report_table_text(report);
    std::cout << "run: report files in " << config.out_dir.string() << "\n";
    if (failed == report.cells.size()) return kExitData;
    return failed == 0 ? kExitOk : kExitPartial;
}

int cmd_report(const RunConfig& config) {
    const auto report_path = config.out_dir / "report.json";
    require_file(report_path, "report");
    std::ifstream in(report_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const ExperimentReport report = report_from_json(buf.str());
    write_report_files(report, config.out_dir);
    std::cout << report_table_text(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weekly clinical + environmental relapse prediction pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;

    const auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* config_opt = cmd->add_option("--config", config_path, "config file (JSON)");
        if (needs_config) config_opt->required();
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& v) { overrides.seed = v; }, "seed override");
        cmd->add_option_function<unsigned>(
            "--threads", [&](const unsigned& v) { overrides.threads = v; },
            "worker threads (0 = all cores)");
        cmd->add_option_function<std::string>(
            "--out", [&](const std::string& v) { overrides.out = v; }, "output directory override");
    };

    std::optional<std::string> synth_spec;
    std::string synth_out = "synthetic";
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option_function<std::string>(
        "--spec", [&](const std::string& v) { synth_spec = v; }, "synthetic spec (JSON)");
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { overrides.seed = v; }, "seed override");

    auto* link = app.add_subcommand("link", "match stations and build weekly exposure");
    add_common(link, true);
    auto* cohort = app.add_subcommand("cohort", "build the matched case-control table");
    add_common(cohort, true);
    auto* run = app.add_subcommand("run", "train, select, evaluate, and write reports");
    add_common(run, true);
    auto* report = app.add_subcommand("report", "re-emit report files from report.json");
    add_common(report, true);

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out, overrides);
        const RunConfig config = load_config(config_path, overrides);
        if (link->parsed()) return cmd_link(config);
        if (cohort->parsed()) return cmd_cohort(config);
        if (run->parsed()) return cmd_run(config);
        if (report->parsed()) return cmd_report(config);
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
