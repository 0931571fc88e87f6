#include "relapse/synthetic.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "relapse/cohort.hpp"
#include "relapse/env_linkage.hpp"
#include "relapse/error.hpp"
#include "relapse/logistic.hpp"
#include "relapse/report_io.hpp"
#include "relapse/rng.hpp"

#include "json.hpp"

namespace relapse {

namespace {

constexpr std::uint64_t kStationStream = 1000;
constexpr std::uint64_t kPatientStream = 100000;
constexpr std::uint64_t kOracleStream = 999;

double logit(double p) { return std::log(p / (1.0 - p)); }

std::string postcode_name(std::size_t p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pc%04zu", p);
    return buf;
}

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void validate(const SyntheticSpec& spec) {
    if (spec.n_patients == 0 || spec.n_stations == 0 || spec.n_postcodes == 0) {
        throw ConfigError("synthetic spec: counts must be positive");
    }
    if (!(spec.base_weekly_hazard > 0.0 && spec.base_weekly_hazard < 1.0)) {
        throw ConfigError("synthetic spec: base_weekly_hazard must lie in (0,1)");
    }
    if (spec.missing_rate < 0.0 || spec.missing_rate >= 1.0) {
        throw ConfigError("synthetic spec: missing_rate must lie in [0,1)");
    }
    if (spec.min_weeks < 3 || spec.max_weeks < spec.min_weeks) {
        throw ConfigError("synthetic spec: bad follow-up week range");
    }
    for (const auto& [var, beta] : spec.coefficients) {
        if (!std::isfinite(beta)) throw ConfigError("synthetic spec: non-finite coefficient");
        if (std::find(spec.variables.begin(), spec.variables.end(), var) == spec.variables.end()) {
            throw ConfigError("synthetic spec: coefficient for unknown variable '" + var + "'");
        }
        // a hazard that saturates within a few sigma degenerates the design
        if (sigmoid(logit(spec.base_weekly_hazard) + 4.0 * std::abs(beta)) > 0.95) {
            throw ConfigError("synthetic spec: hazard saturates within 4 sigma; reduce coefficients");
        }
    }
    for (const auto& var : spec.variables) {
        if (!spec.variable_mean.count(var) || !spec.daily_noise.count(var)) {
            throw ConfigError("synthetic spec: variable '" + var + "' lacks mean or noise scale");
        }
        if (!(spec.daily_noise.at(var) > 0.0)) {
            throw ConfigError("synthetic spec: daily noise must be positive for '" + var + "'");
        }
    }
}

struct StationData {
    std::string id;
    double lat, lon;
    // per variable: daily values indexed by day offset from the epoch;
    // NaN marks a masked (missing) day
    std::map<std::string, std::vector<double>> daily;
};

}  // namespace

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    // ||beta|| = 0.954 puts the planted optimum near AUC 0.75; spreading it
    // over six non-seasonal variables keeps the signal visible to
    // sqrt-feature forests
    const double beta = 0.954 / std::sqrt(6.0);
    for (const char* var : {"pm10", "no2", "wind_speed", "precipitation", "humidity", "temp_avg"}) {
        spec.coefficients[var] = beta;
    }
    spec.seasonal_amplitude = {{"temp_min", 8.0}, {"temp_max", 10.0}};
    return spec;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
    nlohmann::json j;
    j["n_patients"] = spec.n_patients;
    j["n_stations"] = spec.n_stations;
    j["n_postcodes"] = spec.n_postcodes;
    j["seed"] = spec.seed;
    j["variables"] = spec.variables;
    j["variable_mean"] = spec.variable_mean;
    j["daily_noise"] = spec.daily_noise;
    j["seasonal_amplitude"] = spec.seasonal_amplitude;
    j["coefficients"] = spec.coefficients;
    j["base_weekly_hazard"] = spec.base_weekly_hazard;
    j["missing_rate"] = spec.missing_rate;
    j["edss_missing_rate"] = spec.edss_missing_rate;
    j["age_missing_rate"] = spec.age_missing_rate;
    j["start_span_weeks"] = spec.start_span_weeks;
    j["min_weeks"] = spec.min_weeks;
    j["max_weeks"] = spec.max_weeks;
    return j.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad synthetic spec JSON: ") + e.what());
    }
    SyntheticSpec spec = default_synthetic_spec();
    spec.coefficients.clear();
    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_patients", spec.n_patients);
    get("n_stations", spec.n_stations);
    get("n_postcodes", spec.n_postcodes);
    get("seed", spec.seed);
    get("variables", spec.variables);
    get("variable_mean", spec.variable_mean);
    get("daily_noise", spec.daily_noise);
    get("seasonal_amplitude", spec.seasonal_amplitude);
    get("coefficients", spec.coefficients);
    get("base_weekly_hazard", spec.base_weekly_hazard);
    get("missing_rate", spec.missing_rate);
    get("edss_missing_rate", spec.edss_missing_rate);
    get("age_missing_rate", spec.age_missing_rate);
    get("start_span_weeks", spec.start_span_weeks);
    get("min_weeks", spec.min_weeks);
    get("max_weeks", spec.max_weeks);
    validate(spec);
    return spec;
}

SyntheticDataset generate_cohort(const SyntheticSpec& spec) {
    validate(spec);

    const std::size_t horizon_weeks = spec.start_span_weeks + spec.max_weeks + 3;
    const std::size_t horizon_days = horizon_weeks * 7;

    // Stations and their daily series. Masked days are generated then dropped,
    // so the hazard below sees exactly what the pipeline's linkage will see.
    std::vector<StationData> stations(spec.n_stations);
    for (std::size_t s = 0; s < spec.n_stations; ++s) {
        StationData& station = stations[s];
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "st%03zu", s);
            station.id = buf;
        }
        Rng coord_rng = Rng::substream(spec.seed, kStationStream + s);
        station.lat = 44.5 + coord_rng.uniform01() * 2.0;
        station.lon = 7.5 + coord_rng.uniform01() * 3.0;
        for (std::size_t v = 0; v < spec.variables.size(); ++v) {
            const std::string& var = spec.variables[v];
            Rng rng = Rng::substream(spec.seed, kStationStream + 97 * (s + 1) + 7919 * v);
            const double mu = spec.variable_mean.at(var);
            const double sd = spec.daily_noise.at(var);
            const double amp =
                spec.seasonal_amplitude.count(var) ? spec.seasonal_amplitude.at(var) : 0.0;
            std::vector<double>& daily = station.daily[var];
            daily.resize(horizon_days);
            for (std::size_t d = 0; d < horizon_days; ++d) {
                const double doy = static_cast<double>(d % 365);
                const double seasonal = amp * std::sin(2.0 * std::numbers::pi * doy / 365.0);
                const double value = mu + seasonal + sd * rng.normal();
                daily[d] = rng.uniform01() < spec.missing_rate ? std::nan("") : value;
            }
        }
    }

    // Postcodes scattered over the same region.
    std::vector<std::array<double, 2>> postcode_coords(spec.n_postcodes);
    Rng postcode_rng = Rng::substream(spec.seed, kStationStream - 1);
    for (auto& coord : postcode_coords) {
        coord[0] = 44.5 + postcode_rng.uniform01() * 2.0;
        coord[1] = 7.5 + postcode_rng.uniform01() * 3.0;
    }
    // same metric and tie rule as the linkage stage, so the station that
    // drives a patient's hazard is the one the pipeline will read back
    const auto nearest = [&](std::size_t postcode) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < stations.size(); ++s) {
            const double d = haversine_km(postcode_coords[postcode][0], postcode_coords[postcode][1],
                                          stations[s].lat, stations[s].lon);
            if (d < best_d || (d == best_d && stations[s].id < stations[best].id)) {
                best_d = d;
                best = s;
            }
        }
        return best;
    };

    // weekly station means over observed days, as the linkage computes them
    const auto weekly_mean = [&](std::size_t s, const std::string& var, std::size_t week) {
        const auto& daily = stations[s].daily.at(var);
        double sum = 0.0;
        int n = 0;
        for (std::size_t d = week * 7; d < week * 7 + 7 && d < daily.size(); ++d) {
            if (!std::isnan(daily[d])) {
                sum += daily[d];
                ++n;
            }
        }
        return n == 0 ? std::nan("") : sum / n;
    };

    const double alpha = logit(spec.base_weekly_hazard);

    std::ostringstream statics, relapses, visits;
    statics << "id,postcode,onset_date,diagnosis_date,follow_up_start,follow_up_end,sex,age_at_onset,"
               "ethnicity,residence_classification,ms_in_pediatric_age,spinal_cord_onset,brainstem_onset,"
               "eye_onset,supratentorial_onset,other_symptoms_onset\n";
    relapses << "id,date\n";
    visits << "id,date,edss";
    for (const auto& fs : functional_system_names) visits << "," << fs;
    visits << "\n";

    SyntheticDataset out;
    for (std::size_t i = 0; i < spec.n_patients; ++i) {
        Rng rng = Rng::substream(spec.seed, kPatientStream + i);
        char id[32];
        std::snprintf(id, sizeof id, "p%05zu", i);

        const std::size_t postcode = static_cast<std::size_t>(rng.below(spec.n_postcodes));
        const std::size_t station = nearest(postcode);

        const std::size_t start_week = 1 + static_cast<std::size_t>(rng.below(spec.start_span_weeks));
        const std::size_t n_weeks =
            spec.min_weeks + static_cast<std::size_t>(rng.below(spec.max_weeks - spec.min_weeks + 1));
        const Date fu_start = week_start(static_cast<int>(start_week));
        const Date fu_end = week_start(static_cast<int>(start_week + n_weeks)) - std::chrono::days{1};

        const double age = std::clamp(30.0 + 8.0 * rng.normal(), 6.0, 70.0);
        const int onset_back_days = 180 + static_cast<int>(rng.below(2500));
        const Date onset = fu_start - std::chrono::days{onset_back_days};
        const Date diagnosis = onset + std::chrono::days{static_cast<int>(rng.below(400))};

        const double sex = rng.uniform01() < 0.7 ? 1.0 : 0.0;
        const double eth_draw = rng.uniform01();
        const std::string ethnicity =
            eth_draw < 0.85 ? "caucasian" : (eth_draw < 0.95 ? "black_african" : "hispanic");
        const double res_draw = rng.uniform01();
        const std::string residence = res_draw < 0.5 ? "towns" : (res_draw < 0.8 ? "cities" : "rural_area");

        statics << id << "," << postcode_name(postcode) << "," << to_iso(onset) << "," << to_iso(diagnosis)
                << "," << to_iso(fu_start) << "," << to_iso(fu_end) << "," << num(sex) << ","
                << (rng.uniform01() < spec.age_missing_rate ? "" : num(std::round(age * 10.0) / 10.0)) << ","
                << ethnicity << "," << residence << "," << (age < 18.0 ? 1 : 0) << ","
                << (rng.uniform01() < 0.3 ? 1 : 0) << "," << (rng.uniform01() < 0.25 ? 1 : 0) << ","
                << (rng.uniform01() < 0.35 ? 1 : 0) << "," << (rng.uniform01() < 0.3 ? 1 : 0) << ","
                << (rng.uniform01() < 0.2 ? 1 : 0) << "\n";

        // weekly hazard driven by the previous week's standardized means
        bool relapsed = false;
        for (std::size_t w = start_week + 1; w < start_week + n_weeks; ++w) {
            double score = alpha;
            for (const auto& [var, beta] : spec.coefficients) {
                const double mean = weekly_mean(station, var, w - 1);
                if (std::isnan(mean)) continue;
                const double scale = spec.daily_noise.at(var) / std::sqrt(7.0);
                double base = spec.variable_mean.at(var);
                if (spec.seasonal_amplitude.count(var)) {
                    // remove the deterministic seasonal part so z is centered
                    double seasonal = 0.0;
                    for (std::size_t d = (w - 1) * 7; d < w * 7; ++d) {
                        seasonal += spec.seasonal_amplitude.at(var) *
                                    std::sin(2.0 * std::numbers::pi * static_cast<double>(d % 365) / 365.0);
                    }
                    base += seasonal / 7.0;
                }
                score += beta * (mean - base) / scale;
            }
            if (rng.uniform01() < sigmoid(score)) {
                const Date day = week_start(static_cast<int>(w)) + std::chrono::days{static_cast<int>(rng.below(7))};
                relapses << id << "," << to_iso(day) << "\n";
                relapsed = true;
            }
        }
        (relapsed ? out.n_relapsers : out.n_relapse_free) += 1;

        // visits roughly every 8-20 weeks
        double edss_base = std::clamp(1.0 + 2.5 * rng.uniform01(), 0.0, 6.0);
        for (std::size_t w = start_week; w < start_week + n_weeks; w += 8 + rng.below(13)) {
            const Date day = week_start(static_cast<int>(w)) + std::chrono::days{static_cast<int>(rng.below(7))};
            const double edss =
                std::clamp(std::round((edss_base + 0.8 * rng.normal()) * 2.0) / 2.0, 0.0, 9.5);
            visits << id << "," << to_iso(day) << ",";
            if (rng.uniform01() >= spec.edss_missing_rate) visits << num(edss);
            for (std::size_t fs = 0; fs < functional_system_names.size(); ++fs) {
                visits << "," << rng.below(5);
            }
            visits << "\n";
        }
    }

    std::ostringstream station_csv, postcode_csv;
    station_csv << "station_id,lat,lon,date,variable,value\n";
    for (const auto& station : stations) {
        for (const auto& [var, daily] : station.daily) {
            for (std::size_t d = 0; d < daily.size(); ++d) {
                if (std::isnan(daily[d])) continue;
                station_csv << station.id << "," << num(station.lat) << "," << num(station.lon) << ","
                            << to_iso(exposure_epoch + std::chrono::days{static_cast<int>(d)}) << "," << var
                            << "," << num(daily[d]) << "\n";
            }
        }
    }
    postcode_csv << "postcode,lat,lon\n";
    for (std::size_t p = 0; p < spec.n_postcodes; ++p) {
        postcode_csv << postcode_name(p) << "," << num(postcode_coords[p][0]) << ","
                     << num(postcode_coords[p][1]) << "\n";
    }

    out.stations_csv = station_csv.str();
    out.postcodes_csv = postcode_csv.str();
    out.static_csv = statics.str();
    out.relapses_csv = relapses.str();
    out.visits_csv = visits.str();
    return out;
}

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "stations.csv", dataset.stations_csv);
    write_file_atomic(dir / "postcodes.csv", dataset.postcodes_csv);
    write_file_atomic(dir / "patients.csv", dataset.static_csv);
    write_file_atomic(dir / "relapses.csv", dataset.relapses_csv);
    write_file_atomic(dir / "visits.csv", dataset.visits_csv);
}

double bayes_optimal_auc(const SyntheticSpec& spec, std::size_t n_mc) {
    validate(spec);
    if (n_mc < 100) throw ConfigError("bayes_optimal_auc: n_mc too small");
    const double alpha = logit(spec.base_weekly_hazard);

    std::vector<double> betas;
    for (const auto& [var, beta] : spec.coefficients) {
        (void)var;
        betas.push_back(beta);
    }

    Rng rng = Rng::substream(spec.seed, kOracleStream);
    std::vector<std::pair<double, double>> scored(n_mc);  // (score, case weight)
    for (std::size_t i = 0; i < n_mc; ++i) {
        double s = 0.0;
        for (const double beta : betas) s += beta * rng.normal();
        scored[i] = {s, sigmoid(alpha + s)};
    }
    std::sort(scored.begin(), scored.end());

    // weighted Mann-Whitney: every draw contributes its exact case/control
    // probability mass
    double auc_num = 0.0, total_case = 0.0, total_ctrl = 0.0, ctrl_below = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        std::size_t j = i;
        double case_block = 0.0, ctrl_block = 0.0;
        while (j < scored.size() && scored[j].first == scored[i].first) {
            case_block += scored[j].second;
            ctrl_block += 1.0 - scored[j].second;
            ++j;
        }
        auc_num += case_block * (ctrl_below + 0.5 * ctrl_block);
        ctrl_below += ctrl_block;
        total_case += case_block;
        total_ctrl += ctrl_block;
        i = j;
    }
    return auc_num / (total_case * total_ctrl);
}

}  // namespace relapse
