#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relapse/dates.hpp"

namespace relapse {

// Generator with a planted linear-logistic ground truth: the weekly relapse
// hazard is sigmoid(logit(base_hazard) + sum_v beta_v * z_v) where z_v is the
// previous week's station mean of variable v, standardized by its theoretical
// scale sd_daily/sqrt(7). That makes the attainable AUC analyzable.
struct SyntheticSpec {
    std::size_t n_patients = 800;
    std::size_t n_stations = 24;
    std::size_t n_postcodes = 24;
    std::uint64_t seed = 1;

    std::vector<std::string> variables{"pm10", "no2",     "wind_speed", "humidity",
                                       "precipitation",   "temp_min",   "temp_max", "temp_avg"};
    std::map<std::string, double> variable_mean{{"pm10", 28.0},     {"no2", 32.0},
                                                {"wind_speed", 3.2}, {"humidity", 70.0},
                                                {"precipitation", 2.4}, {"temp_min", 8.0},
                                                {"temp_max", 17.0},  {"temp_avg", 12.0}};
    std::map<std::string, double> daily_noise{{"pm10", 10.0},      {"no2", 11.0},
                                              {"wind_speed", 1.1}, {"humidity", 9.0},
                                              {"precipitation", 2.0}, {"temp_min", 4.0},
                                              {"temp_max", 4.5},   {"temp_avg", 4.0}};
    std::map<std::string, double> seasonal_amplitude{{"temp_min", 8.0}, {"temp_max", 10.0},
                                                     {"temp_avg", 9.0}, {"humidity", 6.0}};
    std::map<std::string, double> coefficients;  // log-odds per standardized weekly mean

    double base_weekly_hazard = 0.004;
    double missing_rate = 0.03;       // MCAR on daily station values
    double edss_missing_rate = 0.05;  // MCAR on recorded EDSS
    double age_missing_rate = 0.02;

    std::size_t start_span_weeks = 300;  // follow-up starts uniform in weeks 1..span
    std::size_t min_weeks = 80;
    std::size_t max_weeks = 180;
};

SyntheticSpec synthetic_spec_from_json(const std::string& text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

// The calibrated default: two signal variables whose combined effect puts the
// planted optimum near AUC 0.75.
SyntheticSpec default_synthetic_spec();

struct SyntheticDataset {
    std::string stations_csv;
    std::string postcodes_csv;
    std::string static_csv;
    std::string relapses_csv;
    std::string visits_csv;
    std::size_t n_relapsers = 0;
    std::size_t n_relapse_free = 0;
};

// Deterministic per seed. The emitted files are exactly the formats the
// linkage and cohort loaders consume.
SyntheticDataset generate_cohort(const SyntheticSpec& spec);

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir);

// Monte Carlo ceiling: AUC of the true log-odds score over freshly sampled
// case/control feature draws. Each draw contributes its exact case and
// control probabilities as weights, so the estimate is smooth in n_mc and is
// exactly 0.5 for a zero-coefficient spec.
double bayes_optimal_auc(const SyntheticSpec& spec, std::size_t n_mc = 200000);

}  // namespace relapse
