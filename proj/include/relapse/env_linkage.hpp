#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relapse/data_table.hpp"
#include "relapse/dates.hpp"

namespace relapse {

struct Station {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
    // per variable, (date, value) sorted by strictly increasing date
    std::map<std::string, std::vector<std::pair<Date, double>>> series;

    bool reports(std::string_view variable) const { return series.count(std::string(variable)) > 0; }
};

struct PostcodeLocation {
    std::string postcode;
    double lat = 0.0;
    double lon = 0.0;
};

// Great-circle distance on a 6371.0 km sphere. Throws on out-of-range
// coordinates.
double haversine_km(double lat_a, double lon_a, double lat_b, double lon_b);

// Nearest station among those reporting the variable; distance ties take the
// lexicographically smallest id. Throws DataError when no station reports it.
const Station& nearest_station(const PostcodeLocation& loc, std::span<const Station> stations,
                               std::string_view variable);

struct WeeklyStats {
    int week_index = 0;
    double mean = 0.0;
    int coverage = 0;  // non-missing days in the 7-day block, 1..7
};

// Averages a daily series into fixed 7-day blocks from the epoch. Weeks with
// no observed day are omitted. Dates before the epoch are an error.
std::vector<WeeklyStats> weekly_aggregate(std::span<const std::pair<Date, double>> series,
                                          Date epoch = exposure_epoch);

// Fraction of observed days whose value exceeds the threshold (strictly).
// The denominator is observed days, not 7. Throws when all days are missing.
double threshold_ratio(std::span<const std::optional<double>, 7> week_days, double threshold);

struct WeeklyExposure {
    int week_index = 0;
    std::map<std::string, double> means;
    std::map<std::string, int> coverage;
    std::map<std::string, double> ratios;  // only pollutants with a configured threshold
};

struct ExposureConfig {
    std::vector<std::string> variables;
    std::map<std::string, double> thresholds;
    // Per-variable matching lets a patient draw each variable from the
    // nearest station that reports it; otherwise one station serves all.
    bool per_variable_station = true;
};

// 2021 WHO daily guideline levels, in µg/m³. Configuration defaults only;
// nothing downstream depends on these exact numbers.
std::map<std::string, double> default_who_thresholds();

struct ExposureResult {
    DataTable table;
    std::vector<std::string> diagnostics;
};

// One row per (patient, week) with per-variable means, observed-day counts
// and exceedance ratios. Patients whose postcode is absent from the lookup
// are skipped with a diagnostic. Rows are ordered by (patient id, week).
ExposureResult build_exposure_table(std::span<const std::pair<std::string, std::string>> patients,
                                    std::span<const Station> stations,
                                    std::span<const PostcodeLocation> lookup, const ExposureConfig& config);

// Station series CSV: station_id, lat, lon, date, variable, value.
std::vector<Station> load_stations_csv(const std::filesystem::path& path);

// Postcode lookup CSV: postcode, lat, lon.
std::vector<PostcodeLocation> load_postcodes_csv(const std::filesystem::path& path);

// Schema of the exposure table emitted by build_exposure_table.
std::vector<ColumnSpec> exposure_schema(const ExposureConfig& config);

}  // namespace relapse
