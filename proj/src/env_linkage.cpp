#include "relapse/env_linkage.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "relapse/csv.hpp"

namespace relapse {

namespace {

constexpr double kEarthRadiusKm = 6371.0;

void check_coordinates(double lat, double lon) {
    if (!(std::abs(lat) <= 90.0) || !(std::abs(lon) <= 180.0)) {
        throw DataError("coordinates out of range: lat=" + std::to_string(lat) + " lon=" + std::to_string(lon));
    }
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

double haversine_km(double lat_a, double lon_a, double lat_b, double lon_b) {
    check_coordinates(lat_a, lon_a);
    check_coordinates(lat_b, lon_b);
    const double phi_a = deg2rad(lat_a);
    const double phi_b = deg2rad(lat_b);
    const double dphi = deg2rad(lat_b - lat_a);
    const double dlambda = deg2rad(lon_b - lon_a);
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double a = s1 * s1 + std::cos(phi_a) * std::cos(phi_b) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

const Station& nearest_station(const PostcodeLocation& loc, std::span<const Station> stations,
                               std::string_view variable) {
    const Station* best = nullptr;
    double best_dist = 0.0;
    for (const auto& station : stations) {
        if (!station.reports(variable)) continue;
        const double d = haversine_km(loc.lat, loc.lon, station.lat, station.lon);
        if (best == nullptr || d < best_dist || (d == best_dist && station.id < best->id)) {
            best = &station;
            best_dist = d;
        }
    }
    if (best == nullptr) {
        throw DataError("no station reports variable '" + std::string(variable) + "'");
    }
    return *best;
}

std::vector<WeeklyStats> weekly_aggregate(std::span<const std::pair<Date, double>> series, Date epoch) {
    std::map<int, std::pair<double, int>> acc;  // week -> (sum, count)
    for (const auto& [date, value] : series) {
        const int days = days_between(epoch, date);
        if (days < 0) {
            throw DataError("observation on " + to_iso(date) + " precedes epoch " + to_iso(epoch));
        }
        auto& slot = acc[days / 7];
        slot.first += value;
        slot.second += 1;
    }
    std::vector<WeeklyStats> out;
    out.reserve(acc.size());
    for (const auto& [week, sum_count] : acc) {
        out.push_back({week, sum_count.first / sum_count.second, sum_count.second});
    }
    return out;
}

double threshold_ratio(std::span<const std::optional<double>, 7> week_days, double threshold) {
    int observed = 0, above = 0;
    for (const auto& day : week_days) {
        if (!day) continue;
        ++observed;
        if (*day > threshold) ++above;
    }
    if (observed == 0) throw DataError("threshold_ratio: all 7 days missing");
    return static_cast<double>(above) / static_cast<double>(observed);
}

std::map<std::string, double> default_who_thresholds() {
    return {{"pm25", 15.0}, {"pm10", 45.0}, {"no2", 25.0}};
}

std::vector<ColumnSpec> exposure_schema(const ExposureConfig& config) {
    std::vector<ColumnSpec> schema;
    schema.push_back({"patient_id", ColumnKind::Categorical, ColumnCategory::Meta});
    schema.push_back({"week_index", ColumnKind::Numeric, ColumnCategory::Meta});
    for (const auto& var : config.variables) {
        schema.push_back({var + "_mean", ColumnKind::Numeric, ColumnCategory::Environmental});
        schema.push_back({var + "_days", ColumnKind::Numeric, ColumnCategory::Meta});
    }
    for (const auto& var : config.variables) {
        if (config.thresholds.count(var)) {
            schema.push_back({var + "_ratio", ColumnKind::Numeric, ColumnCategory::Environmental});
        }
    }
    return schema;
}

namespace {

struct VariableWeeks {
    // week -> 7 daily slots
    std::map<int, std::array<std::optional<double>, 7>> weeks;
};

VariableWeeks collect_weeks(const std::vector<std::pair<Date, double>>& series) {
    VariableWeeks out;
    for (const auto& [date, value] : series) {
        const int days = days_between(exposure_epoch, date);
        if (days < 0) {
            throw DataError("observation on " + to_iso(date) + " precedes epoch " + to_iso(exposure_epoch));
        }
        out.weeks[days / 7][days % 7] = value;
    }
    return out;
}

}  // namespace

ExposureResult build_exposure_table(std::span<const std::pair<std::string, std::string>> patients,
                                    std::span<const Station> stations,
                                    std::span<const PostcodeLocation> lookup, const ExposureConfig& config) {
    std::unordered_map<std::string, const PostcodeLocation*> by_postcode;
    for (const auto& loc : lookup) by_postcode[loc.postcode] = &loc;

    const auto schema = exposure_schema(config);
    TableBuilder builder(schema);
    std::vector<std::string> diagnostics;

    // Sorted by patient id so the output order is independent of input order
    // and of any parallel linkage.
    std::vector<std::pair<std::string, std::string>> ordered(patients.begin(), patients.end());
    std::sort(ordered.begin(), ordered.end());

    for (const auto& [patient_id, postcode] : ordered) {
        const auto loc_it = by_postcode.find(postcode);
        if (loc_it == by_postcode.end()) {
            diagnostics.push_back("patient '" + patient_id + "': postcode '" + postcode +
                                  "' not in lookup; skipped");
            continue;
        }
        const PostcodeLocation& loc = *loc_it->second;

        // Resolve the serving station for each variable.
        std::map<std::string, const Station*> station_for;
        if (config.per_variable_station) {
            for (const auto& var : config.variables) {
                try {
                    station_for[var] = &nearest_station(loc, stations, var);
                } catch (const DataError&) {
                    station_for[var] = nullptr;
                }
            }
        } else {
            const Station* chosen = nullptr;
            double best_dist = 0.0;
            for (const auto& station : stations) {
                const bool any = std::any_of(config.variables.begin(), config.variables.end(),
                                             [&](const std::string& v) { return station.reports(v); });
                if (!any) continue;
                const double d = haversine_km(loc.lat, loc.lon, station.lat, station.lon);
                if (chosen == nullptr || d < best_dist || (d == best_dist && station.id < chosen->id)) {
                    chosen = &station;
                    best_dist = d;
                }
            }
            for (const auto& var : config.variables) station_for[var] = chosen;
        }

        std::map<std::string, VariableWeeks> per_variable;
        std::map<int, bool> week_union;
        for (const auto& var : config.variables) {
            const Station* station = station_for[var];
            if (station == nullptr) continue;
            const auto it = station->series.find(var);
            if (it == station->series.end()) continue;
            auto weeks = collect_weeks(it->second);
            for (const auto& [w, slots] : weeks.weeks) week_union[w] = true;
            per_variable[var] = std::move(weeks);
        }

        for (const auto& [week, unused] : week_union) {
            (void)unused;
            builder.begin_row();
            builder.set_category(builder.column_index("patient_id"), patient_id);
            builder.set_numeric(builder.column_index("week_index"), week);
            for (const auto& var : config.variables) {
                const auto pv = per_variable.find(var);
                if (pv == per_variable.end()) continue;
                const auto wk = pv->second.weeks.find(week);
                if (wk == pv->second.weeks.end()) continue;
                double sum = 0.0;
                int count = 0;
                for (const auto& day : wk->second) {
                    if (day) {
                        sum += *day;
                        ++count;
                    }
                }
                builder.set_numeric(builder.column_index(var + "_mean"), sum / count);
                builder.set_numeric(builder.column_index(var + "_days"), count);
                const auto th = config.thresholds.find(var);
                if (th != config.thresholds.end()) {
                    builder.set_numeric(builder.column_index(var + "_ratio"),
                                        threshold_ratio(wk->second, th->second));
                }
            }
            builder.end_row();
        }
    }
    return {builder.build(), std::move(diagnostics)};
}

std::vector<Station> load_stations_csv(const std::filesystem::path& path) {
    const std::vector<ColumnSpec> schema{
        {"station_id", ColumnKind::Categorical, ColumnCategory::Meta},
        {"lat", ColumnKind::Numeric, ColumnCategory::Meta},
        {"lon", ColumnKind::Numeric, ColumnCategory::Meta},
        {"date", ColumnKind::Categorical, ColumnCategory::Meta},
        {"variable", ColumnKind::Categorical, ColumnCategory::Meta},
        {"value", ColumnKind::Numeric, ColumnCategory::Meta},
    };
    const DataTable table = read_csv_file(path, schema);

    std::map<std::string, Station> stations;
    const std::size_t c_id = table.column_index("station_id");
    const std::size_t c_lat = table.column_index("lat");
    const std::size_t c_lon = table.column_index("lon");
    const std::size_t c_date = table.column_index("date");
    const std::size_t c_var = table.column_index("variable");
    const std::size_t c_val = table.column_index("value");

    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t c : {c_id, c_lat, c_lon, c_date, c_var}) {
            if (table.is_missing(r, c)) {
                throw DataError("stations CSV row " + std::to_string(r) + ": missing required field");
            }
        }
        if (table.is_missing(r, c_val)) continue;  // missing measurement: day simply absent
        const std::string& id = table.category_at(r, c_id);
        auto& station = stations[id];
        if (station.id.empty()) {
            station.id = id;
            station.lat = table.numeric_at(r, c_lat);
            station.lon = table.numeric_at(r, c_lon);
            check_coordinates(station.lat, station.lon);
        }
        station.series[table.category_at(r, c_var)].emplace_back(parse_date(table.category_at(r, c_date)),
                                                                 table.numeric_at(r, c_val));
    }

    std::vector<Station> out;
    out.reserve(stations.size());
    for (auto& [id, station] : stations) {
        for (auto& [var, series] : station.series) {
            std::sort(series.begin(), series.end());
            for (std::size_t i = 1; i < series.size(); ++i) {
                if (series[i].first == series[i - 1].first) {
                    throw DataError("station '" + id + "' variable '" + var + "': duplicate date " +
                                    to_iso(series[i].first));
                }
            }
        }
        out.push_back(std::move(station));
    }
    return out;
}

std::vector<PostcodeLocation> load_postcodes_csv(const std::filesystem::path& path) {
    const std::vector<ColumnSpec> schema{
        {"postcode", ColumnKind::Categorical, ColumnCategory::Meta},
        {"lat", ColumnKind::Numeric, ColumnCategory::Meta},
        {"lon", ColumnKind::Numeric, ColumnCategory::Meta},
    };
    const DataTable table = read_csv_file(path, schema);
    std::vector<PostcodeLocation> out;
    out.reserve(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (table.is_missing(r, 0) || table.is_missing(r, 1) || table.is_missing(r, 2)) {
            throw DataError("postcodes CSV row " + std::to_string(r) + ": missing field");
        }
        PostcodeLocation loc{table.category_at(r, 0), table.numeric_at(r, 1), table.numeric_at(r, 2)};
        check_coordinates(loc.lat, loc.lon);
        out.push_back(std::move(loc));
    }
    return out;
}

}  // namespace relapse
