#include "relapse/dates.hpp"

#include <charconv>

namespace relapse {

namespace {

int parse_int_field(std::string_view text, std::size_t pos, std::size_t len) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) {
        throw DataError("invalid date: '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw DataError("invalid date: '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    const int y = parse_int_field(text, 0, 4);
    const int m = parse_int_field(text, 5, 2);
    const int d = parse_int_field(text, 8, 2);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month(static_cast<unsigned>(m)),
                                          std::chrono::day(static_cast<unsigned>(d))};
    if (!ymd.ok()) {
        throw DataError("invalid calendar date: '" + std::string(text) + "'");
    }
    return Date{ymd};
}

std::string to_iso(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[11];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return std::string(buf);
}

int week_index_of(Date d) {
    const int days = days_between(exposure_epoch, d);
    if (days < 0) {
        throw DataError("date " + to_iso(d) + " precedes the aggregation epoch " + to_iso(exposure_epoch));
    }
    return days / 7;
}

int week_of_year(Date week_start_date) {
    const std::chrono::year_month_day ymd{week_start_date};
    const Date jan1{std::chrono::year_month_day{ymd.year(), std::chrono::January, std::chrono::day{1}}};
    const int day_of_year = days_between(jan1, week_start_date) + 1;
    const int woy = (day_of_year - 1) / 7 + 1;
    return woy > 52 ? 52 : woy;
}

Season season_of(Date week_start_date) {
    const std::chrono::year_month_day ymd{week_start_date};
    switch (static_cast<unsigned>(ymd.month())) {
        case 12:
        case 1:
        case 2:
            return Season::Winter;
        case 3:
        case 4:
        case 5:
            return Season::Spring;
        case 6:
        case 7:
        case 8:
            return Season::Summer;
        default:
            return Season::Autumn;
    }
}

std::string_view season_name(Season s) {
    switch (s) {
        case Season::Winter: return "Winter";
        case Season::Spring: return "Spring";
        case Season::Summer: return "Summer";
        case Season::Autumn: return "Autumn";
    }
    return "Unknown";
}

}  // namespace relapse
