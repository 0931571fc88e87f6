#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include "relapse/error.hpp"

namespace relapse {

using Date = std::chrono::sys_days;

// Weekly aggregation counts fixed 7-day blocks from this date.
inline constexpr Date exposure_epoch{std::chrono::year{2013} / std::chrono::January / 1};

// Strict ISO-8601 calendar date, "YYYY-MM-DD".
Date parse_date(std::string_view text);

std::string to_iso(Date d);

inline int days_between(Date from, Date to) {
    return static_cast<int>((to - from).count());
}

// Index of the 7-day block containing d, counted from the epoch.
// Throws DataError for dates before the epoch.
int week_index_of(Date d);

inline Date week_start(int week_index) {
    return exposure_epoch + std::chrono::days{7 * week_index};
}

// 1..52; the residual days 365/366 fold into week 52.
int week_of_year(Date week_start_date);

enum class Season { Winter, Spring, Summer, Autumn };

Season season_of(Date week_start_date);

std::string_view season_name(Season s);

}  // namespace relapse
