#pragma once

#include <chrono>
#include <string>

#include "netfuse/common.hpp"

namespace netfuse {

// Calendar dimensions of a panel. Defaults reproduce a 24-hour day and a
// seven-day week; smaller values are used by tests to keep instances tractable.
struct CalendarDims {
    int n_hours = 24;
    int n_days_of_week = 7;

    int hours_free() const { return n_hours - 1; }      // hour 0 is the baseline
    int dows_free() const { return n_days_of_week - 1; }  // first day is the baseline

    void validate() const
    {
        if (n_hours < 2) throw ValidationError("n_hours must be >= 2");
        if (n_days_of_week < 1) throw ValidationError("n_days_of_week must be >= 1");
    }
};

// A calendar date. day_of_week(): 0 = Monday .. 6 = Sunday.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    static Date parse(const std::string& text);
    std::string to_string() const;

    int day_of_week() const
    {
        using namespace std::chrono;
        const year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                                 std::chrono::day{unsigned(day)}};
        return int(weekday{sys_days{ymd}}.iso_encoding()) - 1;
    }

    bool valid() const
    {
        using namespace std::chrono;
        const year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                                 std::chrono::day{unsigned(day)}};
        return ymd.ok();
    }

    auto operator<=>(const Date&) const = default;
};

inline const char* dow_name(int d)
{
    static const char* names[7] = {"Mo", "Tu", "We", "Th", "Fr", "Sa", "Su"};
    if (d < 0 || d > 6) throw ValidationError("day-of-week index out of range");
    return names[d];
}

}  // namespace netfuse
