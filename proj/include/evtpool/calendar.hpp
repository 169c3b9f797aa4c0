#ifndef EVTPOOL_CALENDAR_HPP
#define EVTPOOL_CALENDAR_HPP

#include <compare>
#include <string>

namespace evtpool {

// Proleptic Gregorian calendar date. Validated on construction/parse.
struct Date {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31

    auto operator<=>(const Date&) const = default;
};

bool is_leap_year(int year);
int days_in_month(int year, int month);
int days_in_year(int year);
int day_of_year(const Date& d); // 1-based

// Parses strict ISO-8601 "YYYY-MM-DD"; throws std::invalid_argument on
// malformed input or impossible dates.
Date parse_date(const std::string& iso);
std::string format_date(const Date& d);

// Fractional year: Jan 1 maps to year.0, the year divided evenly by its
// day count (so 2008-07-01 is 2008 + 182/366).
double decimal_year(const Date& d);

} // namespace evtpool

#endif
