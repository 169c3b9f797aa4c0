#include "evtpool/calendar.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace evtpool {

bool is_leap_year(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                    31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap_year(year))
        return 29;
    return lengths[static_cast<std::size_t>(month - 1)];
}

int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

int day_of_year(const Date& d) {
    int doy = d.day;
    for (int m = 1; m < d.month; ++m)
        doy += days_in_month(d.year, m);
    return doy;
}

Date parse_date(const std::string& iso) {
    auto fail = [&]() -> Date {
        throw std::invalid_argument("invalid ISO-8601 date: '" + iso + "'");
    };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        return fail();
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(iso[i])))
            return fail();
    Date d;
    std::from_chars(iso.data(), iso.data() + 4, d.year);
    std::from_chars(iso.data() + 5, iso.data() + 7, d.month);
    std::from_chars(iso.data() + 8, iso.data() + 10, d.day);
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
        return fail();
    return d;
}

std::string format_date(const Date& d) {
    char buf[11];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return std::string(buf);
}

double decimal_year(const Date& d) {
    return d.year + static_cast<double>(day_of_year(d) - 1) / days_in_year(d.year);
}

} // namespace evtpool
