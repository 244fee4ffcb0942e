#include "destrack/common/date.hpp"

#include <charconv>
#include <cstdio>

#include "destrack/common/error.hpp"

namespace destrack {

Date::Date(int year, unsigned month, unsigned day) {
    std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                    std::chrono::day{day}};
    if (!ymd.ok()) throw FormatError("invalid calendar date");
    day_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view iso) {
    auto bad = [&] { return FormatError("invalid date '" + std::string(iso) + "', expected YYYY-MM-DD"); };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0, d = 0;
    auto parse_part = [&](std::size_t off, std::size_t len, auto& out) {
        auto [ptr, ec] = std::from_chars(iso.data() + off, iso.data() + off + len, out);
        if (ec != std::errc{} || ptr != iso.data() + off + len) throw bad();
    };
    parse_part(0, 4, y);
    parse_part(5, 2, m);
    parse_part(8, 2, d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw bad();
    return Date{std::chrono::sys_days{ymd}};
}

std::string Date::iso() const {
    std::chrono::year_month_day ymd{day_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace destrack
