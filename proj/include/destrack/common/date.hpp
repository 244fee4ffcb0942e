#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace destrack {

/// Calendar date with day resolution. Serialized as ISO-8601 (YYYY-MM-DD).
class Date {
public:
    constexpr Date() = default;
    explicit constexpr Date(std::chrono::sys_days day) : day_(day) {}
    Date(int year, unsigned month, unsigned day);

    /// Throws FormatError on anything other than a valid YYYY-MM-DD.
    static Date parse(std::string_view iso);

    std::string iso() const;
    std::chrono::sys_days sys_days() const { return day_; }
    long days_since_epoch() const { return day_.time_since_epoch().count(); }

    Date plus_days(long n) const { return Date{day_ + std::chrono::days{n}}; }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days day_{};
};

}  // namespace destrack
