#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace plume {

inline constexpr double kDaysPerYear = 365.25;

// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    // Accepts YYYY-MM-DD, optionally followed by a 'T' or ' ' time part which is ignored.
    static Date parse_iso(std::string_view text);
    static Date today();

    constexpr int days() const { return days_; }
    int year() const;
    unsigned month() const;
    unsigned day() const;
    std::string iso() const;

    constexpr auto operator<=>(const Date&) const = default;

private:
    int days_ = 0;
};

} // namespace plume
