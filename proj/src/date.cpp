#include "plume/date.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "plume/errors.hpp"

namespace plume {

namespace chr = std::chrono;

namespace {

chr::year_month_day to_ymd(int days) {
    return chr::year_month_day{chr::sys_days{chr::days{days}}};
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
    if (!ymd.ok()) {
        throw ParseError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                         std::to_string(day));
    }
    return Date{static_cast<int>(chr::sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse_iso(std::string_view text) {
    auto cut = text.find_first_of("T ");
    std::string_view s = cut == std::string_view::npos ? text : text.substr(0, cut);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        throw ParseError("expected ISO date YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    int y = 0;
    unsigned m = 0, d = 0;
    if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) || !parse_int(s.substr(8, 2), d)) {
        throw ParseError("expected ISO date YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    return from_ymd(y, m, d);
}

Date Date::today() {
    auto now = chr::floor<chr::days>(chr::system_clock::now());
    return Date{static_cast<int>(now.time_since_epoch().count())};
}

int Date::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

std::string Date::iso() const {
    auto ymd = to_ymd(days_);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

} // namespace plume
