#include "hlchoice/date.hpp"

#include <charconv>
#include <cstdio>

namespace hlchoice {

namespace {

bool parse_digits(std::string_view text, int& out) {
    if (text.empty()) return false;
    for (char c : text) {
        if (c < '0' || c > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
        !parse_digits(text.substr(8, 2), d)) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
}

std::string Date::iso() const {
    auto v = ymd();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                  static_cast<unsigned>(v.day()));
    return buf;
}

unsigned Date::iso_weekday_index() const {
    return std::chrono::weekday{days_}.iso_encoding() - 1;
}

int whole_years_between(const Date& birth, const Date& on) {
    auto b = birth.ymd();
    auto o = on.ymd();
    int years = static_cast<int>(o.year()) - static_cast<int>(b.year());
    if (o.month() < b.month() || (o.month() == b.month() && o.day() < b.day())) --years;
    return years;
}

}  // namespace hlchoice
