#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace hlchoice {

/// Calendar date at day granularity.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    constexpr Date(int year, unsigned month, unsigned day)
        : days_(std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}) {}

    /// Parses strict ISO-8601 `YYYY-MM-DD`. Returns nullopt on any malformed or impossible date.
    static std::optional<Date> parse(std::string_view text);

    std::string iso() const;

    constexpr std::chrono::sys_days days() const { return days_; }
    constexpr std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
    constexpr long serial() const { return days_.time_since_epoch().count(); }

    constexpr Date plus_days(long n) const { return Date{days_ + std::chrono::days{n}}; }
    /// 0 = Monday ... 6 = Sunday.
    unsigned iso_weekday_index() const;

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

/// Completed years between `birth` and `on` (floor of the calendar difference).
int whole_years_between(const Date& birth, const Date& on);

}  // namespace hlchoice
