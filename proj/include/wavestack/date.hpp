#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace wavestack {

/// Calendar day, stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);

    /// Strict YYYY-MM-DD. Throws ParseError on anything else, intraday stamps included.
    static Date parse(std::string_view text);

    std::int32_t days() const noexcept { return days_; }
    std::string to_string() const;

    Date operator+(std::int32_t delta) const { return Date(days_ + delta); }
    std::int32_t operator-(Date other) const { return days_ - other.days_; }

    auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

}  // namespace wavestack
