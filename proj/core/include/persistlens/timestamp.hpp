#pragma once

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace persistlens {

// Naive wall-clock instant with second precision. No timezone is attached;
// the epoch offset is only used for ordering and differences.
class Timestamp {
public:
    constexpr Timestamp() = default;
    constexpr explicit Timestamp(std::chrono::sys_seconds t) : value_(t) {}

    static Timestamp from_fields(int year, unsigned month, unsigned day, int hour, int minute,
                                 int second);

    // Accepts "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS". Rejects out-of-range fields.
    static std::optional<Timestamp> parse(std::string_view text);

    std::chrono::sys_seconds value() const noexcept { return value_; }
    long long seconds() const noexcept { return value_.time_since_epoch().count(); }

    std::string to_string() const;  // "YYYY-MM-DD HH:MM:SS"
    std::string to_iso() const;     // "YYYY-MM-DDTHH:MM:SS"

    friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;

private:
    std::chrono::sys_seconds value_{};
};

struct TimeWindow {
    Timestamp begin;
    Timestamp end;  // inclusive

    bool contains(const Timestamp& t) const noexcept { return begin <= t && t <= end; }
};

}  // namespace persistlens
