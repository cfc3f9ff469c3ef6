#include "persistlens/timestamp.hpp"

#include <charconv>
#include <cstdio>

namespace persistlens {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{} && ptr == text.data() + pos + len;
}

}  // namespace

Timestamp Timestamp::from_fields(int year, unsigned month, unsigned day, int hour, int minute,
                                 int second) {
    using namespace std::chrono;
    const sys_days date{year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                       std::chrono::day{day}}};
    return Timestamp{date + hours{hour} + minutes{minute} + std::chrono::seconds{second}};
}

std::optional<Timestamp> Timestamp::parse(std::string_view text) {
    // YYYY-MM-DD HH:MM:SS
    if (text.size() != 19) return std::nullopt;
    if (text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') ||
        text[13] != ':' || text[16] != ':') {
        return std::nullopt;
    }
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!read_int(text, 0, 4, year) || !read_int(text, 5, 2, month) ||
        !read_int(text, 8, 2, day) || !read_int(text, 11, 2, hour) ||
        !read_int(text, 14, 2, minute) || !read_int(text, 17, 2, second)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{year},
                                          std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) return std::nullopt;
    return from_fields(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hour,
                       minute, second);
}

std::string Timestamp::to_string() const {
    using namespace std::chrono;
    const auto day_point = floor<days>(value_);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{value_ - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::string Timestamp::to_iso() const {
    std::string s = to_string();
    s[10] = 'T';
    return s;
}

}  // namespace persistlens
