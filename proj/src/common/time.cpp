#include "edgehr/common/time.hpp"

#include "edgehr/common/error.hpp"

#include <chrono>
#include <cstdio>

namespace edgehr {

namespace {

namespace chr = std::chrono;

bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

[[noreturn]] void bad(std::string_view what, std::string_view text) {
    throw Error(errc::parse, "invalid " + std::string(what) + " '" + std::string(text) + "'");
}

std::int64_t days_of_date(std::string_view text, std::string_view what) {
    int y = 0, m = 0, d = 0;
    if (text.size() < 10 || !digits(text, 0, 4, y) || text[4] != '-' || !digits(text, 5, 2, m) || text[7] != '-' ||
        !digits(text, 8, 2, d)) {
        bad(what, text);
    }
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) bad(what, text);
    return chr::sys_days{ymd}.time_since_epoch().count();
}

} // namespace

std::int64_t now_ms() {
    return chr::duration_cast<chr::milliseconds>(chr::system_clock::now().time_since_epoch()).count();
}

std::string format_date(std::int64_t days) {
    const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(std::int64_t ms) {
    const std::int64_t days = days_of(ms);
    const std::int64_t rem = ms - days * 86'400'000;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", format_date(days).c_str(), static_cast<int>(rem / 3'600'000),
                  static_cast<int>(rem / 60'000 % 60), static_cast<int>(rem / 1000 % 60), static_cast<int>(rem % 1000));
    return buf;
}

std::int64_t parse_date(std::string_view text) {
    if (text.size() != 10) bad("date", text);
    return days_of_date(text, "date");
}

std::int64_t parse_timestamp(std::string_view text) {
    const std::int64_t days = days_of_date(text, "timestamp");
    int hh = 0, mm = 0, ss = 0;
    if (text.size() < 20 || text[10] != 'T' || !digits(text, 11, 2, hh) || text[13] != ':' || !digits(text, 14, 2, mm) ||
        text[16] != ':' || !digits(text, 17, 2, ss) || hh > 23 || mm > 59 || ss > 59) {
        bad("timestamp", text);
    }
    std::size_t pos = 19;
    int frac_ms = 0;
    if (text[pos] == '.') {
        ++pos;
        int scale = 100, count = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (++count > 3) bad("timestamp", text);
            frac_ms += (text[pos] - '0') * scale;
            scale /= 10;
            ++pos;
        }
        if (count == 0) bad("timestamp", text);
    }
    if (pos + 1 != text.size() || text[pos] != 'Z') bad("timestamp", text);
    return days * 86'400'000 + hh * 3'600'000LL + mm * 60'000LL + ss * 1000LL + frac_ms;
}

} // namespace edgehr
