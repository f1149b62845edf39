#include "dxnat/timeutil.hpp"

#include <cstdio>
#include <stdexcept>

namespace dxnat {

std::int64_t days_from_civil(int y, int m, int d) {
    // Howard Hinnant's algorithm, days since 1970-01-01.
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = static_cast<int>(y + (month <= 2));
}

int weekday_from_days(std::int64_t z) {
    // 1970-01-01 was a Thursday; 0 = Sunday.
    return static_cast<int>(z >= -4 ? (z + 4) % 7 : (z + 5) % 7 + 6);
}

std::int64_t seconds_from_civil(const CivilTime& c) {
    return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 + c.minute * 60 +
           c.second;
}

CivilTime civil_from_seconds(std::int64_t s) {
    std::int64_t days = s / 86400;
    std::int64_t rem = s % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    CivilTime c;
    civil_from_days(days, c.year, c.month, c.day);
    c.hour = static_cast<int>(rem / 3600);
    c.minute = static_cast<int>(rem % 3600 / 60);
    c.second = static_cast<int>(rem % 60);
    return c;
}

namespace {

bool all_digits(const std::string& s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) return false;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    return true;
}

int digits(const std::string& s, std::size_t pos, std::size_t n) {
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) v = v * 10 + (s[i] - '0');
    return v;
}

[[noreturn]] void bad_timestamp(const std::string& s) {
    throw std::runtime_error("unparseable timestamp '" + s +
                             "' (expected YYYY-MM-DDTHH:MM[:SS]Z)");
}

} // namespace

UtcTime parse_utc(const std::string& iso) {
    // YYYY-MM-DDTHH:MMZ (17 chars) or YYYY-MM-DDTHH:MM:SSZ (20 chars)
    const bool with_seconds = iso.size() == 20;
    if (iso.size() != 17 && iso.size() != 20) bad_timestamp(iso);
    if (!all_digits(iso, 0, 4) || iso[4] != '-' || !all_digits(iso, 5, 2) || iso[7] != '-' ||
        !all_digits(iso, 8, 2) || iso[10] != 'T' || !all_digits(iso, 11, 2) || iso[13] != ':' ||
        !all_digits(iso, 14, 2)) {
        bad_timestamp(iso);
    }
    CivilTime c;
    c.year = digits(iso, 0, 4);
    c.month = digits(iso, 5, 2);
    c.day = digits(iso, 8, 2);
    c.hour = digits(iso, 11, 2);
    c.minute = digits(iso, 14, 2);
    if (with_seconds) {
        if (iso[16] != ':' || !all_digits(iso, 17, 2) || iso[19] != 'Z') bad_timestamp(iso);
        c.second = digits(iso, 17, 2);
    } else {
        if (iso[16] != 'Z') bad_timestamp(iso);
    }
    if (c.month < 1 || c.month > 12 || c.hour > 23 || c.minute > 59 || c.second > 60) {
        bad_timestamp(iso);
    }
    int y = 0;
    int m = 0;
    int d = 0;
    if (c.day >= 1) civil_from_days(days_from_civil(c.year, c.month, c.day), y, m, d);
    if (y != c.year || m != c.month || d != c.day) bad_timestamp(iso);
    return seconds_from_civil(c);
}

std::string format_utc(UtcTime t) {
    const CivilTime c = civil_from_seconds(t);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                  c.hour, c.minute, c.second);
    return buf;
}

std::string format_utc_compact(UtcTime t) {
    const CivilTime c = civil_from_seconds(t);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ", c.year, c.month, c.day, c.hour,
                  c.minute, c.second);
    return buf;
}

LocalDate parse_date(const std::string& s) {
    if (s.size() != 10 || !all_digits(s, 0, 4) || s[4] != '-' || !all_digits(s, 5, 2) ||
        s[7] != '-' || !all_digits(s, 8, 2)) {
        throw std::runtime_error("unparseable date '" + s + "' (expected YYYY-MM-DD)");
    }
    LocalDate d{digits(s, 0, 4), digits(s, 5, 2), digits(s, 8, 2)};
    int y = 0;
    int m = 0;
    int day = 0;
    if (d.month >= 1 && d.month <= 12 && d.day >= 1) {
        civil_from_days(days_from_civil(d.year, d.month, d.day), y, m, day);
    }
    if (y != d.year || m != d.month || day != d.day) {
        throw std::runtime_error("invalid date '" + s + "'");
    }
    return d;
}

std::string format_date(const LocalDate& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

namespace {

// Day number of the n-th given weekday (0 = Sunday) of a month.
std::int64_t nth_weekday_days(int year, int month, int weekday, int nth) {
    const std::int64_t first = days_from_civil(year, month, 1);
    const int first_wd = weekday_from_days(first);
    int offset = (weekday - first_wd + 7) % 7;
    return first + offset + 7 * (nth - 1);
}

// US DST interval for a year, in local STANDARD-time seconds:
// [2nd Sunday of March 02:00, 1st Sunday of November 01:00).
void us_dst_interval_std(int year, std::int64_t& begin_s, std::int64_t& end_s) {
    begin_s = nth_weekday_days(year, 3, 0, 2) * 86400 + 2 * 3600;
    end_s = nth_weekday_days(year, 11, 0, 1) * 86400 + 1 * 3600;
}

int parse_fixed_offset(const std::string& name) {
    // "UTC+H", "UTC-HH", "UTC+HH:MM"
    const std::string body = name.substr(3);
    if (body.empty()) throw std::runtime_error("bad timezone offset '" + name + "'");
    const int sign = body[0] == '-' ? -1 : 1;
    if (body[0] != '+' && body[0] != '-') throw std::runtime_error("bad timezone '" + name + "'");
    std::size_t pos = 1;
    std::size_t colon = body.find(':');
    int hours = 0, minutes = 0;
    try {
        if (colon == std::string::npos) {
            hours = std::stoi(body.substr(pos));
        } else {
            hours = std::stoi(body.substr(pos, colon - pos));
            minutes = std::stoi(body.substr(colon + 1));
        }
    } catch (const std::exception&) {
        throw std::runtime_error("bad timezone offset '" + name + "'");
    }
    if (hours > 14 || minutes > 59) throw std::runtime_error("bad timezone offset '" + name + "'");
    return sign * (hours * 3600 + minutes * 60);
}

} // namespace

Timezone Timezone::from_name(const std::string& name) {
    struct ZoneEntry {
        const char* name;
        int std_offset_h;
        bool dst;
    };
    static constexpr ZoneEntry kZones[] = {
        {"UTC", 0, false},
        {"America/Chicago", -6, true},
        {"America/New_York", -5, true},
        {"America/Denver", -7, true},
        {"America/Los_Angeles", -8, true},
        {"America/Phoenix", -7, false},
    };
    Timezone tz;
    tz.name_ = name;
    for (const auto& z : kZones) {
        if (name == z.name) {
            tz.std_offset_s_ = z.std_offset_h * 3600;
            tz.us_dst_ = z.dst;
            return tz;
        }
    }
    if (name.rfind("UTC", 0) == 0) {
        tz.std_offset_s_ = parse_fixed_offset(name);
        tz.us_dst_ = false;
        return tz;
    }
    throw std::runtime_error("unknown timezone '" + name +
                             "' (supported: UTC, UTC+-HH[:MM], contiguous-US IANA zones)");
}

LocalTime Timezone::to_local(UtcTime t) const {
    std::int64_t local_s = t + std_offset_s_;
    if (us_dst_) {
        const CivilTime std_civil = civil_from_seconds(local_s);
        std::int64_t dst_begin = 0, dst_end = 0;
        us_dst_interval_std(std_civil.year, dst_begin, dst_end);
        if (local_s >= dst_begin && local_s < dst_end) local_s += 3600;
    }
    LocalTime lt;
    lt.civil = civil_from_seconds(local_s);
    lt.weekday = weekday_from_days(days_from_civil(lt.civil.year, lt.civil.month, lt.civil.day));
    return lt;
}

UtcTime Timezone::from_local(const CivilTime& c) const {
    const std::int64_t wall_s = seconds_from_civil(c);
    int offset = std_offset_s_;
    if (us_dst_) {
        std::int64_t dst_begin = 0, dst_end = 0;
        us_dst_interval_std(c.year, dst_begin, dst_end);
        // Wall-clock DST window: starts 02:00 standard, ends 02:00 daylight.
        if (wall_s >= dst_begin && wall_s < dst_end + 3600) offset += 3600;
    }
    return wall_s - offset;
}

LocalDate Timezone::local_date(UtcTime t) const {
    const LocalTime lt = to_local(t);
    return {lt.civil.year, lt.civil.month, lt.civil.day};
}

int Timezone::local_minute_of_day(UtcTime t) const {
    const LocalTime lt = to_local(t);
    return lt.civil.hour * 60 + lt.civil.minute;
}

} // namespace dxnat
