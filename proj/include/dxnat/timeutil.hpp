#pragma once

#include <cstdint>
#include <string>

namespace dxnat {

/// Seconds since the Unix epoch, always UTC.
using UtcTime = std::int64_t;

struct CivilTime {
    int year = 1970;
    int month = 1; // 1-12
    int day = 1;   // 1-31
    int hour = 0;
    int minute = 0;
    int second = 0;
};

/// Civil wall-clock time in some zone plus the day of week (0 = Sunday).
struct LocalTime {
    CivilTime civil;
    int weekday = 0;
};

struct LocalDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend bool operator==(const LocalDate&, const LocalDate&) = default;
    friend auto operator<=>(const LocalDate&, const LocalDate&) = default;
};

// Proleptic Gregorian day arithmetic (days relative to 1970-01-01).
std::int64_t days_from_civil(int year, int month, int day);
void civil_from_days(std::int64_t days, int& year, int& month, int& day);
int weekday_from_days(std::int64_t days); // 0 = Sunday

std::int64_t seconds_from_civil(const CivilTime& c);
CivilTime civil_from_seconds(std::int64_t s);

/// Parses "YYYY-MM-DDTHH:MM[:SS]Z". Throws std::runtime_error on bad input.
UtcTime parse_utc(const std::string& iso);
/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_utc(UtcTime t);
/// Compact timestamp for filenames: "YYYYMMDDTHHMMSSZ".
std::string format_utc_compact(UtcTime t);

/// Parses "YYYY-MM-DD".
LocalDate parse_date(const std::string& s);
std::string format_date(const LocalDate& d);

/**
 * Minimal named-timezone support.
 *
 * The toolchain here has no C++20 tz database, so this covers the zones the
 * tool actually needs: "UTC", fixed offsets ("UTC+5", "UTC-06:00"), and the
 * contiguous-US zones with post-2007 DST rules (America/Chicago,
 * America/New_York, America/Denver, America/Los_Angeles, America/Phoenix).
 */
class Timezone {
public:
    static Timezone from_name(const std::string& name);

    LocalTime to_local(UtcTime t) const;

    // Wall-clock to UTC. During the spring-forward gap the nonexistent hour
    // maps as if DST were already in effect; the ambiguous fall-back hour
    // resolves to the DST (earlier) instant.
    UtcTime from_local(const CivilTime& c) const;

    LocalDate local_date(UtcTime t) const;
    int local_minute_of_day(UtcTime t) const;

    const std::string& name() const { return name_; }

private:
    std::string name_ = "UTC";
    int std_offset_s_ = 0;
    bool us_dst_ = false;
};

} // namespace dxnat
