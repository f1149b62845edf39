#include <doctest.h>

#include "dxnat/timeutil.hpp"

using namespace dxnat;

TEST_CASE("civil day arithmetic round trips") {
    // 1970-01-01 was a Thursday.
    CHECK(days_from_civil(1970, 1, 1) == 0);
    CHECK(weekday_from_days(0) == 4);
    for (std::int64_t day = -1000; day <= 40000; day += 97) {
        int y, m, d;
        civil_from_days(day, y, m, d);
        CHECK(days_from_civil(y, m, d) == day);
    }
}

TEST_CASE("utc parsing and formatting") {
    const UtcTime t = parse_utc("2016-11-13T12:00:00Z");
    CHECK(format_utc(t) == "2016-11-13T12:00:00Z");
    CHECK(format_utc_compact(t) == "20161113T120000Z");
    CHECK(parse_utc("2016-11-13T12:00Z") == t);
    CHECK(parse_utc("1970-01-01T00:00:00Z") == 0);
    CHECK_THROWS(parse_utc("2016-13-01T00:00Z"));
    CHECK_THROWS(parse_utc("2016-11-13"));
    CHECK_THROWS(parse_utc("not a time"));
}

TEST_CASE("date parsing") {
    const LocalDate d = parse_date("2025-01-06");
    CHECK(d.year == 2025);
    CHECK(d.month == 1);
    CHECK(d.day == 6);
    CHECK(format_date(d) == "2025-01-06");
    CHECK_THROWS(parse_date("2025-1-6"));
    CHECK_THROWS(parse_date("2025-02-30"));
}

TEST_CASE("utc zone is the identity") {
    const Timezone utc = Timezone::from_name("UTC");
    const UtcTime t = parse_utc("2025-06-01T17:30:00Z");
    const LocalTime lt = utc.to_local(t);
    CHECK(lt.civil.hour == 17);
    CHECK(lt.civil.minute == 30);
    CHECK(utc.from_local(lt.civil) == t);
}

TEST_CASE("chicago standard and daylight offsets") {
    const Timezone chi = Timezone::from_name("America/Chicago");

    // November: CST, UTC-6.
    LocalTime lt = chi.to_local(parse_utc("2016-11-13T18:00:00Z"));
    CHECK(lt.civil.hour == 12);
    CHECK(lt.weekday == 0); // 2016-11-13 was a Sunday

    // July: CDT, UTC-5.
    lt = chi.to_local(parse_utc("2025-07-01T17:00:00Z"));
    CHECK(lt.civil.hour == 12);
}

TEST_CASE("chicago dst transitions in 2025") {
    const Timezone chi = Timezone::from_name("America/Chicago");

    // Spring forward: 2025-03-09 02:00 CST -> 03:00 CDT.
    CHECK(chi.to_local(parse_utc("2025-03-09T07:59:00Z")).civil.hour == 1);
    CHECK(chi.to_local(parse_utc("2025-03-09T08:00:00Z")).civil.hour == 3);

    // Fall back: 2025-11-02 02:00 CDT -> 01:00 CST.
    CHECK(chi.to_local(parse_utc("2025-11-02T06:59:00Z")).civil.hour == 1);
    CHECK(chi.to_local(parse_utc("2025-11-02T07:00:00Z")).civil.hour == 1);
    CHECK(chi.to_local(parse_utc("2025-11-02T08:00:00Z")).civil.hour == 2);
}

TEST_CASE("from_local inverts to_local for unambiguous times") {
    const Timezone chi = Timezone::from_name("America/Chicago");
    for (const char* stamp : {"2025-01-06T12:00:00Z", "2025-07-04T04:30:00Z",
                              "2025-03-08T20:00:00Z", "2025-11-03T01:00:00Z"}) {
        const UtcTime t = parse_utc(stamp);
        CHECK(chi.from_local(chi.to_local(t).civil) == t);
    }
}

TEST_CASE("from_local resolves gaps and folds toward daylight time") {
    const Timezone chi = Timezone::from_name("America/Chicago");

    // 02:30 on 2025-03-09 does not exist; resolved with the DST offset.
    CivilTime gap{2025, 3, 9, 2, 30, 0};
    CHECK(format_utc(chi.from_local(gap)) == "2025-03-09T07:30:00Z");

    // 01:30 on 2025-11-02 happens twice; the DST reading wins.
    CivilTime fold{2025, 11, 2, 1, 30, 0};
    CHECK(format_utc(chi.from_local(fold)) == "2025-11-02T06:30:00Z");
}

TEST_CASE("fixed offset zones") {
    const Timezone plus5 = Timezone::from_name("UTC+5");
    CHECK(plus5.to_local(parse_utc("2025-01-01T00:00:00Z")).civil.hour == 5);
    const Timezone minus6 = Timezone::from_name("UTC-06:00");
    CHECK(minus6.to_local(parse_utc("2025-01-01T00:00:00Z")).civil.hour == 18);
    CHECK_THROWS(Timezone::from_name("Mars/Olympus"));
}

TEST_CASE("phoenix ignores daylight saving") {
    const Timezone phx = Timezone::from_name("America/Phoenix");
    CHECK(phx.to_local(parse_utc("2025-07-01T19:00:00Z")).civil.hour == 12);
    CHECK(phx.to_local(parse_utc("2025-01-01T19:00:00Z")).civil.hour == 12);
}

TEST_CASE("local date and minute helpers") {
    const Timezone chi = Timezone::from_name("America/Chicago");
    const UtcTime t = parse_utc("2025-01-07T03:30:00Z"); // 21:30 the previous local day
    CHECK(chi.local_date(t) == LocalDate{2025, 1, 6});
    CHECK(chi.local_minute_of_day(t) == 21 * 60 + 30);
}
