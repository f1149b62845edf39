#include "dxnat/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "dxnat/raster.hpp"
#include "dxnat/rng.hpp"

namespace dxnat::synth {

namespace {

constexpr std::uint64_t kLayoutStream = 0x6c61796f;
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;

double deg_to_rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

int parse_local_minute(const std::string& hhmm) {
    if (hhmm.size() != 5 || hhmm[2] != ':' || !std::isdigit(hhmm[0]) || !std::isdigit(hhmm[1]) ||
        !std::isdigit(hhmm[3]) || !std::isdigit(hhmm[4])) {
        throw std::runtime_error("bad local time '" + hhmm + "' (expected HH:MM)");
    }
    const int h = (hhmm[0] - '0') * 10 + (hhmm[1] - '0');
    const int m = (hhmm[3] - '0') * 10 + (hhmm[4] - '0');
    if (h > 23 || m > 59) throw std::runtime_error("bad local time '" + hhmm + "'");
    return h * 60 + m;
}

std::string format_local_minute(int minute) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
    return buf;
}

double rush_shape(const std::vector<RushWindow>& windows, double hour) {
    double shape = 0.0;
    for (const RushWindow& w : windows) {
        if (hour <= w.start_h || hour >= w.end_h) continue;
        const double tri = hour <= w.peak_h ? (hour - w.start_h) / (w.peak_h - w.start_h)
                                            : (w.end_h - hour) / (w.end_h - w.peak_h);
        shape = std::max(shape, tri);
    }
    return shape;
}

struct ActiveEvent {
    UtcTime ramp_begin = 0;
    UtcTime start = 0;
    UtcTime end = 0;
    UtcTime decay_end = 0;
    double severity = 0.0;
    double radius_m = 0.0;
    std::vector<double> falloff; // per segment, 0 when out of radius
};

double ramp_at(const ActiveEvent& ev, UtcTime t) {
    if (t < ev.ramp_begin || t >= ev.decay_end) return 0.0;
    if (t < ev.start) {
        return static_cast<double>(t - ev.ramp_begin) /
               static_cast<double>(ev.start - ev.ramp_begin);
    }
    if (t < ev.end) return 1.0;
    return 1.0 - static_cast<double>(t - ev.end) / static_cast<double>(ev.decay_end - ev.end);
}

} // namespace

double distance_m(const geo::LatLon& a, const geo::LatLon& b) {
    const double mean_lat = deg_to_rad((a.lat + b.lat) / 2.0);
    const double dy = (a.lat - b.lat) * raster::kMetersPerDegLat;
    const double dx = (a.lon - b.lon) * raster::kMetersPerDegLat * std::cos(mean_lat);
    return std::hypot(dx, dy);
}

geo::LatLon segment_midpoint(const geo::RoadSegment& seg) {
    geo::LatLon mid;
    for (const geo::LatLon& p : seg.points) {
        mid.lat += p.lat;
        mid.lon += p.lon;
    }
    mid.lat /= static_cast<double>(seg.points.size());
    mid.lon /= static_cast<double>(seg.points.size());
    return mid;
}

double segment_event_distance_m(const geo::RoadSegment& seg, const geo::Event& ev) {
    return distance_m(segment_midpoint(seg), ev.location);
}

void ScenarioSpec::validate() const {
    if (bbox.degenerate()) throw std::runtime_error("degenerate extent");
    if (days < 1) throw std::runtime_error("days must be >= 1");
    if (segment_count < 1) throw std::runtime_error("zero segments");
    if (!(free_flow_mph > 0.0 && free_flow_mph <= 80.0)) {
        throw std::runtime_error("free-flow speed must be in (0, 80] mph");
    }
    if (speed_limit_mph < 0.0) throw std::runtime_error("speed limit must be >= 0");
    if (!(rush_dip >= 0.0 && rush_dip < 1.0)) {
        throw std::runtime_error("rush dip must be in [0, 1)");
    }
    for (const RushWindow& w : rush_hours) {
        if (!(0.0 <= w.start_h && w.start_h < w.peak_h && w.peak_h < w.end_h && w.end_h <= 24.0)) {
            throw std::runtime_error("rush window must satisfy 0 <= start < peak < end <= 24");
        }
    }
    auto check_factor = [](double f, const char* what) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw std::runtime_error(std::string(what) + " factor must be in (0, 1]");
        }
    };
    check_factor(weekday_factor, "weekday");
    check_factor(weekend_factor, "weekend");
    if (noise_sigma < 0.0) throw std::runtime_error("noise sigma must be >= 0");
    if (!(jitter >= 0.0 && jitter < 0.5)) throw std::runtime_error("jitter must be in [0, 0.5)");
    std::set<std::string> ids;
    for (const EventSpec& ev : events) {
        if (ev.event_id.empty()) throw std::runtime_error("event id must be non-empty");
        if (!ids.insert(ev.event_id).second) {
            throw std::runtime_error("duplicate event id '" + ev.event_id + "'");
        }
        if (ev.day < 0 || ev.day >= days) {
            throw std::runtime_error("event '" + ev.event_id + "' day out of range");
        }
        if (ev.start_minute < 0 || ev.start_minute >= 24 * 60) {
            throw std::runtime_error("event '" + ev.event_id + "' start out of range");
        }
        if (ev.duration_minutes < 1) {
            throw std::runtime_error("event '" + ev.event_id + "' duration must be >= 1 minute");
        }
        if (ev.decay_minutes < 0 || ev.ramp_minutes < 1) {
            throw std::runtime_error("event '" + ev.event_id + "' bad ramp or decay");
        }
        if (!(ev.severity >= 0.0 && ev.severity <= 1.0)) {
            throw std::runtime_error("event '" + ev.event_id + "' severity must be in [0, 1]");
        }
        if (!(ev.radius_m > 0.0)) {
            throw std::runtime_error("event '" + ev.event_id + "' impact radius must be > 0");
        }
    }
}

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    ScenarioSpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});
    const nlohmann::json& bb = j.at("bbox");
    spec.bbox.lat_min = bb.at("lat_min").get<double>();
    spec.bbox.lat_max = bb.at("lat_max").get<double>();
    spec.bbox.lon_min = bb.at("lon_min").get<double>();
    spec.bbox.lon_max = bb.at("lon_max").get<double>();
    spec.timezone = j.value("timezone", std::string("UTC"));
    spec.start_date = parse_date(j.at("start_date").get<std::string>());
    spec.days = j.at("days").get<int>();
    spec.segment_count = j.at("segment_count").get<int>();
    spec.free_flow_mph = j.value("free_flow_mph", spec.free_flow_mph);
    spec.speed_limit_mph = j.value("speed_limit_mph", spec.speed_limit_mph);
    spec.rush_dip = j.value("rush_dip", spec.rush_dip);
    if (j.contains("rush_hours")) {
        spec.rush_hours.clear();
        for (const nlohmann::json& w : j.at("rush_hours")) {
            if (!w.is_array() || w.size() != 3) {
                throw std::runtime_error("rush_hours entries must be [start, peak, end]");
            }
            spec.rush_hours.push_back(
                {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
        }
    }
    spec.weekday_factor = j.value("weekday_factor", spec.weekday_factor);
    spec.weekend_factor = j.value("weekend_factor", spec.weekend_factor);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.jitter = j.value("jitter", spec.jitter);
    spec.emit_jam_factor = j.value("emit_jam_factor", spec.emit_jam_factor);
    for (const nlohmann::json& e : j.value("events", nlohmann::json::array())) {
        EventSpec ev;
        ev.event_id = e.at("event_id").get<std::string>();
        ev.type = geo::event_type_from_string(e.value("type", std::string("other")));
        ev.day = e.at("day").get<int>();
        ev.start_minute = parse_local_minute(e.at("start_local").get<std::string>());
        ev.duration_minutes = e.at("duration_minutes").get<int>();
        ev.decay_minutes = e.value("decay_minutes", ev.decay_minutes);
        ev.ramp_minutes = e.value("ramp_minutes", ev.ramp_minutes);
        const nlohmann::json& epi = e.at("epicenter");
        if (!epi.is_array() || epi.size() != 2) {
            throw std::runtime_error("epicenter must be [lat, lon]");
        }
        ev.epicenter = {epi[0].get<double>(), epi[1].get<double>()};
        ev.radius_m = e.at("radius_m").get<double>();
        ev.severity = e.at("severity").get<double>();
        if (e.contains("attendance")) ev.attendance = e.at("attendance").get<std::int64_t>();
        spec.events.push_back(std::move(ev));
    }
    spec.validate();
    return spec;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
    nlohmann::json j;
    j["seed"] = spec.seed;
    j["bbox"] = {{"lat_min", spec.bbox.lat_min},
                 {"lat_max", spec.bbox.lat_max},
                 {"lon_min", spec.bbox.lon_min},
                 {"lon_max", spec.bbox.lon_max}};
    j["timezone"] = spec.timezone;
    j["start_date"] = format_date(spec.start_date);
    j["days"] = spec.days;
    j["segment_count"] = spec.segment_count;
    j["free_flow_mph"] = spec.free_flow_mph;
    if (spec.speed_limit_mph > 0.0) j["speed_limit_mph"] = spec.speed_limit_mph;
    j["rush_dip"] = spec.rush_dip;
    nlohmann::json rush = nlohmann::json::array();
    for (const RushWindow& w : spec.rush_hours) {
        rush.push_back(nlohmann::json::array({w.start_h, w.peak_h, w.end_h}));
    }
    j["rush_hours"] = rush;
    j["weekday_factor"] = spec.weekday_factor;
    j["weekend_factor"] = spec.weekend_factor;
    j["noise_sigma"] = spec.noise_sigma;
    j["jitter"] = spec.jitter;
    j["emit_jam_factor"] = spec.emit_jam_factor;
    nlohmann::json events = nlohmann::json::array();
    for (const EventSpec& ev : spec.events) {
        nlohmann::json e;
        e["event_id"] = ev.event_id;
        e["type"] = geo::to_string(ev.type);
        e["day"] = ev.day;
        e["start_local"] = format_local_minute(ev.start_minute);
        e["duration_minutes"] = ev.duration_minutes;
        e["decay_minutes"] = ev.decay_minutes;
        e["ramp_minutes"] = ev.ramp_minutes;
        e["epicenter"] = nlohmann::json::array({ev.epicenter.lat, ev.epicenter.lon});
        e["radius_m"] = ev.radius_m;
        e["severity"] = ev.severity;
        if (ev.attendance) e["attendance"] = *ev.attendance;
        events.push_back(std::move(e));
    }
    j["events"] = events;
    return j;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

Scenario generate(const ScenarioSpec& spec) {
    spec.validate();
    const Timezone tz = Timezone::from_name(spec.timezone);

    // Street grid: g x g jittered nodes, horizontal then vertical edges.
    int g = 2;
    while (2 * g * (g - 1) < spec.segment_count) ++g;
    const double lat_span = spec.bbox.lat_max - spec.bbox.lat_min;
    const double lon_span = spec.bbox.lon_max - spec.bbox.lon_min;
    const double lat_step = lat_span / g;
    const double lon_step = lon_span / g;
    Rng layout(derive_seed(spec.seed, kLayoutStream));
    std::vector<geo::LatLon> nodes(static_cast<std::size_t>(g) * g);
    for (int i = 0; i < g; ++i) {
        for (int k = 0; k < g; ++k) {
            geo::LatLon& n = nodes[static_cast<std::size_t>(i) * g + k];
            n.lat = spec.bbox.lat_min + (i + 0.5) * lat_step +
                    (layout.next_double() * 2.0 - 1.0) * spec.jitter * lat_step;
            n.lon = spec.bbox.lon_min + (k + 0.5) * lon_step +
                    (layout.next_double() * 2.0 - 1.0) * spec.jitter * lon_step;
        }
    }
    const double limit = spec.speed_limit_mph > 0.0 ? spec.speed_limit_mph : spec.free_flow_mph;
    std::vector<geo::RoadSegment> segs;
    segs.reserve(spec.segment_count);
    auto add_edge = [&](int a, int b) {
        if (static_cast<int>(segs.size()) >= spec.segment_count) return;
        geo::RoadSegment s;
        char key[16];
        std::snprintf(key, sizeof key, "129+%05zu", segs.size() + 1);
        s.key = key;
        s.speed_limit_mph = limit;
        s.points = {nodes[a], nodes[b]};
        segs.push_back(std::move(s));
    };
    for (int i = 0; i < g; ++i) {
        for (int k = 0; k + 1 < g; ++k) add_edge(i * g + k, i * g + k + 1);
    }
    for (int i = 0; i + 1 < g; ++i) {
        for (int k = 0; k < g; ++k) add_edge(i * g + k, (i + 1) * g + k);
    }
    if (static_cast<int>(segs.size()) < spec.segment_count) {
        throw std::runtime_error("internal: grid too small for segment count");
    }

    // Events, anchored to local wall-clock times.
    CivilTime midnight;
    midnight.year = spec.start_date.year;
    midnight.month = spec.start_date.month;
    midnight.day = spec.start_date.day;
    const UtcTime t0 = tz.from_local(midnight);
    std::vector<geo::Event> events;
    std::vector<ActiveEvent> active;
    events.reserve(spec.events.size());
    active.reserve(spec.events.size());
    for (const EventSpec& es : spec.events) {
        CivilTime c;
        const std::int64_t day_number =
            days_from_civil(spec.start_date.year, spec.start_date.month, spec.start_date.day) +
            es.day;
        civil_from_days(day_number, c.year, c.month, c.day);
        c.hour = es.start_minute / 60;
        c.minute = es.start_minute % 60;
        c.second = 0;
        geo::Event ev;
        ev.event_id = es.event_id;
        ev.type = es.type;
        ev.start = tz.from_local(c);
        ev.end = ev.start + static_cast<UtcTime>(es.duration_minutes) * 60;
        ev.location = es.epicenter;
        ev.attendance = es.attendance;
        ActiveEvent ae;
        ae.ramp_begin = ev.start - static_cast<UtcTime>(es.ramp_minutes) * 60;
        ae.start = ev.start;
        ae.end = ev.end;
        ae.decay_end = ev.end + static_cast<UtcTime>(es.decay_minutes) * 60;
        ae.severity = es.severity;
        ae.radius_m = es.radius_m;
        ae.falloff.reserve(segs.size());
        for (const geo::RoadSegment& s : segs) {
            const double d_m = distance_m(segment_midpoint(s), ev.location);
            ae.falloff.push_back(std::max(0.0, 1.0 - d_m / es.radius_m));
        }
        active.push_back(std::move(ae));
        events.push_back(std::move(ev));
    }
    std::sort(events.begin(), events.end(), [](const geo::Event& a, const geo::Event& b) {
        return a.start != b.start ? a.start < b.start : a.event_id < b.event_id;
    });

    // Per-minute speeds; noise streams are per (day, segment) so runs with
    // and without events agree exactly outside every impact radius.
    const std::uint64_t noise_base = derive_seed(spec.seed, kNoiseStream);
    const std::size_t n_seg = segs.size();
    std::vector<geo::TrafficReading> rows;
    rows.reserve(static_cast<std::size_t>(spec.days) * 1440 * n_seg);
    std::vector<Rng> streams;
    streams.reserve(n_seg);
    for (int day = 0; day < spec.days; ++day) {
        streams.clear();
        for (std::size_t s = 0; s < n_seg; ++s) {
            streams.emplace_back(derive_seed(
                noise_base, static_cast<std::uint64_t>(day) * 65536 + static_cast<std::uint64_t>(s)));
        }
        for (int m = 0; m < 1440; ++m) {
            const UtcTime t =
                t0 + (static_cast<UtcTime>(day) * 1440 + static_cast<UtcTime>(m)) * 60;
            const LocalTime local = tz.to_local(t);
            const bool weekend = local.weekday == 0 || local.weekday == 6;
            const double day_factor = weekend ? spec.weekend_factor : spec.weekday_factor;
            const double hour = static_cast<double>(local.civil.hour) +
                                static_cast<double>(local.civil.minute) / 60.0;
            const double dip = spec.rush_dip * rush_shape(spec.rush_hours, hour);
            const double profile = spec.free_flow_mph * day_factor * (1.0 - dip);
            for (std::size_t s = 0; s < n_seg; ++s) {
                double speed = profile + streams[s].next_normal() * spec.noise_sigma;
                speed = std::clamp(speed, 0.0, spec.free_flow_mph);
                for (const ActiveEvent& ae : active) {
                    if (ae.falloff[s] <= 0.0) continue;
                    const double r = ramp_at(ae, t);
                    if (r > 0.0) speed *= 1.0 - ae.severity * ae.falloff[s] * r;
                }
                geo::TrafficReading row;
                row.timestamp = t;
                row.key = segs[s].key;
                row.speed_mph = speed;
                if (spec.emit_jam_factor) {
                    row.jam_factor =
                        std::clamp(10.0 * (1.0 - speed / spec.free_flow_mph), 0.0, 10.0);
                }
                rows.push_back(std::move(row));
            }
        }
    }

    Scenario out;
    out.segments = geo::SegmentSet::build(std::move(segs));
    out.traffic = geo::TrafficStore::build(std::move(rows));
    out.events = std::move(events);
    return out;
}

} // namespace dxnat::synth
