#include "dxnat/geodata.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dxnat::geo {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line_no,
                       const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

} // namespace

SegmentSet SegmentSet::build(std::vector<RoadSegment> segments) {
    if (segments.empty()) throw std::runtime_error("no segments");
    SegmentSet set;
    set.bbox_ = {90.0, -90.0, 180.0, -180.0};
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const RoadSegment& seg = segments[i];
        if (seg.key.empty()) throw std::runtime_error("segment with empty key");
        if (seg.speed_limit_mph <= 0.0) {
            throw std::runtime_error("segment '" + seg.key + "': speed limit must be positive");
        }
        if (seg.points.size() < 2) {
            throw std::runtime_error("segment '" + seg.key + "': polyline needs >= 2 points");
        }
        for (const LatLon& p : seg.points) {
            if (p.lat < -90.0 || p.lat > 90.0 || p.lon < -180.0 || p.lon > 180.0) {
                throw std::runtime_error("segment '" + seg.key + "': coordinate out of range");
            }
            set.bbox_.lat_min = std::min(set.bbox_.lat_min, p.lat);
            set.bbox_.lat_max = std::max(set.bbox_.lat_max, p.lat);
            set.bbox_.lon_min = std::min(set.bbox_.lon_min, p.lon);
            set.bbox_.lon_max = std::max(set.bbox_.lon_max, p.lon);
        }
        if (!set.index_.emplace(seg.key, i).second) {
            throw std::runtime_error("duplicate segment key '" + seg.key + "'");
        }
    }
    set.segments_ = std::move(segments);
    return set;
}

const RoadSegment* SegmentSet::find(const SegmentKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &segments_[it->second];
}

TrafficStore TrafficStore::build(std::vector<TrafficReading> rows, BuildStats* stats) {
    TrafficStore store;
    auto slot_less = [](const TrafficReading& a, const TrafficReading& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.key < b.key;
    };
    auto slot_eq = [](const TrafficReading& a, const TrafficReading& b) {
        return a.timestamp == b.timestamp && a.key == b.key;
    };
    if (!std::is_sorted(rows.begin(), rows.end(), slot_less)) {
        // Sort by (timestamp, key, arrival order) so the last arrival of a
        // duplicate slot survives the dedup below.
        std::vector<std::size_t> order(rows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (!slot_eq(rows[a], rows[b])) return slot_less(rows[a], rows[b]);
            return a < b;
        });
        std::vector<TrafficReading> sorted;
        sorted.reserve(rows.size());
        for (std::size_t i : order) sorted.push_back(std::move(rows[i]));
        rows = std::move(sorted);
    }
    std::size_t overwritten = 0;
    for (auto& row : rows) {
        if (!store.readings_.empty() && slot_eq(store.readings_.back(), row)) {
            store.readings_.back() = std::move(row);
            ++overwritten;
        } else {
            store.readings_.push_back(std::move(row));
        }
    }
    if (stats) stats->overwritten = overwritten;
    return store;
}

const TrafficReading* TrafficStore::find(UtcTime t, const SegmentKey& key) const {
    TrafficReading probe{t, key, 0.0, std::nullopt};
    auto it = std::lower_bound(readings_.begin(), readings_.end(), probe,
                               [](const TrafficReading& a, const TrafficReading& b) {
                                   return a.timestamp != b.timestamp ? a.timestamp < b.timestamp
                                                                     : a.key < b.key;
                               });
    if (it == readings_.end() || it->timestamp != t || it->key != key) return nullptr;
    return &*it;
}

std::span<const TrafficReading> TrafficStore::at_time(UtcTime t) const {
    auto lo = std::lower_bound(
        readings_.begin(), readings_.end(), t,
        [](const TrafficReading& r, UtcTime value) { return r.timestamp < value; });
    auto hi = std::upper_bound(
        readings_.begin(), readings_.end(), t,
        [](UtcTime value, const TrafficReading& r) { return value < r.timestamp; });
    return {&*lo, static_cast<std::size_t>(hi - lo)};
}

bool TrafficStore::any_in_range(UtcTime lo, UtcTime hi) const {
    auto it = std::lower_bound(
        readings_.begin(), readings_.end(), lo,
        [](const TrafficReading& r, UtcTime value) { return r.timestamp < value; });
    return it != readings_.end() && it->timestamp <= hi;
}

UtcTime TrafficStore::first_time() const {
    if (readings_.empty()) throw std::runtime_error("traffic store is empty");
    return readings_.front().timestamp;
}

UtcTime TrafficStore::last_time() const {
    if (readings_.empty()) throw std::runtime_error("traffic store is empty");
    return readings_.back().timestamp;
}

EventType event_type_from_string(const std::string& s) {
    if (s == "football") return EventType::kFootball;
    if (s == "hockey") return EventType::kHockey;
    if (s == "accident") return EventType::kAccident;
    if (s == "other") return EventType::kOther;
    throw std::runtime_error("unknown event type '" + s + "'");
}

std::string to_string(EventType t) {
    switch (t) {
    case EventType::kFootball: return "football";
    case EventType::kHockey: return "hockey";
    case EventType::kAccident: return "accident";
    case EventType::kOther: return "other";
    }
    return "other";
}

SegmentSet load_segments(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<RoadSegment> segments;
    std::unordered_map<SegmentKey, std::size_t> first_line;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(path, line_no, std::string("malformed record: ") + e.what());
        }
        RoadSegment seg;
        try {
            seg.key = j.at("tmc_key").get<std::string>();
            seg.speed_limit_mph = j.at("speed_limit_mph").get<double>();
            for (const auto& pt : j.at("points")) {
                if (!pt.is_array() || pt.size() != 2) {
                    fail(path, line_no, "point must be a [lat, lon] pair");
                }
                seg.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
            }
        } catch (const nlohmann::json::exception& e) {
            fail(path, line_no, std::string("malformed record: ") + e.what());
        }
        if (seg.points.size() < 2) fail(path, line_no, "polyline needs >= 2 points");
        auto [it, inserted] = first_line.emplace(seg.key, line_no);
        if (!inserted) {
            fail(path, line_no,
                 "duplicate key '" + seg.key + "' (first seen on line " +
                     std::to_string(it->second) + ")");
        }
        segments.push_back(std::move(seg));
    }
    if (segments.empty()) throw std::runtime_error(path.string() + ": no segments");
    return SegmentSet::build(std::move(segments));
}

void write_segments(const SegmentSet& set, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    for (const RoadSegment& seg : set.segments()) {
        nlohmann::ordered_json j;
        j["tmc_key"] = seg.key;
        j["speed_limit_mph"] = seg.speed_limit_mph;
        auto pts = nlohmann::ordered_json::array();
        for (const LatLon& p : seg.points) pts.push_back({p.lat, p.lon});
        j["points"] = std::move(pts);
        out << j.dump() << '\n';
    }
}

namespace {

constexpr const char* kTrafficHeader = "timestamp_utc,tmc_key,speed_mph,jam_factor";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

TrafficStore load_traffic(const std::filesystem::path& path, TrafficStore::BuildStats* stats) {
    std::ifstream in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrafficHeader) {
        fail(path, line_no, std::string("expected header '") + kTrafficHeader + "'");
    }
    std::vector<TrafficReading> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 4) fail(path, line_no, "expected 4 fields");
        TrafficReading r;
        try {
            r.timestamp = parse_utc(f[0]);
        } catch (const std::exception& e) {
            fail(path, line_no, e.what());
        }
        r.key = f[1];
        if (r.key.empty()) fail(path, line_no, "empty tmc_key");
        try {
            r.speed_mph = std::stod(f[2]);
        } catch (const std::exception&) {
            fail(path, line_no, "bad speed '" + f[2] + "'");
        }
        if (r.speed_mph < 0.0) fail(path, line_no, "negative speed " + f[2]);
        if (!f[3].empty()) {
            double jf = 0.0;
            try {
                jf = std::stod(f[3]);
            } catch (const std::exception&) {
                fail(path, line_no, "bad jam_factor '" + f[3] + "'");
            }
            if (jf < 0.0 || jf > 10.0) {
                fail(path, line_no, "jam_factor " + f[3] + " outside [0, 10]");
            }
            r.jam_factor = jf;
        }
        rows.push_back(std::move(r));
    }
    return TrafficStore::build(std::move(rows), stats);
}

void write_traffic(const TrafficStore& store, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    out << kTrafficHeader << '\n';
    char buf[64];
    for (const TrafficReading& r : store.readings()) {
        out << format_utc(r.timestamp) << ',' << r.key << ',';
        std::snprintf(buf, sizeof(buf), "%.4f", r.speed_mph);
        out << buf << ',';
        if (r.jam_factor) {
            std::snprintf(buf, sizeof(buf), "%.2f", *r.jam_factor);
            out << buf;
        }
        out << '\n';
    }
}

std::vector<Event> load_events(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::vector<Event> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(path, line_no, std::string("malformed record: ") + e.what());
        }
        Event ev;
        try {
            ev.event_id = j.at("event_id").get<std::string>();
            ev.type = event_type_from_string(j.at("type").get<std::string>());
            ev.start = parse_utc(j.at("start_utc").get<std::string>());
            ev.end = parse_utc(j.at("end_utc").get<std::string>());
            ev.location = {j.at("lat").get<double>(), j.at("lon").get<double>()};
            if (j.contains("attendance") && !j["attendance"].is_null()) {
                ev.attendance = j["attendance"].get<std::int64_t>();
            }
        } catch (const std::exception& e) {
            fail(path, line_no, std::string("malformed record: ") + e.what());
        }
        if (ev.start > ev.end) fail(path, line_no, "event ends before it starts");
        if (ev.location.lat < -90.0 || ev.location.lat > 90.0 || ev.location.lon < -180.0 ||
            ev.location.lon > 180.0) {
            fail(path, line_no, "event location out of range");
        }
        if (ev.attendance && *ev.attendance < 0) fail(path, line_no, "negative attendance");
        events.push_back(std::move(ev));
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.start != b.start ? a.start < b.start : a.event_id < b.event_id;
    });
    return events;
}

void write_events(const std::vector<Event>& events, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    for (const Event& ev : events) {
        nlohmann::ordered_json j;
        j["event_id"] = ev.event_id;
        j["type"] = to_string(ev.type);
        j["start_utc"] = format_utc(ev.start);
        j["end_utc"] = format_utc(ev.end);
        j["lat"] = ev.location.lat;
        j["lon"] = ev.location.lon;
        if (ev.attendance) j["attendance"] = *ev.attendance;
        out << j.dump() << '\n';
    }
}

std::unordered_map<SegmentKey, double> speeds_at(const TrafficStore& store, UtcTime t,
                                                 const SegmentSet& keys) {
    std::unordered_map<SegmentKey, double> result;
    for (const TrafficReading& r : store.at_time(t)) {
        if (keys.find(r.key) != nullptr) result[r.key] = r.speed_mph;
    }
    return result;
}

} // namespace dxnat::geo
