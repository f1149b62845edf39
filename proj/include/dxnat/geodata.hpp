#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dxnat/timeutil.hpp"

namespace dxnat::geo {

/// TMC-style identifier of a road segment. Non-empty, unique within a set.
using SegmentKey = std::string;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const LatLon&, const LatLon&) = default;
};

struct BBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
    bool degenerate() const { return lat_max <= lat_min || lon_max <= lon_min; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// A polyline road segment with its posted speed limit.
struct RoadSegment {
    SegmentKey key;
    double speed_limit_mph = 0.0;
    std::vector<LatLon> points; // length >= 2

    friend bool operator==(const RoadSegment&, const RoadSegment&) = default;
};

/// Immutable, key-indexed collection of segments with their enclosing bbox.
class SegmentSet {
public:
    /// Validates every segment and computes the bbox. Throws on duplicate
    /// keys, empty input, short polylines, or out-of-range coordinates.
    static SegmentSet build(std::vector<RoadSegment> segments);

    const std::vector<RoadSegment>& segments() const { return segments_; }
    const RoadSegment* find(const SegmentKey& key) const;
    const BBox& bbox() const { return bbox_; }
    std::size_t size() const { return segments_.size(); }

    friend bool operator==(const SegmentSet& a, const SegmentSet& b) {
        return a.segments_ == b.segments_;
    }

private:
    std::vector<RoadSegment> segments_;
    std::unordered_map<SegmentKey, std::size_t> index_;
    BBox bbox_;
};

/// One per-minute speed observation for one segment.
struct TrafficReading {
    UtcTime timestamp = 0;
    SegmentKey key;
    double speed_mph = 0.0;
    std::optional<double> jam_factor; // 0.0 - 10.0 when present

    friend bool operator==(const TrafficReading&, const TrafficReading&) = default;
};

/**
 * Immutable store of readings indexed by (timestamp, key).
 *
 * At most one reading per (timestamp, key); when several input rows share a
 * slot the last one wins and the overwrite is counted.
 */
class TrafficStore {
public:
    struct BuildStats {
        std::size_t overwritten = 0;
    };

    static TrafficStore build(std::vector<TrafficReading> rows, BuildStats* stats = nullptr);

    std::size_t size() const { return readings_.size(); }
    bool empty() const { return readings_.empty(); }

    /// All readings, sorted by (timestamp, key).
    const std::vector<TrafficReading>& readings() const { return readings_; }

    const TrafficReading* find(UtcTime t, const SegmentKey& key) const;
    std::span<const TrafficReading> at_time(UtcTime t) const;
    bool any_in_range(UtcTime lo, UtcTime hi) const; // inclusive bounds

    UtcTime first_time() const;
    UtcTime last_time() const;

private:
    std::vector<TrafficReading> readings_;
};

enum class EventType { kFootball, kHockey, kAccident, kOther };

EventType event_type_from_string(const std::string& s);
std::string to_string(EventType t);

/// A scheduled or observed disruption (game, accident, ...).
struct Event {
    std::string event_id;
    EventType type = EventType::kOther;
    UtcTime start = 0;
    UtcTime end = 0;
    LatLon location;
    std::optional<std::int64_t> attendance;

    friend bool operator==(const Event&, const Event&) = default;
};

// --- file formats ------------------------------------------------------
//
// segments: one JSON object per line
//   {"tmc_key":"129+04468","speed_limit_mph":40,"points":[[lat,lon],...]}
// traffic: CSV, header "timestamp_utc,tmc_key,speed_mph,jam_factor",
//   ISO-8601 Z timestamps, jam_factor may be empty
// events: one JSON object per line
//   {"event_id":..,"type":..,"start_utc":..,"end_utc":..,"lat":..,"lon":..,
//    "attendance":..}  (attendance optional)

SegmentSet load_segments(const std::filesystem::path& path);
void write_segments(const SegmentSet& set, const std::filesystem::path& path);

TrafficStore load_traffic(const std::filesystem::path& path,
                          TrafficStore::BuildStats* stats = nullptr);
void write_traffic(const TrafficStore& store, const std::filesystem::path& path);

/// Events sorted by (start, event_id).
std::vector<Event> load_events(const std::filesystem::path& path);
void write_events(const std::vector<Event>& events, const std::filesystem::path& path);

/// Speeds of every segment in `keys` that has a reading exactly at t.
/// Missing segments are simply absent; this never fabricates values.
std::unordered_map<SegmentKey, double> speeds_at(const TrafficStore& store, UtcTime t,
                                                 const SegmentSet& keys);

} // namespace dxnat::geo
