#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dxnat/geodata.hpp"
#include "dxnat/timeutil.hpp"

namespace dxnat::synth {

/// Equirectangular ground distance between two coordinates, in meters.
double distance_m(const geo::LatLon& a, const geo::LatLon& b);

geo::LatLon segment_midpoint(const geo::RoadSegment& seg);

/// Distance from the segment midpoint to the event location, in meters.
double segment_event_distance_m(const geo::RoadSegment& seg, const geo::Event& ev);

/// One rush-hour dip: speed drops linearly from `start_h` to a full dip at
/// `peak_h`, then recovers by `end_h` (hours of local day, fractional).
struct RushWindow {
    double start_h = 0.0;
    double peak_h = 0.0;
    double end_h = 0.0;
};

struct EventSpec {
    std::string event_id;
    geo::EventType type = geo::EventType::kOther;
    int day = 0;               // 0-based scenario day
    int start_minute = 13 * 60; // local minutes since midnight
    int duration_minutes = 180;
    int decay_minutes = 60;  // linear recovery after the event ends
    int ramp_minutes = 240;  // linear build-up before the start
    geo::LatLon epicenter;
    double radius_m = 800.0;
    double severity = 0.8;
    std::optional<std::int64_t> attendance;
};

struct ScenarioSpec {
    std::uint64_t seed = 0;
    geo::BBox bbox;
    std::string timezone = "UTC";
    LocalDate start_date;
    int days = 1;
    int segment_count = 1;
    double free_flow_mph = 65.0;
    double speed_limit_mph = 0.0; // 0 means "use free_flow_mph"
    double rush_dip = 0.35;
    std::vector<RushWindow> rush_hours = {{6.5, 8.0, 9.5}, {15.5, 17.0, 18.5}};
    double weekday_factor = 0.9;
    double weekend_factor = 0.99;
    double noise_sigma = 2.0;
    double jitter = 0.3; // node displacement as a fraction of grid spacing
    bool emit_jam_factor = true;
    std::vector<EventSpec> events;

    void validate() const;
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct Scenario {
    geo::SegmentSet segments;
    geo::TrafficStore traffic;
    std::vector<geo::Event> events;
};

/// Lays a jittered street grid in the bbox and simulates per-minute speeds:
/// free-flow shaped by rush-hour dips and a weekday factor, Gaussian noise,
/// clamped to [0, free-flow], then multiplied by each active event's
/// (1 - severity * falloff * ramp). Deterministic given the seed; segments
/// outside every event radius match the event-free run bit for bit.
Scenario generate(const ScenarioSpec& spec);

} // namespace dxnat::synth
