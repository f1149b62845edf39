#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dxnat/geodata.hpp"
#include "dxnat/raster.hpp"
#include "dxnat/timeutil.hpp"

namespace dxnat::encode {

inline constexpr int kInputClasses = 31;  // 24 hours + 7 weekdays
inline constexpr int kOutputClasses = 9;  // recurring + 8 event windows
inline constexpr int kEventWindows = 8;

/// Hour of day (0-23) and weekday (0-6, 0 = Sunday) in some local timezone.
struct TimeFeatures {
    int hour = 0;
    int weekday = 0;

    friend bool operator==(const TimeFeatures&, const TimeFeatures&) = default;
};

/// Whether a timestamp falls in an event's influence period, and if so which
/// one-hour window (0-7) around the event start it belongs to.
struct EventLabel {
    bool is_nrc = false;
    std::optional<int> window; // present iff is_nrc

    friend bool operator==(const EventLabel&, const EventLabel&) = default;
};

/// 31 binary entries: 0-23 hour one-hot, 24-30 weekday one-hot.
using InputVector = std::array<std::uint8_t, kInputClasses>;

/// 9 binary entries: 0 = recurring congestion, 1-8 = event windows 0-7.
using OutputVector = std::array<std::uint8_t, kOutputClasses>;

/// How timestamps are assigned to event windows. Windows are half-open,
/// left-closed, anchored to the event START: [start - before*len,
/// start + after*len) tiled into (before + after) slots.
struct WindowScheme {
    std::int64_t window_len_s = 3600;
    int before = 4;
    int after = 4;
};

TimeFeatures time_features(UtcTime t, const Timezone& tz);
InputVector encode_features(const TimeFeatures& f);
InputVector encode_time(UtcTime t, const Timezone& tz);

/// Total over all timestamps. When several events' influence periods overlap
/// the nearest start wins; exact ties go to the lexicographically smaller
/// event_id. `events` must be sorted by start.
EventLabel label_for(UtcTime t, const std::vector<geo::Event>& events,
                     const WindowScheme& scheme = {});

OutputVector encode_label(const EventLabel& label);
/// Inverse of encode_label; throws unless the vector is one-hot.
EventLabel decode_label(const OutputVector& v);

/// Class index 0-8 used for balancing and argmax comparisons.
int class_index(const EventLabel& label);
EventLabel label_from_class(int cls);

/// One training/evaluation record.
struct LabeledSample {
    raster::Tci tci;
    TimeFeatures features;
    EventLabel label;
};

/// Dataset manifest row; CSV columns tci_path,hour,weekday,is_nrc,window.
struct ManifestRow {
    std::string tci_path;
    TimeFeatures features;
    EventLabel label;
};

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Loads every manifest row's TCI; relative tci_paths resolve against the
/// manifest's directory.
std::vector<LabeledSample> load_dataset(const std::filesystem::path& manifest_path);

} // namespace dxnat::encode
