#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "dxnat/geodata.hpp"
#include "dxnat/timeutil.hpp"

namespace dxnat::raster {

/// Meters per degree of latitude in the local equirectangular approximation.
inline constexpr double kMetersPerDegLat = 111320.0;

/// Default grid cell edge, in meters.
inline constexpr double kDefaultCellSizeM = 8.97;

/**
 * A gridded map over a bounding box. Each cell lists the keys of the road
 * segments whose resampled paths cross it.
 *
 * Row 0 is the top of the image (lat_max); column 0 is lon_min.
 */
struct GridMap {
    geo::BBox bbox;
    double cell_size_m = kDefaultCellSizeM;
    int rows = 0;
    int cols = 0;
    double deg_per_cell_lat = 0.0;
    double deg_per_cell_lon = 0.0;
    std::string id;
    std::vector<std::vector<geo::SegmentKey>> lookup; // rows * cols, row-major
    std::size_t skipped_vertices = 0;                 // vertices outside the bbox

    std::vector<geo::SegmentKey>& cell(int r, int c) { return lookup[r * cols + c]; }
    const std::vector<geo::SegmentKey>& cell(int r, int c) const { return lookup[r * cols + c]; }

    /// Cell indices covering a coordinate, or false when outside the bbox.
    bool cell_of(double lat, double lon, int& row, int& col) const;
};

/// Sizes the grid for a bbox: rows = ceil(height_m / cell), cols likewise,
/// using the equirectangular meter conversion at the bbox-center latitude.
/// The lookup starts empty.
GridMap init_grid(const geo::SegmentSet& segments, const geo::BBox& bbox,
                  double cell_size_m = kDefaultCellSizeM);

/// Rebuilds the lookup from scratch: every in-bbox polyline vertex lands in
/// its covering cell and consecutive vertices are joined by a discrete
/// (Bresenham) line so the path has no gaps. Keys are deduplicated per cell.
/// Vertices outside the bbox are skipped and counted.
GridMap resample(GridMap grid, const geo::SegmentSet& segments);

/// Traffic Condition Image: square 8-bit grayscale snapshot plus provenance.
struct Tci {
    int width = 0;
    std::vector<std::uint8_t> pixels; // width * width, row-major
    UtcTime timestamp = 0;
    std::string grid_id;

    std::uint8_t at(int r, int c) const { return pixels[r * width + c]; }

    friend bool operator==(const Tci&, const Tci&) = default;
};

/// What a cell renders as when it has no segments or no data.
enum class MissingPolicy {
    kFreeFlow, // pixel 0: absence must not masquerade as congestion
    kNeutral,  // pixel 128
};

/// Speed (mph) to pixel: round((80 - v) * 255 / 80) on [0, 80], else 0.
/// Rounding is half-up.
std::uint8_t pixel_from_speed(double mph);

/// Projects a speed snapshot onto the grid and resizes to width x width.
/// Each cell takes the mean of the pixel-mapped speeds of its keys present in
/// `speeds`; empty or data-less cells take the fallback value. Downsampling
/// is area-average, upsampling nearest-neighbor.
Tci project(const GridMap& grid, const std::unordered_map<geo::SegmentKey, double>& speeds,
            int width, MissingPolicy fallback = MissingPolicy::kFreeFlow, UtcTime timestamp = 0);

/// Difference heatmap: per cell, mean(a) - mean(b) over keys present in both
/// maps, mapped linearly to [0, 255] with zero difference at 128. Cells
/// lacking data render 128. The scale is symmetric (max |difference|).
Tci render_diff(const GridMap& grid, const std::unordered_map<geo::SegmentKey, double>& values_a,
                const std::unordered_map<geo::SegmentKey, double>& values_b, int width);

/// Binary PGM (P5, maxval 255) with one provenance comment line:
///   # dxnat t=<ISO8601> grid=<id>
void write_tci(const Tci& tci, const std::filesystem::path& path);
Tci read_tci(const std::filesystem::path& path);

} // namespace dxnat::raster
