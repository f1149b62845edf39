#include "dxnat/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dxnat::raster {

namespace {

constexpr double kPi = 3.14159265358979323846;

double meters_per_deg_lon(const geo::BBox& bbox) {
    const double center_lat = 0.5 * (bbox.lat_min + bbox.lat_max);
    return kMetersPerDegLat * std::cos(center_lat * kPi / 180.0);
}

std::uint8_t quantize(double v) {
    const double r = std::floor(v + 0.5); // half-up
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

} // namespace

bool GridMap::cell_of(double lat, double lon, int& row, int& col) const {
    if (!bbox.contains(lat, lon)) return false;
    row = static_cast<int>(std::floor((bbox.lat_max - lat) / deg_per_cell_lat));
    col = static_cast<int>(std::floor((lon - bbox.lon_min) / deg_per_cell_lon));
    row = std::clamp(row, 0, rows - 1);
    col = std::clamp(col, 0, cols - 1);
    return true;
}

GridMap init_grid(const geo::SegmentSet& segments, const geo::BBox& bbox, double cell_size_m) {
    (void)segments;
    if (bbox.degenerate()) throw std::runtime_error("degenerate bounding box");
    if (cell_size_m <= 0.0) throw std::runtime_error("cell size must be positive");
    GridMap g;
    g.bbox = bbox;
    g.cell_size_m = cell_size_m;
    const double height_m = (bbox.lat_max - bbox.lat_min) * kMetersPerDegLat;
    const double width_m = (bbox.lon_max - bbox.lon_min) * meters_per_deg_lon(bbox);
    g.rows = static_cast<int>(std::ceil(height_m / cell_size_m));
    g.cols = static_cast<int>(std::ceil(width_m / cell_size_m));
    g.deg_per_cell_lat = cell_size_m / kMetersPerDegLat;
    g.deg_per_cell_lon = cell_size_m / meters_per_deg_lon(bbox);
    g.lookup.assign(static_cast<std::size_t>(g.rows) * g.cols, {});
    char buf[96];
    std::snprintf(buf, sizeof(buf), "g%dx%d@%.4gm[%.6f,%.6f,%.6f,%.6f]", g.rows, g.cols,
                  cell_size_m, bbox.lat_min, bbox.lat_max, bbox.lon_min, bbox.lon_max);
    g.id = buf;
    return g;
}

namespace {

// 8-connected Bresenham walk from (r0,c0) to (r1,c1), inclusive.
template <typename Visit>
void trace_line(int r0, int c0, int r1, int c1, Visit&& visit) {
    const int dc = std::abs(c1 - c0);
    const int dr = -std::abs(r1 - r0);
    const int sc = c0 < c1 ? 1 : -1;
    const int sr = r0 < r1 ? 1 : -1;
    int err = dc + dr;
    for (;;) {
        visit(r0, c0);
        if (r0 == r1 && c0 == c1) break;
        const int e2 = 2 * err;
        if (e2 >= dr) {
            err += dr;
            c0 += sc;
        }
        if (e2 <= dc) {
            err += dc;
            r0 += sr;
        }
    }
}

} // namespace

GridMap resample(GridMap grid, const geo::SegmentSet& segments) {
    for (auto& cell : grid.lookup) cell.clear();
    grid.skipped_vertices = 0;
    for (const geo::RoadSegment& seg : segments.segments()) {
        std::vector<std::pair<int, int>> vertex_cells;
        for (const geo::LatLon& p : seg.points) {
            int r = 0, c = 0;
            if (grid.cell_of(p.lat, p.lon, r, c)) {
                vertex_cells.emplace_back(r, c);
            } else {
                ++grid.skipped_vertices;
            }
        }
        auto add = [&](int r, int c) {
            auto& keys = grid.cell(r, c);
            if (std::find(keys.begin(), keys.end(), seg.key) == keys.end()) {
                keys.push_back(seg.key);
            }
        };
        if (vertex_cells.size() == 1) {
            add(vertex_cells[0].first, vertex_cells[0].second);
        }
        for (std::size_t i = 0; i + 1 < vertex_cells.size(); ++i) {
            trace_line(vertex_cells[i].first, vertex_cells[i].second, vertex_cells[i + 1].first,
                       vertex_cells[i + 1].second, add);
        }
    }
    return grid;
}

std::uint8_t pixel_from_speed(double mph) {
    if (mph < 0.0 || mph > 80.0) return 0;
    return quantize((80.0 - mph) * 255.0 / 80.0);
}

namespace {

// Per-axis resize of a row-major double image: area-average when shrinking,
// nearest-neighbor when growing.
std::vector<double> resize_axis_rows(const std::vector<double>& src, int src_rows, int cols,
                                     int dst_rows) {
    if (src_rows == dst_rows) return src;
    std::vector<double> dst(static_cast<std::size_t>(dst_rows) * cols, 0.0);
    if (src_rows > dst_rows) {
        const double scale = static_cast<double>(src_rows) / dst_rows;
        for (int j = 0; j < dst_rows; ++j) {
            const double lo = j * scale;
            const double hi = (j + 1) * scale;
            const int first = static_cast<int>(std::floor(lo));
            const int last = std::min(src_rows - 1, static_cast<int>(std::ceil(hi)) - 1);
            for (int c = 0; c < cols; ++c) {
                double acc = 0.0;
                for (int i = first; i <= last; ++i) {
                    const double overlap =
                        std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
                    if (overlap > 0.0) acc += overlap * src[i * cols + c];
                }
                dst[j * cols + c] = acc / scale;
            }
        }
    } else {
        for (int j = 0; j < dst_rows; ++j) {
            const int i = std::min(src_rows - 1,
                                   static_cast<int>((j + 0.5) * src_rows / dst_rows));
            for (int c = 0; c < cols; ++c) dst[j * cols + c] = src[i * cols + c];
        }
    }
    return dst;
}

std::vector<double> transpose(const std::vector<double>& src, int rows, int cols) {
    std::vector<double> dst(src.size());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
    }
    return dst;
}

std::vector<double> resize_image(std::vector<double> img, int rows, int cols, int out_rows,
                                 int out_cols) {
    img = resize_axis_rows(img, rows, cols, out_rows);
    img = transpose(img, out_rows, cols);
    img = resize_axis_rows(img, cols, out_rows, out_cols);
    return transpose(img, out_cols, out_rows);
}

Tci finalize(std::vector<double> raw, const GridMap& grid, int width, UtcTime timestamp) {
    raw = resize_image(std::move(raw), grid.rows, grid.cols, width, width);
    Tci tci;
    tci.width = width;
    tci.timestamp = timestamp;
    tci.grid_id = grid.id;
    tci.pixels.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) tci.pixels[i] = quantize(raw[i]);
    return tci;
}

} // namespace

Tci project(const GridMap& grid, const std::unordered_map<geo::SegmentKey, double>& speeds,
            int width, MissingPolicy fallback, UtcTime timestamp) {
    if (width <= 0) throw std::runtime_error("image width must be positive");
    const double fallback_value = fallback == MissingPolicy::kFreeFlow ? 0.0 : 128.0;
    std::vector<double> raw(grid.lookup.size(), fallback_value);
    for (std::size_t i = 0; i < grid.lookup.size(); ++i) {
        const auto& keys = grid.lookup[i];
        double sum = 0.0;
        int count = 0;
        for (const auto& key : keys) {
            auto it = speeds.find(key);
            if (it != speeds.end()) {
                sum += pixel_from_speed(it->second);
                ++count;
            }
        }
        if (count > 0) raw[i] = sum / count;
    }
    return finalize(std::move(raw), grid, width, timestamp);
}

Tci render_diff(const GridMap& grid, const std::unordered_map<geo::SegmentKey, double>& values_a,
                const std::unordered_map<geo::SegmentKey, double>& values_b, int width) {
    if (width <= 0) throw std::runtime_error("image width must be positive");
    std::vector<double> diff(grid.lookup.size(), 0.0);
    std::vector<bool> has_data(grid.lookup.size(), false);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < grid.lookup.size(); ++i) {
        double sum = 0.0;
        int count = 0;
        for (const auto& key : grid.lookup[i]) {
            auto a = values_a.find(key);
            auto b = values_b.find(key);
            if (a != values_a.end() && b != values_b.end()) {
                sum += a->second - b->second;
                ++count;
            }
        }
        if (count > 0) {
            diff[i] = sum / count;
            has_data[i] = true;
            max_abs = std::max(max_abs, std::abs(diff[i]));
        }
    }
    std::vector<double> raw(grid.lookup.size(), 128.0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (has_data[i] && max_abs > 0.0) {
            // Half-away-from-zero keeps the map antisymmetric around 128.
            raw[i] = 128.0 + std::round(127.0 * diff[i] / max_abs);
        }
    }
    return finalize(std::move(raw), grid, width, 0);
}

void write_tci(const Tci& tci, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n"
        << "# dxnat t=" << format_utc(tci.timestamp) << " grid=" << tci.grid_id << "\n"
        << tci.width << " " << tci.width << "\n255\n";
    out.write(reinterpret_cast<const char*>(tci.pixels.data()),
              static_cast<std::streamsize>(tci.pixels.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

namespace {

// Next PNM token, skipping whitespace and '#' comments. Comment lines are
// collected so the provenance line can be recovered.
std::string next_token(std::istream& in, std::vector<std::string>& comments) {
    std::string tok;
    int ch = 0;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            std::string comment;
            std::getline(in, comment);
            comments.push_back(comment);
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok += static_cast<char>(ch);
    }
    return tok;
}

} // namespace

Tci read_tci(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> comments;
    if (next_token(in, comments) != "P5") {
        throw std::runtime_error(path.string() + ": not a binary PGM (P5) file");
    }
    const std::string ws = next_token(in, comments);
    const std::string hs = next_token(in, comments);
    const std::string maxval = next_token(in, comments);
    int w = 0, h = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
    } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ": malformed PGM header");
    }
    if (maxval != "255") {
        throw std::runtime_error(path.string() + ": unsupported maxval '" + maxval +
                                 "' (expected 255)");
    }
    if (w <= 0 || h <= 0 || w != h) {
        throw std::runtime_error(path.string() + ": TCI must be square and non-empty");
    }
    Tci tci;
    tci.width = w;
    tci.pixels.resize(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(tci.pixels.data()),
            static_cast<std::streamsize>(tci.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(tci.pixels.size())) {
        throw std::runtime_error(path.string() + ": truncated pixel data");
    }
    for (const std::string& c : comments) {
        const auto t_pos = c.find("t=");
        const auto g_pos = c.find(" grid=");
        if (c.find("dxnat") != std::string::npos && t_pos != std::string::npos &&
            g_pos != std::string::npos) {
            tci.timestamp = parse_utc(c.substr(t_pos + 2, g_pos - t_pos - 2));
            tci.grid_id = c.substr(g_pos + 6);
        }
    }
    return tci;
}

} // namespace dxnat::raster
