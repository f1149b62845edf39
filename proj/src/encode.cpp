#include "dxnat/encode.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace dxnat::encode {

TimeFeatures time_features(UtcTime t, const Timezone& tz) {
    const LocalTime lt = tz.to_local(t);
    return {lt.civil.hour, lt.weekday};
}

InputVector encode_features(const TimeFeatures& f) {
    if (f.hour < 0 || f.hour > 23) throw std::runtime_error("hour out of range");
    if (f.weekday < 0 || f.weekday > 6) throw std::runtime_error("weekday out of range");
    InputVector v{};
    v[f.hour] = 1;
    v[24 + f.weekday] = 1;
    return v;
}

InputVector encode_time(UtcTime t, const Timezone& tz) {
    return encode_features(time_features(t, tz));
}

EventLabel label_for(UtcTime t, const std::vector<geo::Event>& events,
                     const WindowScheme& scheme) {
    const geo::Event* best = nullptr;
    for (const geo::Event& ev : events) {
        const UtcTime lo = ev.start - scheme.before * scheme.window_len_s;
        const UtcTime hi = ev.start + scheme.after * scheme.window_len_s;
        if (t < lo || t >= hi) continue;
        if (best == nullptr) {
            best = &ev;
            continue;
        }
        const std::int64_t d_new = std::llabs(t - ev.start);
        const std::int64_t d_best = std::llabs(t - best->start);
        if (d_new < d_best || (d_new == d_best && ev.event_id < best->event_id)) {
            best = &ev;
        }
    }
    if (best == nullptr) return {};
    const UtcTime lo = best->start - scheme.before * scheme.window_len_s;
    EventLabel label;
    label.is_nrc = true;
    label.window = static_cast<int>((t - lo) / scheme.window_len_s);
    return label;
}

OutputVector encode_label(const EventLabel& label) {
    OutputVector v{};
    if (!label.is_nrc) {
        v[0] = 1;
        return v;
    }
    if (!label.window || *label.window < 0 || *label.window >= kEventWindows) {
        throw std::runtime_error("NRC label needs a window in [0, 8)");
    }
    v[*label.window + 1] = 1;
    return v;
}

EventLabel decode_label(const OutputVector& v) {
    int ones = 0;
    int index = -1;
    for (int i = 0; i < kOutputClasses; ++i) {
        if (v[i] == 1) {
            ++ones;
            index = i;
        } else if (v[i] != 0) {
            throw std::runtime_error("label vector entries must be 0 or 1");
        }
    }
    if (ones != 1) throw std::runtime_error("label vector must be one-hot");
    return label_from_class(index);
}

int class_index(const EventLabel& label) {
    if (!label.is_nrc) return 0;
    if (!label.window || *label.window < 0 || *label.window >= kEventWindows) {
        throw std::runtime_error("NRC label needs a window in [0, 8)");
    }
    return *label.window + 1;
}

EventLabel label_from_class(int cls) {
    if (cls < 0 || cls >= kOutputClasses) throw std::runtime_error("class index out of range");
    if (cls == 0) return {};
    return {true, cls - 1};
}

namespace {
constexpr const char* kManifestHeader = "tci_path,hour,weekday,is_nrc,window";
}

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << kManifestHeader << '\n';
    for (const ManifestRow& row : rows) {
        out << row.tci_path << ',' << row.features.hour << ',' << row.features.weekday << ','
            << (row.label.is_nrc ? 1 : 0) << ',';
        if (row.label.window) out << *row.label.window;
        out << '\n';
    }
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty manifest");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        throw std::runtime_error(path.string() + ": expected header '" +
                                 std::string(kManifestHeader) + "'");
    }
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 5> f;
        std::size_t field = 0;
        for (char c : line) {
            if (c == ',' && field < 4) {
                ++field;
            } else {
                f[field] += c;
            }
        }
        if (field != 4) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 5 fields");
        }
        ManifestRow row;
        row.tci_path = f[0];
        try {
            row.features.hour = std::stoi(f[1]);
            row.features.weekday = std::stoi(f[2]);
            row.label.is_nrc = std::stoi(f[3]) != 0;
            if (!f[4].empty()) row.label.window = std::stoi(f[4]);
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": malformed row");
        }
        if (row.label.is_nrc && !row.label.window) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": NRC row lacks a window");
        }
        if (!row.label.is_nrc) row.label.window.reset();
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<LabeledSample> load_dataset(const std::filesystem::path& manifest_path) {
    const std::vector<ManifestRow> rows = read_manifest(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    std::vector<LabeledSample> samples;
    samples.reserve(rows.size());
    for (const ManifestRow& row : rows) {
        std::filesystem::path p(row.tci_path);
        if (p.is_relative()) p = base / p;
        samples.push_back({raster::read_tci(p), row.features, row.label});
    }
    return samples;
}

} // namespace dxnat::encode
