#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dxnat/augment.hpp"
#include "dxnat/encode.hpp"
#include "dxnat/evaltune.hpp"
#include "dxnat/raster.hpp"
#include "dxnat/timeutil.hpp"

namespace py = pybind11;

namespace {

dxnat::raster::Tci tci_from_pixels(const std::vector<int>& pixels, int width,
                                   const std::string& timestamp, const std::string& grid_id) {
    if (width < 1 || pixels.size() != static_cast<std::size_t>(width) * width) {
        throw std::invalid_argument("pixels must hold width*width values");
    }
    dxnat::raster::Tci tci;
    tci.width = width;
    tci.grid_id = grid_id;
    if (!timestamp.empty()) tci.timestamp = dxnat::parse_utc(timestamp);
    tci.pixels.reserve(pixels.size());
    for (int v : pixels) {
        if (v < 0 || v > 255) throw std::invalid_argument("pixel out of range");
        tci.pixels.push_back(static_cast<std::uint8_t>(v));
    }
    return tci;
}

std::vector<int> pixels_to_ints(const dxnat::raster::Tci& tci) {
    return {tci.pixels.begin(), tci.pixels.end()};
}

} // namespace

PYBIND11_MODULE(_dxnat, m) {
    m.doc() = "Core operations of the dxnat toolkit";

    m.def("pixel_from_speed", &dxnat::raster::pixel_from_speed, py::arg("mph"),
          "Speed (mph) to TCI pixel value");

    m.def(
        "time_features",
        [](const std::string& iso_utc, const std::string& tz_name) {
            const dxnat::Timezone tz = dxnat::Timezone::from_name(tz_name);
            const dxnat::encode::TimeFeatures f =
                dxnat::encode::time_features(dxnat::parse_utc(iso_utc), tz);
            return py::make_tuple(f.hour, f.weekday);
        },
        py::arg("iso_utc"), py::arg("timezone"),
        "Local (hour, weekday) for a UTC timestamp; weekday 0 is Sunday");

    m.def(
        "encode_time",
        [](const std::string& iso_utc, const std::string& tz_name) {
            const dxnat::Timezone tz = dxnat::Timezone::from_name(tz_name);
            const dxnat::encode::InputVector v =
                dxnat::encode::encode_time(dxnat::parse_utc(iso_utc), tz);
            return std::vector<int>(v.begin(), v.end());
        },
        py::arg("iso_utc"), py::arg("timezone"), "31-entry one-hot time feature vector");

    m.def(
        "crossover",
        [](const std::vector<std::vector<int>>& candidates, int width, std::size_t base_index,
           double p_m, std::uint64_t seed, std::uint64_t offspring_index) {
            std::vector<dxnat::raster::Tci> cands;
            cands.reserve(candidates.size());
            for (const std::vector<int>& c : candidates) {
                cands.push_back(tci_from_pixels(c, width, "", ""));
            }
            dxnat::augment::CrossoverConfig cfg;
            cfg.n = static_cast<int>(cands.size());
            cfg.p_m = p_m;
            cfg.seed = seed;
            return pixels_to_ints(
                dxnat::augment::crossover(cands, base_index, cfg, offspring_index));
        },
        py::arg("candidates"), py::arg("width"), py::arg("base_index"), py::arg("p_m"),
        py::arg("seed"), py::arg("offspring_index") = 0,
        "Row-level crossover over flat width*width pixel lists");

    m.def(
        "roc_sweep",
        [](const std::vector<double>& scores, const std::vector<bool>& truth_nrc) {
            if (scores.size() != truth_nrc.size()) {
                throw std::invalid_argument("scores and truth lists must match");
            }
            std::vector<dxnat::eval::ScoredSample> samples;
            samples.reserve(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i) {
                dxnat::eval::ScoredSample s;
                s.score_recurring = scores[i];
                s.truth.is_nrc = truth_nrc[i];
                if (truth_nrc[i]) s.truth.window = 0;
                samples.push_back(s);
            }
            const dxnat::eval::RocResult r = dxnat::eval::roc_sweep(samples);
            py::list points;
            for (const dxnat::eval::RocPoint& p : r.points) {
                points.append(py::make_tuple(p.threshold, p.fpr, p.tpr));
            }
            py::dict out;
            out["points"] = points;
            out["chosen"] = r.chosen;
            return out;
        },
        py::arg("scores"), py::arg("truth_nrc"),
        "Threshold sweep; scores are class-0 (recurring) probabilities");

    m.def(
        "write_tci",
        [](const std::string& path, const std::vector<int>& pixels, int width,
           const std::string& timestamp_iso, const std::string& grid_id) {
            dxnat::raster::write_tci(tci_from_pixels(pixels, width, timestamp_iso, grid_id),
                                     path);
        },
        py::arg("path"), py::arg("pixels"), py::arg("width"), py::arg("timestamp_iso") = "",
        py::arg("grid_id") = "", "Write a TCI as a binary PGM with provenance comment");

    m.def(
        "read_tci",
        [](const std::string& path) {
            const dxnat::raster::Tci tci = dxnat::raster::read_tci(path);
            py::dict out;
            out["width"] = tci.width;
            out["pixels"] = pixels_to_ints(tci);
            out["timestamp_iso"] = dxnat::format_utc(tci.timestamp);
            out["grid_id"] = tci.grid_id;
            return out;
        },
        py::arg("path"), "Read a TCI written by write_tci");
}
