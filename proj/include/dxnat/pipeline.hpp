#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dxnat/augment.hpp"
#include "dxnat/encode.hpp"
#include "dxnat/evaltune.hpp"
#include "dxnat/geodata.hpp"
#include "dxnat/neuralnet.hpp"
#include "dxnat/raster.hpp"
#include "dxnat/timeutil.hpp"

namespace dxnat::pipeline {

/// Shared configuration for every pipeline stage. One seed drives all
/// derived stage seeds, so a config file pins a whole experiment.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    std::filesystem::path segments_path;
    std::filesystem::path traffic_path;
    std::filesystem::path events_path;
    std::optional<geo::BBox> bbox; // default: bbox of the segment set
    int image_width = 32;
    double cell_size_m = raster::kDefaultCellSizeM;
    std::string timezone = "UTC";
    raster::MissingPolicy missing = raster::MissingPolicy::kFreeFlow;
    int stride_minutes = 10;
    std::optional<UtcTime> range_start;
    std::optional<UtcTime> range_end;
    augment::CrossoverConfig crossover; // seed field is overwritten per run
    int target_per_class = 150;
    nn::TrainConfig train;              // seed field is overwritten per run
    std::optional<std::vector<nn::LayerSpec>> arch; // default architecture when absent
    encode::WindowScheme window;

    void validate() const;

    /// Relative paths resolve against `base_dir`.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);
};

/// One machine-parsable JSON object per line on stdout.
void log_event(const std::string& stage, const std::string& event,
               const nlohmann::json& fields = nlohmann::json::object());

void run_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override = std::nullopt);

struct RasterizeResult {
    std::size_t tci_count = 0;
    std::size_t skipped = 0; // grid timestamps with no readings
    std::filesystem::path manifest;
};

RasterizeResult run_rasterize(const RunConfig& cfg, std::optional<UtcTime> start,
                              std::optional<UtcTime> end,
                              const std::string& manifest_name = "manifest.csv");

std::filesystem::path run_augment(const RunConfig& cfg,
                                  const std::string& manifest_in = "manifest.csv",
                                  const std::string& manifest_out = "balanced.csv");

std::filesystem::path run_train(const RunConfig& cfg,
                                const std::string& manifest_name = "balanced.csv",
                                const std::string& model_name = "model.bin");

eval::RocResult run_roc(const RunConfig& cfg, const std::string& model_name = "model.bin",
                        const std::string& manifest_name = "balanced.csv");

eval::Metrics run_eval(const RunConfig& cfg, const std::string& model_name = "model.bin",
                       const std::string& manifest_name = "eval.csv",
                       std::optional<double> threshold = std::nullopt,
                       const std::string& report_name = "metrics.json");

void run_diffmap(const RunConfig& cfg, const std::vector<LocalDate>& days_a,
                 const std::vector<LocalDate>& days_b, const eval::DayWindow& window,
                 eval::DiffField field, const std::string& csv_name = "diff.csv",
                 const std::string& image_name = "diff.pgm");

} // namespace dxnat::pipeline
