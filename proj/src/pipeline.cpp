#include "dxnat/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "dxnat/rng.hpp"
#include "dxnat/synthgen.hpp"

namespace dxnat::pipeline {

namespace {

constexpr std::uint64_t kAugmentStage = 0x617567;
constexpr std::uint64_t kModelStage = 0x6d6f64;
constexpr std::uint64_t kTrainStage = 0x747261;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

geo::BBox effective_bbox(const RunConfig& cfg, const geo::SegmentSet& segments) {
    return cfg.bbox ? *cfg.bbox : segments.bbox();
}

raster::GridMap build_grid(const RunConfig& cfg, const geo::SegmentSet& segments) {
    return raster::resample(
        raster::init_grid(segments, effective_bbox(cfg, segments), cfg.cell_size_m), segments);
}

nn::Network build_network(const RunConfig& cfg) {
    const std::uint64_t seed = derive_seed(cfg.seed, kModelStage);
    if (cfg.arch) return nn::Network::build(*cfg.arch, cfg.image_width, seed);
    return nn::Network::build_default(cfg.image_width, seed);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

void RunConfig::validate() const {
    if (image_width < 8) throw std::runtime_error("image_width must be >= 8");
    if (cell_size_m <= 0.0) throw std::runtime_error("cell_size_m must be positive");
    if (stride_minutes < 1) throw std::runtime_error("stride_minutes must be >= 1");
    if (target_per_class < 1) throw std::runtime_error("target_per_class must be >= 1");
    crossover.validate();
    train.validate();
    if (bbox && bbox->degenerate()) throw std::runtime_error("degenerate bbox");
    if (range_start && range_end && *range_end < *range_start) {
        throw std::runtime_error("range end before range start");
    }
    Timezone::from_name(timezone); // throws on unknown zones
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out_dir = resolve(base_dir, j.value("out_dir", std::string("out")));
    cfg.segments_path = resolve(base_dir, j.at("segments").get<std::string>());
    cfg.traffic_path = resolve(base_dir, j.at("traffic").get<std::string>());
    cfg.events_path = resolve(base_dir, j.at("events").get<std::string>());
    if (j.contains("bbox")) {
        const nlohmann::json& bb = j.at("bbox");
        geo::BBox box;
        box.lat_min = bb.at("lat_min").get<double>();
        box.lat_max = bb.at("lat_max").get<double>();
        box.lon_min = bb.at("lon_min").get<double>();
        box.lon_max = bb.at("lon_max").get<double>();
        cfg.bbox = box;
    }
    cfg.image_width = j.value("image_width", cfg.image_width);
    cfg.cell_size_m = j.value("cell_size_m", cfg.cell_size_m);
    cfg.timezone = j.value("timezone", cfg.timezone);
    const std::string missing = j.value("missing", std::string("free_flow"));
    if (missing == "free_flow") {
        cfg.missing = raster::MissingPolicy::kFreeFlow;
    } else if (missing == "neutral") {
        cfg.missing = raster::MissingPolicy::kNeutral;
    } else {
        throw std::runtime_error("missing policy must be free_flow or neutral");
    }
    cfg.stride_minutes = j.value("stride_minutes", cfg.stride_minutes);
    if (j.contains("range")) {
        const nlohmann::json& r = j.at("range");
        if (r.contains("start_utc")) cfg.range_start = parse_utc(r.at("start_utc"));
        if (r.contains("end_utc")) cfg.range_end = parse_utc(r.at("end_utc"));
    }
    if (j.contains("crossover")) {
        const nlohmann::json& c = j.at("crossover");
        cfg.crossover.n = c.value("n", cfg.crossover.n);
        cfg.crossover.t_seconds = c.value("t_seconds", cfg.crossover.t_seconds);
        cfg.crossover.p_m = c.value("p_m", cfg.crossover.p_m);
    }
    cfg.target_per_class = j.value("target_per_class", cfg.target_per_class);
    if (j.contains("train")) {
        const nlohmann::json& t = j.at("train");
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.validation_split = t.value("validation_split", cfg.train.validation_split);
    }
    if (j.contains("arch")) cfg.arch = nn::parse_architecture(j.at("arch"));
    if (j.contains("window")) {
        const nlohmann::json& w = j.at("window");
        cfg.window.window_len_s = w.value("window_len_s", cfg.window.window_len_s);
        cfg.window.before = w.value("before", cfg.window.before);
        cfg.window.after = w.value("after", cfg.window.after);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

void log_event(const std::string& stage, const std::string& event,
               const nlohmann::json& fields) {
    nlohmann::ordered_json line;
    line["stage"] = stage;
    line["event"] = event;
    for (const auto& [key, value] : fields.items()) line[key] = value;
    std::cout << line.dump() << "\n";
}

void run_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override) {
    synth::ScenarioSpec spec = synth::load_scenario(spec_path);
    if (seed_override) spec.seed = *seed_override;
    std::filesystem::create_directories(out_dir);
    const synth::Scenario scenario = synth::generate(spec);
    geo::write_segments(scenario.segments, out_dir / "segments.jsonl");
    geo::write_traffic(scenario.traffic, out_dir / "traffic.csv");
    geo::write_events(scenario.events, out_dir / "events.jsonl");
    log_event("synth", "done",
              {{"segments", scenario.segments.size()},
               {"readings", scenario.traffic.size()},
               {"events", scenario.events.size()},
               {"out_dir", out_dir.string()}});
}

RasterizeResult run_rasterize(const RunConfig& cfg, std::optional<UtcTime> start,
                              std::optional<UtcTime> end, const std::string& manifest_name) {
    const geo::SegmentSet segments = geo::load_segments(cfg.segments_path);
    const geo::TrafficStore store = geo::load_traffic(cfg.traffic_path);
    const std::vector<geo::Event> events = geo::load_events(cfg.events_path);
    if (store.empty()) throw std::runtime_error("traffic store is empty");
    const Timezone tz = Timezone::from_name(cfg.timezone);
    const raster::GridMap grid = build_grid(cfg, segments);
    log_event("rasterize", "grid",
              {{"rows", grid.rows}, {"cols", grid.cols}, {"id", grid.id}});

    const UtcTime t_begin = start ? *start : (cfg.range_start ? *cfg.range_start : store.first_time());
    const UtcTime t_end = end ? *end : (cfg.range_end ? *cfg.range_end : store.last_time());
    if (t_end < t_begin) throw std::runtime_error("time range end before start");

    std::filesystem::create_directories(cfg.out_dir / "tci");
    std::vector<encode::ManifestRow> rows;
    RasterizeResult result;
    for (UtcTime t = t_begin; t <= t_end; t += static_cast<UtcTime>(cfg.stride_minutes) * 60) {
        const std::unordered_map<geo::SegmentKey, double> speeds =
            geo::speeds_at(store, t, segments);
        if (speeds.empty()) {
            ++result.skipped;
            continue;
        }
        const raster::Tci tci = raster::project(grid, speeds, cfg.image_width, cfg.missing, t);
        const std::string file = "tci/" + format_utc_compact(t) + ".pgm";
        raster::write_tci(tci, cfg.out_dir / file);
        encode::ManifestRow row;
        row.tci_path = file;
        row.features = encode::time_features(t, tz);
        row.label = encode::label_for(t, events, cfg.window);
        rows.push_back(std::move(row));
        ++result.tci_count;
    }
    if (rows.empty()) throw std::runtime_error("no TCIs produced; empty time range?");
    result.manifest = cfg.out_dir / manifest_name;
    encode::write_manifest(rows, result.manifest);
    log_event("rasterize", "done",
              {{"tcis", result.tci_count},
               {"skipped", result.skipped},
               {"manifest", result.manifest.string()}});
    return result;
}

std::filesystem::path run_augment(const RunConfig& cfg, const std::string& manifest_in,
                                  const std::string& manifest_out) {
    const std::vector<encode::LabeledSample> dataset =
        encode::load_dataset(cfg.out_dir / manifest_in);
    augment::CrossoverConfig cross = cfg.crossover;
    cross.seed = derive_seed(cfg.seed, kAugmentStage);
    const std::vector<encode::LabeledSample> balanced =
        augment::balance(dataset, cfg.target_per_class, cross);
    std::filesystem::create_directories(cfg.out_dir / "tci_balanced");
    std::vector<encode::ManifestRow> rows;
    rows.reserve(balanced.size());
    for (std::size_t i = 0; i < balanced.size(); ++i) {
        char name[48];
        std::snprintf(name, sizeof name, "tci_balanced/b%05zu.pgm", i);
        raster::write_tci(balanced[i].tci, cfg.out_dir / name);
        encode::ManifestRow row;
        row.tci_path = name;
        row.features = balanced[i].features;
        row.label = balanced[i].label;
        rows.push_back(std::move(row));
    }
    const std::filesystem::path manifest = cfg.out_dir / manifest_out;
    encode::write_manifest(rows, manifest);
    log_event("augment", "done",
              {{"input", dataset.size()},
               {"balanced", balanced.size()},
               {"target_per_class", cfg.target_per_class},
               {"manifest", manifest.string()}});
    return manifest;
}

std::filesystem::path run_train(const RunConfig& cfg, const std::string& manifest_name,
                                const std::string& model_name) {
    const std::vector<encode::LabeledSample> dataset =
        encode::load_dataset(cfg.out_dir / manifest_name);
    nn::Network net = build_network(cfg);
    nn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, kTrainStage);
    const std::vector<nn::EpochStats> log = net.train(dataset, tc);
    for (const nn::EpochStats& e : log) {
        log_event("train", "epoch",
                  {{"epoch", e.epoch},
                   {"mean_loss", e.mean_loss},
                   {"val_accuracy", e.val_accuracy}});
    }
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream tlog(cfg.out_dir / "train_log.csv", std::ios::trunc);
    if (!tlog) throw std::runtime_error("cannot write training log");
    tlog << "epoch,mean_loss,val_accuracy\n";
    for (const nn::EpochStats& e : log) {
        tlog << e.epoch << "," << fmt(e.mean_loss) << "," << fmt(e.val_accuracy) << "\n";
    }
    const std::filesystem::path model = cfg.out_dir / model_name;
    net.save(model.string());
    log_event("train", "done", {{"model", model.string()}, {"samples", dataset.size()}});
    return model;
}

eval::RocResult run_roc(const RunConfig& cfg, const std::string& model_name,
                        const std::string& manifest_name) {
    const nn::Network net = nn::Network::load((cfg.out_dir / model_name).string());
    const std::vector<encode::LabeledSample> dataset =
        encode::load_dataset(cfg.out_dir / manifest_name);
    const eval::RocResult roc = eval::roc_sweep(eval::score_dataset(net, dataset));
    std::ofstream csv(cfg.out_dir / "roc.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write roc.csv");
    csv << "threshold,fpr,tpr\n";
    for (const eval::RocPoint& p : roc.points) {
        char th[16];
        std::snprintf(th, sizeof th, "%.2f", p.threshold);
        csv << th << "," << fmt(p.fpr) << "," << fmt(p.tpr) << "\n";
    }
    nlohmann::ordered_json tj;
    tj["chosen_threshold"] = roc.chosen;
    std::ofstream tf(cfg.out_dir / "threshold.json", std::ios::trunc);
    if (!tf) throw std::runtime_error("cannot write threshold.json");
    tf << tj.dump(2) << "\n";
    log_event("roc", "done", {{"chosen_threshold", roc.chosen}});
    return roc;
}

eval::Metrics run_eval(const RunConfig& cfg, const std::string& model_name,
                       const std::string& manifest_name, std::optional<double> threshold,
                       const std::string& report_name) {
    const nn::Network net = nn::Network::load((cfg.out_dir / model_name).string());
    const std::vector<encode::LabeledSample> dataset =
        encode::load_dataset(cfg.out_dir / manifest_name);
    double th = 0.0;
    if (threshold) {
        th = *threshold;
    } else {
        const std::filesystem::path tpath = cfg.out_dir / "threshold.json";
        std::ifstream tf(tpath);
        if (!tf) {
            throw std::runtime_error("threshold file not found: " + tpath.string() +
                                     " (run roc first or pass a threshold)");
        }
        nlohmann::json tj;
        tf >> tj;
        th = tj.at("chosen_threshold").get<double>();
    }
    const eval::Metrics m = eval::evaluate(net, dataset, th);
    bool any_nrc = false;
    for (const encode::LabeledSample& s : dataset) any_nrc = any_nrc || s.label.is_nrc;
    std::optional<double> window_rate;
    if (any_nrc) window_rate = eval::window_hit_rate(net, dataset, 1);

    nlohmann::ordered_json report;
    report["samples"] = dataset.size();
    report["threshold"] = th;
    report["tp"] = m.tp;
    report["fp"] = m.fp;
    report["tn"] = m.tn;
    report["fn"] = m.fn;
    report["accuracy"] = m.accuracy;
    report["fpr"] = m.fpr ? nlohmann::json(*m.fpr) : nlohmann::json(nullptr);
    report["fnr"] = m.fnr ? nlohmann::json(*m.fnr) : nlohmann::json(nullptr);
    report["window_hit_rate"] =
        window_rate ? nlohmann::json(*window_rate) : nlohmann::json(nullptr);
    report["window_tolerance"] = 1;
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream rf(cfg.out_dir / report_name, std::ios::trunc);
    if (!rf) throw std::runtime_error("cannot write metrics report");
    rf << report.dump(2) << "\n";
    log_event("eval", "done",
              {{"accuracy", m.accuracy},
               {"threshold", th},
               {"report", (cfg.out_dir / report_name).string()}});
    return m;
}

void run_diffmap(const RunConfig& cfg, const std::vector<LocalDate>& days_a,
                 const std::vector<LocalDate>& days_b, const eval::DayWindow& window,
                 eval::DiffField field, const std::string& csv_name,
                 const std::string& image_name) {
    const geo::SegmentSet segments = geo::load_segments(cfg.segments_path);
    const geo::TrafficStore store = geo::load_traffic(cfg.traffic_path);
    const Timezone tz = Timezone::from_name(cfg.timezone);
    std::vector<geo::SegmentKey> keys;
    keys.reserve(segments.size());
    for (const geo::RoadSegment& s : segments.segments()) keys.push_back(s.key);

    const std::map<geo::SegmentKey, double> diff =
        eval::segment_diff(store, keys, days_a, days_b, window, tz, field);
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream csv(cfg.out_dir / csv_name, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write diff csv");
    csv << "tmc_key,diff\n";
    for (const auto& [key, value] : diff) csv << key << "," << fmt(value) << "\n";

    const std::map<geo::SegmentKey, double> mean_a =
        eval::window_mean(store, keys, days_a, window, tz, field);
    const std::map<geo::SegmentKey, double> mean_b =
        eval::window_mean(store, keys, days_b, window, tz, field);
    const raster::GridMap grid = build_grid(cfg, segments);
    const raster::Tci img = raster::render_diff(
        grid, {mean_a.begin(), mean_a.end()}, {mean_b.begin(), mean_b.end()}, cfg.image_width);
    raster::write_tci(img, cfg.out_dir / image_name);
    log_event("diffmap", "done",
              {{"segments", diff.size()},
               {"csv", (cfg.out_dir / csv_name).string()},
               {"image", (cfg.out_dir / image_name).string()}});
}

} // namespace dxnat::pipeline
