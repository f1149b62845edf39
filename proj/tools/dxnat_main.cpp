#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dxnat/pipeline.hpp"

namespace {

using dxnat::pipeline::RunConfig;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
    CLI::Option* opt = cmd->add_option("--config", c.config, "Run configuration file (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", [&c](const std::vector<std::string>& v) {
        c.seed = std::stoull(v.at(0));
        return true;
    }, "Override the config seed");
    cmd->add_option("--out", [&c](const std::vector<std::string>& v) {
        c.out = v.at(0);
        return true;
    }, "Override the output directory");
}

RunConfig load_config(const Common& c) {
    RunConfig cfg = RunConfig::load(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.out_dir = *c.out;
    return cfg;
}

std::vector<dxnat::LocalDate> parse_day_list(const std::string& csv) {
    std::vector<dxnat::LocalDate> days;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string token =
            csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!token.empty()) days.push_back(dxnat::parse_date(token));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (days.empty()) throw std::runtime_error("empty day list");
    return days;
}

int parse_minute(const std::string& hhmm) {
    if (hhmm.size() != 5 || hhmm[2] != ':') {
        throw std::runtime_error("bad time '" + hhmm + "' (expected HH:MM)");
    }
    const int h = std::stoi(hhmm.substr(0, 2));
    const int m = std::stoi(hhmm.substr(3, 2));
    if (h < 0 || h > 24 || m < 0 || m > 59) throw std::runtime_error("bad time '" + hhmm + "'");
    return h * 60 + m;
}

dxnat::eval::DayWindow parse_window(const std::string& spec) {
    const std::size_t dash = spec.find('-');
    if (dash == std::string::npos) {
        throw std::runtime_error("bad window '" + spec + "' (expected HH:MM-HH:MM)");
    }
    dxnat::eval::DayWindow w;
    w.start_minute = parse_minute(spec.substr(0, dash));
    w.end_minute = parse_minute(spec.substr(dash + 1));
    return w;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Traffic condition imaging, augmentation, and NRC classification toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scenario");
    std::string spec_path;
    Common synth_common;
    synth->add_option("--spec", spec_path, "Scenario spec file (JSON)")->required();
    add_common(synth, synth_common, /*config_required=*/false);
    std::string synth_out = "out";
    synth->add_option("--out-dir", synth_out, "Output directory (default: out)");

    // rasterize
    auto* rasterize = app.add_subcommand("rasterize", "Project traffic snapshots into TCIs");
    Common ras_common;
    add_common(rasterize, ras_common);
    std::string ras_start, ras_end, ras_manifest = "manifest.csv";
    rasterize->add_option("--start", ras_start, "Range start (ISO-8601 UTC)");
    rasterize->add_option("--end", ras_end, "Range end (ISO-8601 UTC)");
    rasterize->add_option("--manifest", ras_manifest, "Manifest file name");

    // augment
    auto* augment = app.add_subcommand("augment", "Balance a labeled dataset via crossover");
    Common aug_common;
    add_common(augment, aug_common);
    int aug_target = 0;
    std::string aug_in = "manifest.csv", aug_out = "balanced.csv";
    augment->add_option("--target", aug_target, "Samples per class after balancing");
    augment->add_option("--manifest-in", aug_in, "Input manifest name");
    augment->add_option("--manifest-out", aug_out, "Output manifest name");

    // train
    auto* train = app.add_subcommand("train", "Train the classifier");
    Common train_common;
    add_common(train, train_common);
    int train_epochs = -1;
    std::string train_manifest = "balanced.csv", train_model = "model.bin";
    train->add_option("--epochs", train_epochs, "Override epoch count");
    train->add_option("--manifest", train_manifest, "Training manifest name");
    train->add_option("--model", train_model, "Model file name");

    // roc
    auto* roc = app.add_subcommand("roc", "Sweep thresholds and pick the operating point");
    Common roc_common;
    add_common(roc, roc_common);
    std::string roc_model = "model.bin", roc_manifest = "balanced.csv";
    roc->add_option("--model", roc_model, "Model file name");
    roc->add_option("--manifest", roc_manifest, "Manifest to sweep over");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate at a threshold and write metrics");
    Common eval_common;
    add_common(eval_cmd, eval_common);
    std::string eval_model = "model.bin", eval_manifest = "eval.csv";
    std::string eval_report = "metrics.json";
    double eval_th = -1.0;
    eval_cmd->add_option("--model", eval_model, "Model file name");
    eval_cmd->add_option("--manifest", eval_manifest, "Evaluation manifest name");
    eval_cmd->add_option("--th", eval_th, "Decision threshold (default: from threshold.json)");
    eval_cmd->add_option("--report", eval_report, "Metrics report file name");

    // diffmap
    auto* diffmap = app.add_subcommand("diffmap", "Per-segment mean difference heatmap");
    Common diff_common;
    add_common(diffmap, diff_common);
    std::string diff_days_a, diff_days_b, diff_window = "00:00-24:00", diff_field = "speed";
    std::string diff_csv = "diff.csv", diff_image = "diff.pgm";
    diffmap->add_option("--days-a", diff_days_a, "Comma-separated local dates")->required();
    diffmap->add_option("--days-b", diff_days_b, "Comma-separated local dates")->required();
    diffmap->add_option("--window", diff_window, "Local day window HH:MM-HH:MM");
    diffmap->add_option("--field", diff_field, "speed or jam_factor");
    diffmap->add_option("--csv", diff_csv, "Diff table file name");
    diffmap->add_option("--image", diff_image, "Heatmap file name");

    CLI11_PARSE(app, argc, argv);

    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        if (synth->parsed()) {
            dxnat::pipeline::run_synth(spec_path, synth_common.out.value_or(synth_out),
                                       synth_common.seed);
        } else if (rasterize->parsed()) {
            RunConfig cfg = load_config(ras_common);
            std::optional<dxnat::UtcTime> start, end;
            if (!ras_start.empty()) start = dxnat::parse_utc(ras_start);
            if (!ras_end.empty()) end = dxnat::parse_utc(ras_end);
            dxnat::pipeline::run_rasterize(cfg, start, end, ras_manifest);
        } else if (augment->parsed()) {
            RunConfig cfg = load_config(aug_common);
            if (aug_target > 0) cfg.target_per_class = aug_target;
            dxnat::pipeline::run_augment(cfg, aug_in, aug_out);
        } else if (train->parsed()) {
            RunConfig cfg = load_config(train_common);
            if (train_epochs >= 0) cfg.train.epochs = train_epochs;
            dxnat::pipeline::run_train(cfg, train_manifest, train_model);
        } else if (roc->parsed()) {
            RunConfig cfg = load_config(roc_common);
            dxnat::pipeline::run_roc(cfg, roc_model, roc_manifest);
        } else if (eval_cmd->parsed()) {
            RunConfig cfg = load_config(eval_common);
            std::optional<double> th;
            if (eval_th >= 0.0) th = eval_th;
            dxnat::pipeline::run_eval(cfg, eval_model, eval_manifest, th, eval_report);
        } else if (diffmap->parsed()) {
            RunConfig cfg = load_config(diff_common);
            dxnat::pipeline::run_diffmap(cfg, parse_day_list(diff_days_a),
                                         parse_day_list(diff_days_b), parse_window(diff_window),
                                         dxnat::eval::diff_field_from_string(diff_field),
                                         diff_csv, diff_image);
        }
    } catch (const std::exception& e) {
        std::cerr << "dxnat " << stage << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
