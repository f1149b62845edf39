#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "dxnat/encode.hpp"
#include "dxnat/geodata.hpp"
#include "dxnat/neuralnet.hpp"
#include "dxnat/timeutil.hpp"

namespace dxnat::eval {

/// One classified sample: the softmax entry for the recurring class plus the
/// ground-truth label.
struct ScoredSample {
    double score_recurring = 0.0;
    encode::EventLabel truth;
};

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points; // thresholds 0.01 .. 1.00
    double chosen = 0.0;
};

struct Metrics {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;
    double accuracy = 0.0;
    std::optional<double> fpr; // absent when the set has no negatives
    std::optional<double> fnr; // absent when the set has no positives
};

/// The threshold rule: predicted recurring iff score_recurring > th;
/// otherwise NRC. Returns true for NRC (the positive class), so a score
/// exactly at the threshold is positive.
bool decide(double score_recurring, double th);
inline bool decide(const ScoredSample& s, double th) { return decide(s.score_recurring, th); }

/// Sweeps thresholds 0.01, 0.02, ..., 1.00 and picks the one whose (FPR,
/// TPR) point lies nearest (0, 1); ties break to the smaller threshold.
/// Requires at least one positive and one negative truth.
RocResult roc_sweep(const std::vector<ScoredSample>& samples);

/// Runs the network over a labeled dataset and keeps class-0 scores.
std::vector<ScoredSample> score_dataset(const nn::Network& net,
                                        const std::vector<encode::LabeledSample>& dataset);

Metrics metrics_from_scores(const std::vector<ScoredSample>& samples, double th);

Metrics evaluate(const nn::Network& net, const std::vector<encode::LabeledSample>& dataset,
                 double th);

/// Share of truth-NRC samples whose predicted window (argmax over the eight
/// window classes) lands within +-tolerance of the true window.
double window_hit_rate(const nn::Network& net, const std::vector<encode::LabeledSample>& dataset,
                       int tolerance = 1);

enum class DiffField {
    kSpeed,
    kJamFactor,
};

DiffField diff_field_from_string(const std::string& name);

/// Half-open local-time interval within a day, in minutes since midnight.
struct DayWindow {
    int start_minute = 0;
    int end_minute = 24 * 60;
};

/// Per segment: mean of the field over readings on the given local days
/// within the window. Segments with no matching readings are omitted.
std::map<geo::SegmentKey, double> window_mean(const geo::TrafficStore& store,
                                              const std::vector<geo::SegmentKey>& keys,
                                              const std::vector<LocalDate>& days,
                                              const DayWindow& window, const Timezone& tz,
                                              DiffField field);

/// Per segment: mean(field over readings on days_a within the window) minus
/// the same mean over days_b. Segments lacking data on either side are
/// omitted. Dates and the window are local to `tz`.
std::map<geo::SegmentKey, double> segment_diff(const geo::TrafficStore& store,
                                               const std::vector<geo::SegmentKey>& keys,
                                               const std::vector<LocalDate>& days_a,
                                               const std::vector<LocalDate>& days_b,
                                               const DayWindow& window, const Timezone& tz,
                                               DiffField field);

} // namespace dxnat::eval
