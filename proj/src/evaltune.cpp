#include "dxnat/evaltune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace dxnat::eval {

namespace {

struct Counts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Counts count_confusion(const std::vector<ScoredSample>& samples, double th) {
    Counts c;
    for (const ScoredSample& s : samples) {
        const bool predicted_nrc = decide(s, th);
        if (s.truth.is_nrc) {
            predicted_nrc ? ++c.tp : ++c.fn;
        } else {
            predicted_nrc ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

} // namespace

bool decide(double score_recurring, double th) {
    if (!(th >= 0.0 && th <= 1.0)) throw std::runtime_error("threshold must be in [0, 1]");
    return !(score_recurring > th);
}

RocResult roc_sweep(const std::vector<ScoredSample>& samples) {
    std::int64_t positives = 0, negatives = 0;
    for (const ScoredSample& s : samples) (s.truth.is_nrc ? positives : negatives)++;
    if (positives == 0 || negatives == 0) {
        throw std::runtime_error("roc_sweep needs both positive and negative samples");
    }
    RocResult result;
    result.points.reserve(100);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 100; ++i) {
        const double th = static_cast<double>(i) / 100.0;
        const Counts c = count_confusion(samples, th);
        RocPoint pt;
        pt.threshold = th;
        pt.fpr = static_cast<double>(c.fp) / static_cast<double>(negatives);
        pt.tpr = static_cast<double>(c.tp) / static_cast<double>(positives);
        result.points.push_back(pt);
        const double dist = std::hypot(pt.fpr, 1.0 - pt.tpr);
        if (dist < best) {
            best = dist;
            result.chosen = th;
        }
    }
    return result;
}

std::vector<ScoredSample> score_dataset(const nn::Network& net,
                                        const std::vector<encode::LabeledSample>& dataset) {
    std::vector<ScoredSample> out;
    out.reserve(dataset.size());
    for (const encode::LabeledSample& s : dataset) {
        const nn::Tensor y =
            net.predict(nn::image_from_tci(s.tci), encode::encode_features(s.features));
        out.push_back({y.data[0], s.label});
    }
    return out;
}

Metrics metrics_from_scores(const std::vector<ScoredSample>& samples, double th) {
    if (samples.empty()) throw std::runtime_error("empty dataset");
    const Counts c = count_confusion(samples, th);
    Metrics m;
    m.tp = c.tp;
    m.fp = c.fp;
    m.tn = c.tn;
    m.fn = c.fn;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(samples.size());
    if (c.fp + c.tn > 0) m.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    if (c.fn + c.tp > 0) m.fnr = static_cast<double>(c.fn) / static_cast<double>(c.fn + c.tp);
    return m;
}

Metrics evaluate(const nn::Network& net, const std::vector<encode::LabeledSample>& dataset,
                 double th) {
    return metrics_from_scores(score_dataset(net, dataset), th);
}

double window_hit_rate(const nn::Network& net, const std::vector<encode::LabeledSample>& dataset,
                       int tolerance) {
    std::int64_t nrc = 0, hits = 0;
    for (const encode::LabeledSample& s : dataset) {
        if (!s.label.is_nrc) continue;
        ++nrc;
        const nn::Tensor y =
            net.predict(nn::image_from_tci(s.tci), encode::encode_features(s.features));
        int best = 1;
        for (int c = 2; c < encode::kOutputClasses; ++c) {
            if (y.data[c] > y.data[best]) best = c;
        }
        const int predicted_window = best - 1;
        if (std::abs(predicted_window - *s.label.window) <= tolerance) ++hits;
    }
    if (nrc == 0) throw std::runtime_error("no NRC samples");
    return static_cast<double>(hits) / static_cast<double>(nrc);
}

DiffField diff_field_from_string(const std::string& name) {
    if (name == "speed") return DiffField::kSpeed;
    if (name == "jam_factor") return DiffField::kJamFactor;
    throw std::runtime_error("unknown field '" + name + "' (expected speed or jam_factor)");
}

std::map<geo::SegmentKey, double> window_mean(const geo::TrafficStore& store,
                                              const std::vector<geo::SegmentKey>& keys,
                                              const std::vector<LocalDate>& days,
                                              const DayWindow& window, const Timezone& tz,
                                              DiffField field) {
    if (days.empty()) throw std::runtime_error("empty day list");
    if (!(window.start_minute >= 0 && window.start_minute < window.end_minute &&
          window.end_minute <= 24 * 60)) {
        throw std::runtime_error("bad day window");
    }
    std::unordered_set<geo::SegmentKey> wanted(keys.begin(), keys.end());
    std::set<LocalDate> dates(days.begin(), days.end());
    std::map<geo::SegmentKey, std::pair<double, std::int64_t>> acc;
    for (const geo::TrafficReading& r : store.readings()) {
        if (!wanted.contains(r.key)) continue;
        const int minute = tz.local_minute_of_day(r.timestamp);
        if (minute < window.start_minute || minute >= window.end_minute) continue;
        if (!dates.contains(tz.local_date(r.timestamp))) continue;
        double value = r.speed_mph;
        if (field == DiffField::kJamFactor) {
            if (!r.jam_factor) {
                throw std::runtime_error("reading at " + format_utc(r.timestamp) + " for '" +
                                         r.key + "' has no jam factor");
            }
            value = *r.jam_factor;
        }
        auto& [sum, n] = acc[r.key];
        sum += value;
        ++n;
    }
    std::map<geo::SegmentKey, double> out;
    for (const auto& [key, sn] : acc) out[key] = sn.first / static_cast<double>(sn.second);
    return out;
}

std::map<geo::SegmentKey, double> segment_diff(const geo::TrafficStore& store,
                                               const std::vector<geo::SegmentKey>& keys,
                                               const std::vector<LocalDate>& days_a,
                                               const std::vector<LocalDate>& days_b,
                                               const DayWindow& window, const Timezone& tz,
                                               DiffField field) {
    if (days_a.empty() || days_b.empty()) throw std::runtime_error("empty day list");
    if (!(window.start_minute >= 0 && window.start_minute < window.end_minute &&
          window.end_minute <= 24 * 60)) {
        throw std::runtime_error("bad day window");
    }
    struct Acc {
        double sum_a = 0.0, sum_b = 0.0;
        std::int64_t n_a = 0, n_b = 0;
    };
    std::unordered_set<geo::SegmentKey> wanted(keys.begin(), keys.end());
    std::set<LocalDate> set_a(days_a.begin(), days_a.end());
    std::set<LocalDate> set_b(days_b.begin(), days_b.end());
    std::map<geo::SegmentKey, Acc> acc;
    for (const geo::TrafficReading& r : store.readings()) {
        if (!wanted.contains(r.key)) continue;
        const int minute = tz.local_minute_of_day(r.timestamp);
        if (minute < window.start_minute || minute >= window.end_minute) continue;
        const LocalDate date = tz.local_date(r.timestamp);
        const bool in_a = set_a.contains(date);
        const bool in_b = set_b.contains(date);
        if (!in_a && !in_b) continue;
        double value = r.speed_mph;
        if (field == DiffField::kJamFactor) {
            if (!r.jam_factor) {
                throw std::runtime_error("reading at " + format_utc(r.timestamp) + " for '" +
                                         r.key + "' has no jam factor");
            }
            value = *r.jam_factor;
        }
        Acc& a = acc[r.key];
        if (in_a) {
            a.sum_a += value;
            ++a.n_a;
        }
        if (in_b) {
            a.sum_b += value;
            ++a.n_b;
        }
    }
    std::map<geo::SegmentKey, double> out;
    for (const auto& [key, a] : acc) {
        if (a.n_a == 0 || a.n_b == 0) continue;
        out[key] = a.sum_a / static_cast<double>(a.n_a) - a.sum_b / static_cast<double>(a.n_b);
    }
    return out;
}

} // namespace dxnat::eval
