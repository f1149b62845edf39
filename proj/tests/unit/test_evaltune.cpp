#include <doctest.h>

#include <cmath>

#include "dxnat/evaltune.hpp"
#include "dxnat/rng.hpp"
#include "../testutil.hpp"

using namespace dxnat;
using namespace dxnat::eval;

namespace {

ScoredSample pos(double score) { return {score, encode::EventLabel{true, 3}}; }
ScoredSample neg(double score) { return {score, encode::EventLabel{false, {}}}; }

/// Independent confusion count used to cross-check the sweep.
void brute_confusion(const std::vector<ScoredSample>& samples, double th, std::int64_t& tp,
                     std::int64_t& fp, std::int64_t& tn, std::int64_t& fn) {
    tp = fp = tn = fn = 0;
    for (const auto& s : samples) {
        const bool predicted_nrc = s.score_recurring <= th;
        if (s.truth.is_nrc) {
            predicted_nrc ? ++tp : ++fn;
        } else {
            predicted_nrc ? ++fp : ++tn;
        }
    }
}

/// Exhaustive re-derivation of the chosen threshold.
double brute_choice(const std::vector<ScoredSample>& samples) {
    double best_th = 0.0;
    double best_dist = 1e18;
    for (int i = 1; i <= 100; ++i) {
        const double th = i / 100.0;
        std::int64_t tp, fp, tn, fn;
        brute_confusion(samples, th, tp, fp, tn, fn);
        const double fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);
        const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double dist = std::hypot(fpr, 1.0 - tpr);
        if (dist < best_dist) {
            best_dist = dist;
            best_th = th;
        }
    }
    return best_th;
}

} // namespace

TEST_CASE("the decision rule flags scores at or below the threshold as nrc") {
    CHECK_FALSE(decide(0.9, 0.5)); // confident recurring stays recurring
    CHECK(decide(0.1, 0.5));
    CHECK(decide(0.5, 0.5)); // boundary goes to the positive class
    CHECK_THROWS(decide(0.5, 1.5));
    CHECK_THROWS(decide(0.5, -0.1));
}

TEST_CASE("a separable score set reaches the perfect corner") {
    const std::vector<ScoredSample> samples = {pos(0.05), pos(0.10), pos(0.20),
                                               neg(0.80), neg(0.90), neg(0.95)};
    const RocResult roc = roc_sweep(samples);
    REQUIRE(roc.points.size() == 100);
    std::int64_t tp, fp, tn, fn;
    brute_confusion(samples, roc.chosen, tp, fp, tn, fn);
    CHECK(fp == 0);
    CHECK(fn == 0);
}

TEST_CASE("four-sample sweep picks threshold 0.40") {
    const std::vector<ScoredSample> samples = {pos(0.2), pos(0.4), neg(0.7), neg(0.9)};
    const RocResult roc = roc_sweep(samples);
    CHECK(roc.chosen == doctest::Approx(0.40));
    CHECK(brute_choice(samples) == doctest::Approx(0.40));
}

TEST_CASE("degenerate identical scores fall back to the smallest threshold") {
    // Every threshold is equally bad, so the tie break wins.
    const std::vector<ScoredSample> samples = {pos(0.5), pos(0.5), neg(0.5), neg(0.5)};
    const RocResult roc = roc_sweep(samples);
    CHECK(roc.chosen == doctest::Approx(0.01));
}

TEST_CASE("roc needs both classes") {
    CHECK_THROWS(roc_sweep({pos(0.2), pos(0.3)}));
    CHECK_THROWS(roc_sweep({neg(0.8)}));
    CHECK_THROWS(roc_sweep({}));
}

TEST_CASE("sweep matches exhaustive search on random score sets") {
    Rng rng(29);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<ScoredSample> samples;
        const int n = 10 + static_cast<int>(rng.next_below(90));
        for (int i = 0; i < n; ++i) samples.push_back(pos(rng.next_double()));
        for (int i = 0; i < n; ++i) samples.push_back(neg(rng.next_double()));
        const RocResult roc = roc_sweep(samples);
        CHECK(roc.chosen == doctest::Approx(brute_choice(samples)));

        // The curve is monotone: larger thresholds flag at least as many
        // samples positive, so both rates can only grow.
        for (std::size_t i = 1; i < roc.points.size(); ++i) {
            CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr - 1e-12);
            CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr - 1e-12);
        }
    }
}

TEST_CASE("metrics formulas on a fixed confusion") {
    std::vector<ScoredSample> samples;
    for (int i = 0; i < 9; ++i) samples.push_back(pos(0.1)); // TP
    samples.push_back(pos(0.9));                             // FN
    for (int i = 0; i < 89; ++i) samples.push_back(neg(0.9)); // TN
    samples.push_back(neg(0.1));                              // FP
    const Metrics m = metrics_from_scores(samples, 0.5);
    CHECK(m.tp == 9);
    CHECK(m.fn == 1);
    CHECK(m.tn == 89);
    CHECK(m.fp == 1);
    CHECK(m.accuracy == doctest::Approx(0.98));
    REQUIRE(m.fpr.has_value());
    CHECK(*m.fpr == doctest::Approx(1.0 / 90.0));
    REQUIRE(m.fnr.has_value());
    CHECK(*m.fnr == doctest::Approx(0.1));
}

TEST_CASE("rates are omitted when their class is absent") {
    const Metrics no_neg = metrics_from_scores({pos(0.1), pos(0.2)}, 0.5);
    CHECK_FALSE(no_neg.fpr.has_value());
    REQUIRE(no_neg.fnr.has_value());
    CHECK(*no_neg.fnr == 0.0);

    const Metrics no_pos = metrics_from_scores({neg(0.9)}, 0.5);
    CHECK_FALSE(no_pos.fnr.has_value());
    REQUIRE(no_pos.fpr.has_value());
    CHECK(no_pos.accuracy == 1.0);
}

TEST_CASE("confusion cells partition the sample set") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ScoredSample> samples;
        const int n = 1 + static_cast<int>(rng.next_below(50));
        std::int64_t positives = 0;
        for (int i = 0; i < n; ++i) {
            const bool is_pos = rng.next_double() < 0.5;
            positives += is_pos;
            samples.push_back(is_pos ? pos(rng.next_double()) : neg(rng.next_double()));
        }
        const double th = (1 + rng.next_below(100)) / 100.0;
        const Metrics m = metrics_from_scores(samples, th);
        CHECK(m.tp + m.fn == positives);
        CHECK(m.tn + m.fp == n - positives);
        CHECK(m.accuracy ==
              doctest::Approx(static_cast<double>(m.tp + m.tn) / static_cast<double>(n)));
    }
}

TEST_CASE("window hit rate counts nearby argmax windows") {
    // A hand-built network is overkill; drive the public API with a trained
    // trivial model instead: bias-only logits make every prediction constant.
    nn::Network net = nn::Network::build({nn::flatten(), nn::concat_features(), nn::dense(9),
                                          nn::softmax()},
                                         4, 1);
    for (auto& p : net.parameters()) p.data.assign(p.data.size(), 0.0);
    net.parameters()[1].data[4] = 10.0; // always predicts window 3 (class 4)

    std::vector<encode::LabeledSample> data;
    for (int w : {2, 3, 4, 6}) {
        encode::LabeledSample s;
        s.tci.width = 4;
        s.tci.pixels.assign(16, 0);
        s.label = encode::EventLabel{true, w};
        data.push_back(std::move(s));
    }
    // Windows 2, 3, 4 are within +-1 of the constant prediction; 6 is not.
    CHECK(window_hit_rate(net, data, 1) == doctest::Approx(0.75));
    CHECK(window_hit_rate(net, data, 0) == doctest::Approx(0.25));
    CHECK(window_hit_rate(net, data, 3) == doctest::Approx(1.0));

    // Recurring samples are excluded from the denominator.
    encode::LabeledSample rec;
    rec.tci.width = 4;
    rec.tci.pixels.assign(16, 0);
    rec.label = encode::EventLabel{false, {}};
    data.push_back(std::move(rec));
    CHECK(window_hit_rate(net, data, 1) == doctest::Approx(0.75));

    CHECK_THROWS(window_hit_rate(net, {rec}, 1));
}

namespace {

geo::TrafficStore store_for_days(const std::vector<std::pair<std::string, double>>& day_speeds,
                                 const std::string& key, double jam) {
    std::vector<geo::TrafficReading> rows;
    for (const auto& [day, mph] : day_speeds) {
        for (int minute = 0; minute < 120; minute += 30) {
            geo::TrafficReading r;
            r.timestamp = parse_utc(day + "T10:00:00Z") + minute * 60;
            r.key = key;
            r.speed_mph = mph;
            r.jam_factor = jam;
            rows.push_back(std::move(r));
        }
    }
    return geo::TrafficStore::build(rows);
}

} // namespace

TEST_CASE("segment diff of a day set against itself is zero") {
    const auto store = store_for_days({{"2025-01-06", 40.0}, {"2025-01-07", 50.0}}, "k", 2.0);
    const std::vector<LocalDate> days = {parse_date("2025-01-06"), parse_date("2025-01-07")};
    const auto diff = segment_diff(store, {"k"}, days, days, DayWindow{0, 24 * 60},
                                   Timezone::from_name("UTC"), DiffField::kSpeed);
    REQUIRE(diff.count("k") == 1);
    CHECK(diff.at("k") == doctest::Approx(0.0));
}

TEST_CASE("segment diff subtracts window means by field") {
    const auto store = store_for_days({{"2025-01-06", 5.0}, {"2025-01-07", 2.0}}, "k", 1.5);
    const std::vector<LocalDate> a = {parse_date("2025-01-06")};
    const std::vector<LocalDate> b = {parse_date("2025-01-07")};
    const DayWindow window{10 * 60, 12 * 60};
    const Timezone utc = Timezone::from_name("UTC");

    const auto speed = segment_diff(store, {"k"}, a, b, window, utc, DiffField::kSpeed);
    CHECK(speed.at("k") == doctest::Approx(3.0));

    // Constant jam factor on both sides cancels.
    const auto jam = segment_diff(store, {"k"}, a, b, window, utc, DiffField::kJamFactor);
    CHECK(jam.at("k") == doctest::Approx(0.0));
}

TEST_CASE("segments missing either side are omitted") {
    const auto store = store_for_days({{"2025-01-06", 40.0}}, "k", 2.0);
    const auto diff = segment_diff(store, {"k", "absent"}, {parse_date("2025-01-06")},
                                   {parse_date("2025-01-07")}, DayWindow{0, 24 * 60},
                                   Timezone::from_name("UTC"), DiffField::kSpeed);
    CHECK(diff.empty()); // no data at all on the b side
}

TEST_CASE("the day window is half-open and local") {
    const auto store = store_for_days({{"2025-01-06", 40.0}}, "k", 2.0);
    const Timezone utc = Timezone::from_name("UTC");
    // Readings sit at 10:00, 10:30, 11:00, 11:30.
    auto mean = window_mean(store, {"k"}, {parse_date("2025-01-06")}, DayWindow{600, 630}, utc,
                            DiffField::kSpeed);
    CHECK(mean.count("k") == 1); // only the 10:00 reading

    mean = window_mean(store, {"k"}, {parse_date("2025-01-06")}, DayWindow{630, 631}, utc,
                       DiffField::kSpeed);
    CHECK(mean.count("k") == 1); // the 10:30 reading, closed on the left

    mean = window_mean(store, {"k"}, {parse_date("2025-01-06")}, DayWindow{601, 629}, utc,
                       DiffField::kSpeed);
    CHECK(mean.empty());

    // In a UTC+5 view the same instants belong to the afternoon.
    const Timezone plus5 = Timezone::from_name("UTC+5");
    mean = window_mean(store, {"k"}, {parse_date("2025-01-06")}, DayWindow{15 * 60, 16 * 60},
                       plus5, DiffField::kSpeed);
    CHECK(mean.count("k") == 1);

    CHECK_THROWS(segment_diff(store, {"k"}, {}, {parse_date("2025-01-06")},
                              DayWindow{0, 1440}, utc, DiffField::kSpeed));
}

TEST_CASE("jam factor diffs require jam data") {
    std::vector<geo::TrafficReading> rows;
    rows.push_back({parse_utc("2025-01-06T10:00:00Z"), "k", 40.0, {}});
    rows.push_back({parse_utc("2025-01-07T10:00:00Z"), "k", 40.0, {}});
    const auto store = geo::TrafficStore::build(rows);
    CHECK_THROWS(segment_diff(store, {"k"}, {parse_date("2025-01-06")},
                              {parse_date("2025-01-07")}, DayWindow{0, 1440},
                              Timezone::from_name("UTC"), DiffField::kJamFactor));
}

TEST_CASE("diff field names parse") {
    CHECK(diff_field_from_string("speed") == DiffField::kSpeed);
    CHECK(diff_field_from_string("jam_factor") == DiffField::kJamFactor);
    CHECK_THROWS(diff_field_from_string("volume"));
}
