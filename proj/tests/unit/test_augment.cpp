#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "dxnat/augment.hpp"
#include "dxnat/rng.hpp"
#include "../testutil.hpp"

using namespace dxnat;
using namespace dxnat::augment;

namespace {

/// A traffic store with per-minute readings for one segment over [t0, t1].
geo::TrafficStore minute_store(const std::string& key, UtcTime t0, UtcTime t1, double base_mph) {
    std::vector<geo::TrafficReading> rows;
    for (UtcTime t = t0; t <= t1; t += 60) {
        rows.push_back({t, key, base_mph + static_cast<double>((t / 60) % 7), {}});
    }
    return geo::TrafficStore::build(rows);
}

raster::GridMap small_grid(const geo::SegmentSet& set) {
    return raster::resample(raster::init_grid(set, set.bbox(), 100.0), set);
}

raster::Tci tci_of(std::uint64_t seed, int width, UtcTime timestamp = 0) {
    Rng rng(seed);
    raster::Tci t;
    t.width = width;
    t.pixels.resize(static_cast<std::size_t>(width) * width);
    for (auto& p : t.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
    t.timestamp = timestamp;
    t.grid_id = "g";
    return t;
}

bool row_equals(const raster::Tci& a, const raster::Tci& b, int row) {
    return std::equal(a.pixels.begin() + row * a.width, a.pixels.begin() + (row + 1) * a.width,
                      b.pixels.begin() + row * b.width);
}

encode::LabeledSample sample_of(std::uint64_t seed, int cls, int width = 8) {
    encode::LabeledSample s;
    s.tci = tci_of(seed, width);
    s.features = {static_cast<int>(seed % 24), static_cast<int>(seed % 7)};
    s.label = encode::label_from_class(cls);
    return s;
}

} // namespace

TEST_CASE("candidate timestamps are evenly spaced and end at T") {
    const auto set = geo::SegmentSet::build(
        {{"k", 40.0, {{36.1470, -86.8126}, {36.1586, -86.8009}}}});
    const auto grid = small_grid(set);
    const UtcTime t0 = parse_utc("2017-01-02T08:00:00Z");
    const UtcTime T = t0 + 3600;
    const auto store = minute_store("k", t0, T, 30.0);

    CrossoverConfig cfg;
    cfg.n = 4;
    cfg.t_seconds = 180;
    auto cands = candidates(store, grid, T, cfg, 8);
    REQUIRE(cands.size() == 4);
    CHECK(cands[0].timestamp == T - 180);
    CHECK(cands[1].timestamp == T - 120);
    CHECK(cands[2].timestamp == T - 60);
    CHECK(cands[3].timestamp == T);

    cfg.n = 1;
    cands = candidates(store, grid, T, cfg, 8);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].timestamp == T);
}

TEST_CASE("candidates require readings in the window") {
    const auto set = geo::SegmentSet::build(
        {{"k", 40.0, {{36.1470, -86.8126}, {36.1586, -86.8009}}}});
    const auto grid = small_grid(set);
    const UtcTime t0 = parse_utc("2017-01-02T08:00:00Z");
    const auto store = minute_store("k", t0, t0 + 3600, 30.0);
    const CrossoverConfig cfg;
    CHECK_THROWS_WITH_AS(candidates(store, grid, t0 - 7200, cfg, 8),
                         doctest::Contains("no readings"), std::runtime_error);
}

TEST_CASE("zero mutation probability copies the base") {
    std::vector<raster::Tci> cands{tci_of(1, 8, 100), tci_of(2, 8, 200), tci_of(3, 8, 300)};
    CrossoverConfig cfg;
    cfg.p_m = 0.0;
    cfg.seed = 5;
    const raster::Tci child = crossover(cands, 1, cfg, 0);
    CHECK(child.pixels == cands[1].pixels);
    CHECK(child.timestamp == cands[1].timestamp);
}

TEST_CASE("a single candidate is returned unchanged") {
    std::vector<raster::Tci> cands{tci_of(1, 8, 100)};
    CrossoverConfig cfg;
    cfg.p_m = 1.0;
    CHECK(crossover(cands, 0, cfg, 0) == cands[0]);
}

TEST_CASE("full mutation takes every row from another candidate") {
    std::vector<raster::Tci> cands{tci_of(1, 8), tci_of(2, 8)};
    CrossoverConfig cfg;
    cfg.p_m = 1.0;
    cfg.seed = 9;
    const raster::Tci child = crossover(cands, 0, cfg, 0);
    for (int r = 0; r < 8; ++r) CHECK(row_equals(child, cands[1], r));
}

TEST_CASE("every offspring row comes from some candidate") {
    std::vector<raster::Tci> cands;
    for (std::uint64_t i = 0; i < 4; ++i) cands.push_back(tci_of(10 + i, 16));
    CrossoverConfig cfg;
    cfg.p_m = 0.4;
    cfg.seed = 21;
    for (std::uint64_t off = 0; off < 50; ++off) {
        const raster::Tci child = crossover(cands, 2, cfg, off);
        for (int r = 0; r < 16; ++r) {
            bool found = false;
            for (const auto& c : cands) found = found || row_equals(child, c, r);
            CHECK(found);
        }
    }
}

TEST_CASE("crossover is deterministic in seed and offspring index") {
    std::vector<raster::Tci> cands{tci_of(1, 8), tci_of(2, 8), tci_of(3, 8)};
    CrossoverConfig cfg;
    cfg.p_m = 0.5;
    cfg.seed = 33;
    CHECK(crossover(cands, 0, cfg, 7) == crossover(cands, 0, cfg, 7));
    CHECK(crossover(cands, 0, cfg, 7) != crossover(cands, 0, cfg, 8));
}

TEST_CASE("donor rows are spread evenly across the other candidates") {
    const int k = 4;
    const int width = 8;
    std::vector<raster::Tci> cands;
    for (int i = 0; i < k; ++i) {
        raster::Tci t;
        t.width = width;
        // Constant-value images make the donor of every row identifiable.
        t.pixels.assign(static_cast<std::size_t>(width) * width,
                        static_cast<std::uint8_t>(40 * i + 10));
        t.grid_id = "g";
        cands.push_back(std::move(t));
    }
    CrossoverConfig cfg;
    cfg.p_m = 1.0;
    cfg.seed = 2;

    std::map<std::uint8_t, int> donor_rows;
    const int offspring = 1250; // 10,000 rows total
    for (int off = 0; off < offspring; ++off) {
        const raster::Tci child = crossover(cands, 0, cfg, static_cast<std::uint64_t>(off));
        for (int r = 0; r < width; ++r) ++donor_rows[child.pixels[r * width]];
    }
    CHECK(donor_rows.count(10) == 0); // base never donates under full mutation
    const double total = offspring * width;
    const double p = 1.0 / (k - 1);
    const double sigma = std::sqrt(p * (1 - p) * total);
    for (int i = 1; i < k; ++i) {
        const double got = donor_rows[static_cast<std::uint8_t>(40 * i + 10)];
        CHECK(std::abs(got - p * total) <= 3 * sigma);
    }
}

TEST_CASE("balancing an already balanced dataset permutes it") {
    std::vector<encode::LabeledSample> data;
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        for (int i = 0; i < 3; ++i) data.push_back(sample_of(100 * cls + i, cls));
    }
    CrossoverConfig cfg;
    cfg.seed = 4;
    const auto out = balance(data, 3, cfg);
    REQUIRE(out.size() == data.size());

    auto signature = [](const encode::LabeledSample& s) {
        return std::make_pair(s.tci.pixels, encode::class_index(s.label));
    };
    std::vector<std::pair<std::vector<std::uint8_t>, int>> a, b;
    for (const auto& s : data) a.push_back(signature(s));
    for (const auto& s : out) b.push_back(signature(s));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("deficit classes are filled with same-class offspring") {
    std::vector<encode::LabeledSample> data;
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        const int count = cls == 3 ? 10 : 25;
        for (int i = 0; i < count; ++i) data.push_back(sample_of(1000 * cls + i, cls));
    }
    CrossoverConfig cfg;
    cfg.seed = 8;
    // Full mutation: offspring can never clone their base, so the original
    // and generated samples can be told apart by exact pixel match.
    cfg.p_m = 1.0;
    const auto out = balance(data, 25, cfg);
    CHECK(out.size() == 9 * 25);

    std::array<int, 9> counts{};
    for (const auto& s : out) ++counts[encode::class_index(s.label)];
    for (int cls = 0; cls < 9; ++cls) CHECK(counts[cls] == 25);

    // The 15 additions to class 3 are crossovers of class-3 rows only.
    std::vector<const encode::LabeledSample*> originals;
    for (const auto& s : data) {
        if (encode::class_index(s.label) == 3) originals.push_back(&s);
    }
    int offspring_seen = 0;
    for (const auto& s : out) {
        if (encode::class_index(s.label) != 3) continue;
        const bool is_original = std::any_of(originals.begin(), originals.end(),
                                             [&](auto* o) { return o->tci == s.tci; });
        if (!is_original) {
            ++offspring_seen;
            for (int r = 0; r < s.tci.width; ++r) {
                bool from_class3 = false;
                for (auto* o : originals) from_class3 = from_class3 || row_equals(s.tci, o->tci, r);
                CHECK(from_class3);
            }
        }
    }
    CHECK(offspring_seen == 15);
}

TEST_CASE("downsampled classes keep a subset of the originals") {
    std::vector<encode::LabeledSample> data;
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        const int count = cls == 0 ? 12 : 2;
        for (int i = 0; i < count; ++i) data.push_back(sample_of(500 * cls + i, cls));
    }
    CrossoverConfig cfg;
    cfg.seed = 10;
    const auto out = balance(data, 2, cfg);
    CHECK(out.size() == 18);
    for (const auto& s : out) {
        const bool from_input = std::any_of(data.begin(), data.end(),
                                            [&](const auto& d) { return d.tci == s.tci; });
        CHECK(from_input);
    }
}

TEST_CASE("a class with zero samples is reported by index") {
    std::vector<encode::LabeledSample> data;
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        if (cls == 6) continue;
        data.push_back(sample_of(cls, cls));
    }
    CrossoverConfig cfg;
    CHECK_THROWS_WITH_AS(balance(data, 2, cfg), doctest::Contains("6"), std::runtime_error);
}

TEST_CASE("balance is deterministic for a fixed seed") {
    std::vector<encode::LabeledSample> data;
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        for (int i = 0; i < 2 + cls; ++i) data.push_back(sample_of(70 * cls + i, cls));
    }
    CrossoverConfig cfg;
    cfg.seed = 12;
    cfg.p_m = 0.2;
    const auto a = balance(data, 4, cfg);
    const auto b = balance(data, 4, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].tci == b[i].tci);
        CHECK(encode::class_index(a[i].label) == encode::class_index(b[i].label));
    }

    cfg.seed = 13;
    const auto c = balance(data, 4, cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i) any_diff = !(a[i].tci == c[i].tci);
    CHECK(any_diff);
}

TEST_CASE("balanced output arrives in class block order") {
    std::vector<encode::LabeledSample> data;
    for (int cls = encode::kOutputClasses - 1; cls >= 0; --cls) {
        for (int i = 0; i < 3; ++i) data.push_back(sample_of(30 * cls + i, cls));
    }
    CrossoverConfig cfg;
    cfg.seed = 3;
    const auto out = balance(data, 2, cfg);
    REQUIRE(out.size() == 18);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(encode::class_index(out[i].label) == static_cast<int>(i) / 2);
    }
}

TEST_CASE("config validation rejects nonsense") {
    CrossoverConfig cfg;
    cfg.n = 0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.p_m = 1.5;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.t_seconds = -1;
    CHECK_THROWS(cfg.validate());
}
