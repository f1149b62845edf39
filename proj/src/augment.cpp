#include "dxnat/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dxnat/rng.hpp"
#include "dxnat/timeutil.hpp"

namespace dxnat::augment {

namespace {

// Stream tags keeping the balance sub-draws independent of each other.
constexpr std::uint64_t kCrossoverStream = 0x6372;
constexpr std::uint64_t kDownsampleStream = 0x646f;

} // namespace

void CrossoverConfig::validate() const {
    if (n < 1) throw std::runtime_error("crossover n must be >= 1");
    if (p_m < 0.0 || p_m > 1.0) throw std::runtime_error("p_m must be in [0, 1]");
    if (t_seconds < 0) throw std::runtime_error("time extension must be >= 0");
    if (count < 0) throw std::runtime_error("offspring count must be >= 0");
}

std::vector<raster::Tci> candidates(const geo::TrafficStore& store, const raster::GridMap& grid,
                                    UtcTime t_end, const CrossoverConfig& cfg, int width,
                                    raster::MissingPolicy fallback) {
    cfg.validate();
    const UtcTime t_begin = t_end - cfg.t_seconds;
    if (!store.any_in_range(t_begin, t_end)) {
        throw std::runtime_error("no readings in [" + format_utc(t_begin) + ", " +
                                 format_utc(t_end) + "]");
    }
    // Keys the grid actually references; the snapshot query is per timestamp.
    std::vector<raster::Tci> result;
    result.reserve(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        UtcTime ts = t_end;
        if (cfg.n > 1) {
            ts = t_begin + static_cast<UtcTime>(
                               std::llround(static_cast<double>(i) * cfg.t_seconds / (cfg.n - 1)));
        }
        std::unordered_map<geo::SegmentKey, double> speeds;
        for (const geo::TrafficReading& r : store.at_time(ts)) speeds[r.key] = r.speed_mph;
        result.push_back(raster::project(grid, speeds, width, fallback, ts));
    }
    return result;
}

raster::Tci crossover(const std::vector<raster::Tci>& cands, std::size_t base_index,
                      const CrossoverConfig& cfg, std::uint64_t offspring_index) {
    cfg.validate();
    if (cands.empty()) throw std::runtime_error("empty candidate list");
    if (base_index >= cands.size()) throw std::runtime_error("base index out of range");
    const int width = cands.front().width;
    for (const raster::Tci& c : cands) {
        if (c.width != width) throw std::runtime_error("candidate width mismatch");
    }
    raster::Tci offspring = cands[base_index];
    if (cands.size() == 1) return offspring;
    Rng rng(derive_seed(cfg.seed, offspring_index));
    for (int row = 0; row < width; ++row) {
        if (rng.next_double() >= cfg.p_m) continue;
        std::uint64_t pick = rng.next_below(cands.size() - 1);
        if (pick >= base_index) ++pick; // skip the base itself
        const raster::Tci& donor = cands[pick];
        std::copy_n(donor.pixels.begin() + static_cast<std::size_t>(row) * width, width,
                    offspring.pixels.begin() + static_cast<std::size_t>(row) * width);
    }
    return offspring;
}

std::vector<encode::LabeledSample> balance(const std::vector<encode::LabeledSample>& dataset,
                                           int target_per_class, const CrossoverConfig& cfg) {
    cfg.validate();
    if (target_per_class < 1) throw std::runtime_error("target per class must be >= 1");
    std::array<std::vector<std::size_t>, encode::kOutputClasses> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        by_class[encode::class_index(dataset[i].label)].push_back(i);
    }
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        if (by_class[cls].empty()) {
            throw std::runtime_error("class " + std::to_string(cls) + " has zero samples");
        }
    }
    std::vector<encode::LabeledSample> result;
    result.reserve(static_cast<std::size_t>(target_per_class) * encode::kOutputClasses);
    std::uint64_t offspring_counter = 0;
    for (int cls = 0; cls < encode::kOutputClasses; ++cls) {
        std::vector<std::size_t>& members = by_class[cls];
        const int have = static_cast<int>(members.size());
        if (have >= target_per_class) {
            // Uniform down-sample: seeded partial Fisher-Yates.
            Rng rng(derive_seed(cfg.seed, kDownsampleStream + cls));
            for (int i = 0; i < target_per_class; ++i) {
                const std::uint64_t j = i + rng.next_below(members.size() - i);
                std::swap(members[i], members[j]);
                result.push_back(dataset[members[i]]);
            }
            continue;
        }
        for (std::size_t idx : members) result.push_back(dataset[idx]);
        // Same-class candidates feed the crossover; the base rotates through
        // the class so offspring features stay grounded in real samples.
        std::vector<raster::Tci> cands;
        cands.reserve(members.size());
        const int width = dataset[members.front()].tci.width;
        for (std::size_t idx : members) {
            if (dataset[idx].tci.width != width) {
                throw std::runtime_error("class " + std::to_string(cls) +
                                         " mixes TCI widths; cannot crossover");
            }
            cands.push_back(dataset[idx].tci);
        }
        CrossoverConfig local = cfg;
        local.seed = derive_seed(cfg.seed, kCrossoverStream + cls);
        for (int i = 0; i < target_per_class - have; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) % cands.size();
            encode::LabeledSample sample;
            sample.tci = crossover(cands, base, local, offspring_counter++);
            sample.features = dataset[members[base]].features;
            sample.label = dataset[members[base]].label;
            result.push_back(std::move(sample));
        }
    }
    return result;
}

} // namespace dxnat::augment
