#pragma once

#include <cstdint>
#include <vector>

#include "dxnat/encode.hpp"
#include "dxnat/geodata.hpp"
#include "dxnat/raster.hpp"

namespace dxnat::augment {

struct CrossoverConfig {
    int n = 4;                    // candidate TCIs drawn from [T - t, T]
    std::int64_t t_seconds = 180; // time extension
    double p_m = 0.1;             // per-row mutation probability
    std::uint64_t seed = 0;
    int count = 0; // offspring to generate where applicable

    void validate() const;
};

/// Projects `cfg.n` TCIs at evenly spaced timestamps in [T - t, T], the last
/// one exactly at T. Throws when the store has no readings in that range.
std::vector<raster::Tci> candidates(const geo::TrafficStore& store, const raster::GridMap& grid,
                                    UtcTime t_end, const CrossoverConfig& cfg, int width,
                                    raster::MissingPolicy fallback = raster::MissingPolicy::kFreeFlow);

/// Row-level crossover: offspring row i is the base candidate's row i with
/// probability 1 - p_m, otherwise row i of a uniformly chosen OTHER
/// candidate. Deterministic given (cfg.seed, offspring_index); the offspring
/// keeps the base candidate's timestamp and grid id.
raster::Tci crossover(const std::vector<raster::Tci>& cands, std::size_t base_index,
                      const CrossoverConfig& cfg, std::uint64_t offspring_index = 0);

/// Balances a labeled dataset to exactly `target_per_class` samples per
/// output class: surplus classes are down-sampled uniformly (seeded), deficit
/// classes are filled with crossover offspring of same-class samples.
/// Requires at least one sample in every class.
std::vector<encode::LabeledSample> balance(const std::vector<encode::LabeledSample>& dataset,
                                           int target_per_class, const CrossoverConfig& cfg);

} // namespace dxnat::augment
