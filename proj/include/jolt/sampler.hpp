#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "jolt/rng.hpp"

namespace jolt {

/// floor(beta * num_columns): the largest noise count a draw may produce.
std::size_t noise_bound(std::size_t num_columns, double beta);

/// k uniform over {0, 1, ..., floor(beta * num_columns)}. Throws ConfigError unless 0 < beta < 1.
std::size_t draw_noise_count(std::size_t num_columns, double beta, CounterRng& rng);

/// Column indices 0..num_columns-1 not in gt, ascending.
std::vector<std::size_t> noise_pool(std::size_t num_columns, const std::vector<std::size_t>& gt);

struct NoiseDraw {
    std::vector<std::size_t> chosen;  // in draw order
    std::size_t k = 0;                // requested count before clamping to the pool
};

/// Sequential weighted draws without replacement from `pool`: each pick is
/// proportional to weight / remaining total, then removed. k is clamped to the
/// pool size; an all-zero remainder falls back to uniform. Throws
/// LengthMismatch when weights and pool differ in size, ConfigError on a
/// negative or non-finite weight.
NoiseDraw sample_noisy(const std::vector<std::size_t>& pool, const std::vector<double>& weights, std::size_t k, CounterRng& rng);

/// Per-example sampling weights captured once, then read-only.
/// Concurrent lookups are safe; record must not race with anything.
class WeightCache {
public:
    /// Throws DuplicateCacheEntry when the example already has weights.
    void record(const std::string& example_id, std::vector<double> weights);
    /// Throws MissingCacheEntry for an example never recorded.
    const std::vector<double>& lookup(const std::string& example_id) const;
    bool contains(const std::string& example_id) const { return entries_.count(example_id) > 0; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// {"version": 1, "entries": {id: [w, ...]}}, written atomically via a temp file.
    void save(const std::string& path) const;
    /// Empty cache when the file does not exist.
    static WeightCache load(const std::string& path);

    bool operator==(const WeightCache&) const = default;

private:
    std::map<std::string, std::vector<double>> entries_;
};

}  // namespace jolt
