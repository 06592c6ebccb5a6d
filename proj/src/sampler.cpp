#include "jolt/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "jolt/error.hpp"
#include "json.hpp"

namespace jolt {

std::size_t noise_bound(std::size_t num_columns, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::ConfigError, "beta must lie in (0, 1)");
    return static_cast<std::size_t>(std::floor(beta * static_cast<double>(num_columns)));
}

std::size_t draw_noise_count(std::size_t num_columns, double beta, CounterRng& rng) {
    return static_cast<std::size_t>(rng.below(noise_bound(num_columns, beta) + 1));
}

std::vector<std::size_t> noise_pool(std::size_t num_columns, const std::vector<std::size_t>& gt) {
    std::vector<std::uint8_t> is_gt(num_columns, 0);
    for (auto g : gt) {
        if (g >= num_columns) throw Error(ErrorCode::UnknownColumn, "GT column " + std::to_string(g) + " out of range");
        is_gt[g] = 1;
    }
    std::vector<std::size_t> pool;
    for (std::size_t c = 0; c < num_columns; ++c) {
        if (!is_gt[c]) pool.push_back(c);
    }
    return pool;
}

NoiseDraw sample_noisy(const std::vector<std::size_t>& pool, const std::vector<double>& weights, std::size_t k, CounterRng& rng) {
    if (weights.size() != pool.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(weights.size()) + " weights for a pool of " + std::to_string(pool.size()));
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::ConfigError, "sampling weights must be finite and non-negative");
    }
    NoiseDraw draw;
    draw.k = k;
    std::vector<std::size_t> left(pool.size());
    std::iota(left.begin(), left.end(), 0);
    const std::size_t take = std::min(k, pool.size());
    while (draw.chosen.size() < take) {
        double total = 0;
        for (auto i : left) total += weights[i];
        std::size_t pick = left.size() - 1;
        if (total > 0) {
            const double u = rng.uniform() * total;
            double acc = 0;
            for (std::size_t j = 0; j < left.size(); ++j) {
                acc += weights[left[j]];
                if (u < acc) {
                    pick = j;
                    break;
                }
            }
            // Rounding can leave u just past the last cumulative sum; land on the last positive weight.
            while (weights[left[pick]] <= 0) --pick;
        } else {
            pick = static_cast<std::size_t>(rng.below(left.size()));
        }
        draw.chosen.push_back(pool[left[pick]]);
        left.erase(left.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return draw;
}

void WeightCache::record(const std::string& example_id, std::vector<double> weights) {
    if (!entries_.emplace(example_id, std::move(weights)).second) {
        throw Error(ErrorCode::DuplicateCacheEntry, "weights for '" + example_id + "' already recorded");
    }
}

const std::vector<double>& WeightCache::lookup(const std::string& example_id) const {
    const auto it = entries_.find(example_id);
    if (it == entries_.end()) throw Error(ErrorCode::MissingCacheEntry, "no cached weights for '" + example_id + "'");
    return it->second;
}

void WeightCache::save(const std::string& path) const {
    nlohmann::json j = {{"version", 1}, {"entries", entries_}};
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw Error(ErrorCode::IoError, "cannot write " + tmp);
        os << j.dump() << '\n';
        if (!os) throw Error(ErrorCode::IoError, "failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

WeightCache WeightCache::load(const std::string& path) {
    WeightCache cache;
    std::ifstream is(path);
    if (!is) return cache;
    try {
        const auto j = nlohmann::json::parse(is);
        if (j.at("version") != 1) throw Error(ErrorCode::FormatError, "unsupported weight cache version");
        cache.entries_ = j.at("entries").get<std::map<std::string, std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path + ": " + e.what());
    }
    return cache;
}

}  // namespace jolt
