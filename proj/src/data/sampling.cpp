#include "gvk/data/sampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "gvk/data/image.hpp"
#include "gvk/util/parallel.hpp"

namespace gvk {

std::size_t SamplingResult::shortfall_count() const {
    std::size_t n = 0;
    for (const auto& s : shortfalls) n += s.missing;
    return n;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t draw_below(std::uint64_t& state, std::uint64_t n) {
    if (n == 0) throw Error("draw_below: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
        const auto r = splitmix64(state);
        if (r < limit) return r % n;
    }
}

namespace {

std::vector<std::size_t> valid_pixels(const DepthMap& depth) {
    std::vector<std::size_t> out;
    for (std::size_t y = 0; y < depth.height(); ++y)
        for (std::size_t x = 0; x < depth.width(); ++x)
            if (depth.usable(y, x)) out.push_back(y * depth.width() + x);
    return out;
}

// Moves k uniformly chosen elements of pool to its tail and returns them.
std::vector<std::size_t> take_random(std::vector<std::size_t>& pool, std::size_t k, std::uint64_t& rng) {
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < k; ++i) {
        const auto remaining = pool.size() - i;
        const auto j = draw_below(rng, remaining);
        std::swap(pool[j], pool[remaining - 1]);
        picked.push_back(pool[remaining - 1]);
    }
    pool.resize(pool.size() - k);
    return picked;
}

SamplingResult sample_dataset(const std::vector<const Sample*>& entries,
                              const std::string& dataset, const SamplingConfig& config,
                              const DepthProvider& depth_of) {
    SamplingResult result;
    std::uint64_t rng = config.seed ^ fnv1a64(dataset);
    const auto n = entries.size();

    std::vector<std::size_t> draws(n);
    std::iota(draws.begin(), draws.end(), 0);
    if (config.images_per_dataset > 0) {
        const auto target = config.images_per_dataset;
        if (n >= target) {
            draws = take_random(draws, target, rng);
        } else {
            draws = take_random(draws, n, rng);
            for (std::size_t i = n; i < target; ++i) draws.push_back(draw_below(rng, n));
        }
    }

    std::map<std::size_t, std::size_t> draw_count;
    for (auto d : draws) ++draw_count[d];
    // Remaining pixel pools for images drawn more than once.
    std::map<std::size_t, std::vector<std::size_t>> pools;

    for (auto d : draws) {
        const auto& sample = *entries[d];
        std::vector<std::size_t> fresh;
        std::vector<std::size_t>* pool = nullptr;
        DepthMap depth = depth_of(sample);
        if (draw_count[d] > 1) {
            auto it = pools.find(d);
            if (it == pools.end()) it = pools.emplace(d, valid_pixels(depth)).first;
            pool = &it->second;
        } else {
            fresh = valid_pixels(depth);
            pool = &fresh;
        }
        if (pool->size() < config.per_image) {
            result.shortfalls.push_back({dataset, sample.id, config.per_image,
                                         std::to_string(pool->size()) + " unused valid pixels, need " +
                                             std::to_string(config.per_image)});
            continue;
        }
        for (auto p : take_random(*pool, config.per_image, rng)) {
            const auto y = p / depth.width(), x = p % depth.width();
            result.queries.push_back({sample.id, dataset, sample.domain, x, y, depth.at(y, x)});
        }
    }
    return result;
}

}  // namespace

SamplingResult sample_eval_pixels(const Manifest& manifest, const SamplingConfig& config,
                                  const DepthProvider& depth_of, std::size_t jobs) {
    if (config.per_image == 0) throw Error("sample_eval_pixels: per_image must be > 0");
    const auto datasets = manifest.datasets();
    std::vector<std::vector<const Sample*>> groups(datasets.size());
    for (const auto& s : manifest.entries) {
        if (s.split != Split::eval) continue;
        const auto k = static_cast<std::size_t>(std::find(datasets.begin(), datasets.end(), s.dataset) - datasets.begin());
        groups[k].push_back(&s);
    }
    std::vector<SamplingResult> parts(datasets.size());
    parallel_for(datasets.size(), jobs, [&](std::size_t k) {
        if (!groups[k].empty()) parts[k] = sample_dataset(groups[k], datasets[k], config, depth_of);
    });
    SamplingResult out;
    for (auto& p : parts) {
        out.queries.insert(out.queries.end(), p.queries.begin(), p.queries.end());
        out.shortfalls.insert(out.shortfalls.end(), p.shortfalls.begin(), p.shortfalls.end());
    }
    return out;
}

SamplingResult sample_eval_pixels(const Manifest& manifest, const SamplingConfig& config, std::size_t jobs) {
    return sample_eval_pixels(
        manifest, config, [&](const Sample& s) { return load_depth_file(manifest.resolve(s.depth)); }, jobs);
}

}  // namespace gvk
