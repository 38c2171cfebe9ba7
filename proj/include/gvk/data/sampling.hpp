#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gvk/data/manifest.hpp"
#include "gvk/head/depth_map.hpp"

namespace gvk {

struct SamplingConfig {
    std::size_t per_image = 10;
    /// Draws per dataset; smaller datasets are oversampled with replacement.
    /// 0 draws each image exactly once.
    std::size_t images_per_dataset = 1000;
    std::uint64_t seed = 0;
};

struct SamplingShortfall {
    std::string dataset;
    std::string sample_id;
    std::size_t missing = 0;  // queries not produced
    std::string reason;
};

struct SamplingResult {
    std::vector<PixelQuery> queries;
    std::vector<SamplingShortfall> shortfalls;

    std::size_t shortfall_count() const;
};

using DepthProvider = std::function<DepthMap(const Sample&)>;

/// Draws `per_image` distinct valid pixels per drawn image, uniformly. Each
/// dataset uses its own stream seeded from (seed, dataset name), so results
/// do not depend on the order or number of other datasets. Repeated draws of
/// the same image get disjoint pixel sets. Only eval-split entries are used.
SamplingResult sample_eval_pixels(const Manifest& manifest, const SamplingConfig& config,
                                  const DepthProvider& depth_of, std::size_t jobs = 1);
/// Reads depth files through the manifest.
SamplingResult sample_eval_pixels(const Manifest& manifest, const SamplingConfig& config, std::size_t jobs = 1);

std::uint64_t fnv1a64(const std::string& s);
/// Unbiased draw in [0, n) by rejection; portable across standard libraries.
std::uint64_t draw_below(std::uint64_t& state, std::uint64_t n);
/// splitmix64 step.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace gvk
