#pragma once

#include <cmath>
#include <random>

#include "gvk/tensor/tensor.hpp"

namespace gvk::init {

inline Tensor gaussian(Shape shape, float sigma, std::mt19937_64& rng) {
    std::normal_distribution<float> dist(0.0f, sigma);
    std::vector<float> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor(std::move(shape), std::move(data));
}

inline Tensor uniform(Shape shape, float bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> dist(-bound, bound);
    std::vector<float> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor(std::move(shape), std::move(data));
}

/// He-uniform for a layer feeding a ReLU, scaled by `gain`.
inline Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng, float gain = 1.0f) {
    const float bound = gain * std::sqrt(6.0f / static_cast<float>(fan_in));
    return uniform(std::move(shape), bound, rng);
}

}  // namespace gvk::init
