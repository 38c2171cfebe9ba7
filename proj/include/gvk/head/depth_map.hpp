#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gvk/tensor/tensor.hpp"

namespace gvk {

/// Metric depth in meters on an H x W grid with a validity mask.
struct DepthMap {
    Tensor values;               // [H, W]
    std::vector<std::uint8_t> valid;  // H * W, 1 = valid

    DepthMap() = default;
    /// All pixels valid.
    explicit DepthMap(Tensor v);
    DepthMap(Tensor v, std::vector<std::uint8_t> mask);

    std::size_t height() const { return values.dim(0); }
    std::size_t width() const { return values.dim(1); }
    float at(std::size_t y, std::size_t x) const { return values.data()[y * width() + x]; }
    bool is_valid(std::size_t y, std::size_t x) const { return valid[y * width() + x] != 0; }
    /// Valid, finite and strictly positive.
    bool usable(std::size_t y, std::size_t x) const;
    std::size_t valid_count() const;

    /// Throws unless every valid value is finite and > 0.
    void check_invariants() const;
};

// GVKDEPTH layout: "GVKDEPTH", u32 H, u32 W, f32 LE row-major values, then
// the validity mask packed LSB-first, ceil(H*W/8) bytes.
std::vector<std::uint8_t> encode_depth(const DepthMap& depth);
DepthMap decode_depth(const std::vector<std::uint8_t>& bytes);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);

}  // namespace gvk
