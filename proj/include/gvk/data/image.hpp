#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gvk/head/depth_map.hpp"

namespace gvk {

/// Interleaved 8-bit RGB image.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

    std::array<std::uint8_t, 3> pixel(std::size_t x, std::size_t y) const;
    void set_pixel(std::size_t x, std::size_t y, std::array<std::uint8_t, 3> c);
    bool operator==(const RgbImage&) const = default;
};

/// Half-pixel-center bilinear resize, rounded back to 8 bits. Same size is
/// an exact copy.
RgbImage resize_bilinear(const RgbImage& image, std::size_t out_w, std::size_t out_h);

Tensor to_tensor(const RgbImage& image);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// 16-bit grayscale PNG in millimeters; 0 marks an invalid pixel.
DepthMap read_depth_png_mm(const std::filesystem::path& path);
void write_depth_png_mm(const std::filesystem::path& path, const DepthMap& depth);

/// Reads GVKDEPTH, or 16-bit millimeter PNG when the extension is ".png".
DepthMap load_depth_file(const std::filesystem::path& path);

}  // namespace gvk
