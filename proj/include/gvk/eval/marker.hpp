#pragma once

#include <array>
#include <string>

#include "gvk/data/image.hpp"
#include "gvk/data/manifest.hpp"

namespace gvk {

inline constexpr std::array<std::uint8_t, 3> kMarkerRed{255, 0, 0};

/// Direction the arrow points, i.e. from tail to tip.
enum class ArrowDirection { down_left, down_right, up_left, up_right };
std::string to_string(ArrowDirection d);

struct MarkerStyle {
    int length_px = 20;
    int stroke_px = 3;
    int max_edge = 1024;
};

struct MarkerProbe {
    RgbImage image;
    std::size_t u = 0, v = 0;  // query pixel in the rendered image
    double scale = 1.0;
    ArrowDirection direction = ArrowDirection::down_left;
    std::string prompt;
};

/// Question sent alongside a probe image.
std::string marker_prompt();

/// Downscales images whose longest edge exceeds max_edge (query remapped by
/// floor((u + 0.5) * s)), then draws a pure-red arrow whose tip is the query
/// pixel. Down-left is preferred; near borders the first direction whose
/// arrow fits is used, else the first whose tail is inside the image (stroke
/// clipped at the border). Throws if neither exists.
MarkerProbe render_marker(const RgbImage& image, const PixelQuery& query, const MarkerStyle& style = {});

}  // namespace gvk
