#include "gvk/eval/marker.hpp"

#include <cmath>
#include <vector>

namespace gvk {

std::string to_string(ArrowDirection d) {
    switch (d) {
        case ArrowDirection::down_left: return "down-left";
        case ArrowDirection::down_right: return "down-right";
        case ArrowDirection::up_left: return "up-left";
        case ArrowDirection::up_right: return "up-right";
    }
    return "?";
}

std::string marker_prompt() {
    return "A red arrow points at one pixel of this image. How far is the surface at the arrow tip from the "
           "camera, measured along the optical axis? Answer with a single number in meters.";
}

namespace {

struct P {
    double x, y;
};

double segment_distance(P p, P a, P b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
    return std::sqrt(ex * ex + ey * ey);
}

P unit(ArrowDirection d) {
    const double k = 1.0 / std::sqrt(2.0);
    switch (d) {
        case ArrowDirection::down_left: return {-k, k};
        case ArrowDirection::down_right: return {k, k};
        case ArrowDirection::up_left: return {-k, -k};
        case ArrowDirection::up_right: return {k, -k};
    }
    return {0, 0};
}

// Pixels covered by the arrow, which may fall outside the image. Nothing lies
// ahead of the tip along the arrow direction, so the tip is the extreme pixel.
std::vector<std::pair<long, long>> rasterize(long u, long v, ArrowDirection d, const MarkerStyle& style) {
    const P dir = unit(d);
    const P tip{static_cast<double>(u), static_cast<double>(v)};
    const double len = style.length_px;
    const P tail{tip.x - len * dir.x, tip.y - len * dir.y};
    const double wing = 0.35 * len;
    const double c = std::cos(M_PI / 6), s = std::sin(M_PI / 6);
    const P back{-dir.x, -dir.y};
    const P w1{tip.x + wing * (c * back.x - s * back.y), tip.y + wing * (s * back.x + c * back.y)};
    const P w2{tip.x + wing * (c * back.x + s * back.y), tip.y + wing * (-s * back.x + c * back.y)};
    const double half = style.stroke_px / 2.0;

    const long reach = static_cast<long>(std::ceil(len + half)) + 1;
    std::vector<std::pair<long, long>> out;
    for (long y = v - reach; y <= v + reach; ++y) {
        for (long x = u - reach; x <= u + reach; ++x) {
            const P p{static_cast<double>(x), static_cast<double>(y)};
            const bool is_tip = x == u && y == v;
            const double ahead = (p.x - tip.x) * dir.x + (p.y - tip.y) * dir.y;
            if (!is_tip && ahead >= 0.0) continue;
            const double dist = std::min({segment_distance(p, tail, tip), segment_distance(p, tip, w1),
                                          segment_distance(p, tip, w2)});
            if (is_tip || dist <= half) out.emplace_back(x, y);
        }
    }
    return out;
}

}  // namespace

MarkerProbe render_marker(const RgbImage& image, const PixelQuery& query, const MarkerStyle& style) {
    if (query.u >= image.width || query.v >= image.height) {
        throw DataError("render_marker: query (" + std::to_string(query.u) + "," + std::to_string(query.v) +
                        ") outside the " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                        " image");
    }
    if (style.length_px <= 0 || style.stroke_px <= 0 || style.max_edge <= 0) {
        throw Error("render_marker: marker sizes must be positive");
    }
    MarkerProbe probe;
    probe.prompt = marker_prompt();
    const auto longest = std::max(image.width, image.height);
    const auto max_edge = static_cast<std::size_t>(style.max_edge);
    if (longest > max_edge) {
        probe.scale = static_cast<double>(max_edge) / static_cast<double>(longest);
        const auto w = image.width == longest ? max_edge
                                               : static_cast<std::size_t>(std::llround(image.width * probe.scale));
        const auto h = image.height == longest ? max_edge
                                                : static_cast<std::size_t>(std::llround(image.height * probe.scale));
        probe.image = resize_bilinear(image, std::max<std::size_t>(w, 1), std::max<std::size_t>(h, 1));
        probe.u = std::min(static_cast<std::size_t>(std::floor((query.u + 0.5) * probe.scale)), probe.image.width - 1);
        probe.v = std::min(static_cast<std::size_t>(std::floor((query.v + 0.5) * probe.scale)), probe.image.height - 1);
    } else {
        probe.image = image;
        probe.u = query.u;
        probe.v = query.v;
    }

    const long w = static_cast<long>(probe.image.width), h = static_cast<long>(probe.image.height);
    auto inside = [&](long x, long y) { return x >= 0 && y >= 0 && x < w && y < h; };
    constexpr ArrowDirection order[] = {ArrowDirection::down_left, ArrowDirection::down_right,
                                        ArrowDirection::up_left, ArrowDirection::up_right};
    // First pass: whole arrow inside. Second: the shaft end inside, stroke clipped at the border.
    for (int pass = 0; pass < 2; ++pass) {
        for (auto d : order) {
            const auto pixels = rasterize(static_cast<long>(probe.u), static_cast<long>(probe.v), d, style);
            bool fits = true;
            if (pass == 0) {
                for (const auto& [x, y] : pixels) fits = fits && inside(x, y);
            } else {
                const P dir = unit(d);
                const double back = style.length_px;
                fits = inside(std::lround(static_cast<double>(probe.u) - back * dir.x),
                              std::lround(static_cast<double>(probe.v) - back * dir.y));
            }
            if (!fits) continue;
            for (const auto& [x, y] : pixels) {
                if (inside(x, y)) probe.image.set_pixel(static_cast<std::size_t>(x), static_cast<std::size_t>(y), kMarkerRed);
            }
            probe.direction = d;
            return probe;
        }
    }
    throw DataError("render_marker: no arrow placement fits a " + std::to_string(w) + "x" + std::to_string(h) +
                    " image at (" + std::to_string(probe.u) + "," + std::to_string(probe.v) + ")");
}

}  // namespace gvk
