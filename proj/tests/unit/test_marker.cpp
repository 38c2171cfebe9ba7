#include "gvk/eval/marker.hpp"

#include <optional>
#include <set>

#include "marker_oracle.hpp"
#include "test_util.hpp"

namespace gvk {
namespace {

using test::oracle_arrow;

constexpr std::array<std::uint8_t, 3> kGray{90, 120, 150};

PixelQuery at(std::size_t u, std::size_t v) {
    PixelQuery q;
    q.u = u;
    q.v = v;
    q.gt_depth = 1.0;
    return q;
}

std::set<std::pair<long, long>> changed(const RgbImage& before, const RgbImage& after) {
    std::set<std::pair<long, long>> out;
    for (std::size_t y = 0; y < after.height; ++y)
        for (std::size_t x = 0; x < after.width; ++x)
            if (after.pixel(x, y) != before.pixel(x, y)) out.emplace(long(x), long(y));
    return out;
}

TEST(Marker, PixelExactDownLeftArrow) {
    const RgbImage img(200, 150, kGray);
    const auto probe = render_marker(img, at(80, 70));
    EXPECT_EQ(probe.direction, ArrowDirection::down_left);
    EXPECT_EQ(probe.scale, 1.0);
    EXPECT_EQ(probe.u, 80u);
    EXPECT_EQ(probe.v, 70u);
    EXPECT_EQ(probe.image.pixel(80, 70), kMarkerRed);
    const auto red = changed(img, probe.image);
    EXPECT_EQ(red, oracle_arrow(80, 70, -1.0, 1.0));
    for (const auto& [x, y] : red) ASSERT_EQ(probe.image.pixel(x, y), kMarkerRed);
    // shaft reaches 20 px back along the diagonal, tip is the extreme pixel
    const long reach = std::lround(20.0 / std::sqrt(2.0));
    EXPECT_TRUE(red.count({80 + reach, 70 - reach}));
    EXPECT_FALSE(red.count({80 + reach + 2, 70 - reach - 2}));
    for (const auto& [x, y] : red) {
        if (x == 80 && y == 70) continue;
        EXPECT_LT(-(x - 80) + (y - 70), 0) << x << "," << y;
    }
    EXPECT_FALSE(probe.prompt.empty());
    EXPECT_NE(probe.prompt.find("red arrow"), std::string::npos);
}

TEST(Marker, LargeImageDownscaledToMaxEdge) {
    RgbImage img(2048, 1536);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            img.set_pixel(x, y, {static_cast<std::uint8_t>(x / 8), static_cast<std::uint8_t>(y / 8), 200});
    const auto probe = render_marker(img, at(1001, 601));
    EXPECT_EQ(probe.image.width, 1024u);
    EXPECT_EQ(probe.image.height, 768u);
    EXPECT_EQ(probe.scale, 0.5);
    EXPECT_EQ(probe.u, 500u);
    EXPECT_EQ(probe.v, 300u);
    const auto base = resize_bilinear(img, 1024, 768);
    const auto arrow = oracle_arrow(500, 300, -1.0, 1.0);
    for (std::size_t y = 0; y < 768; ++y) {
        for (std::size_t x = 0; x < 1024; ++x) {
            const auto expect = arrow.count({long(x), long(y)}) ? kMarkerRed : base.pixel(x, y);
            ASSERT_EQ(probe.image.pixel(x, y), expect) << x << "," << y;
        }
    }
}

TEST(Marker, SmallImageIsNotResized) {
    const RgbImage img(640, 480, kGray);
    const auto probe = render_marker(img, at(320, 240));
    EXPECT_EQ(probe.image.width, 640u);
    EXPECT_EQ(probe.image.height, 480u);
    EXPECT_EQ(probe.scale, 1.0);
    const RgbImage edge(1024, 700, kGray);
    EXPECT_EQ(render_marker(edge, at(500, 300)).image.width, 1024u);
}

std::pair<double, double> unit_dir(ArrowDirection d) {
    switch (d) {
        case ArrowDirection::down_left: return {-1, 1};
        case ArrowDirection::down_right: return {1, 1};
        case ArrowDirection::up_left: return {-1, -1};
        case ArrowDirection::up_right: return {1, -1};
    }
    return {0, 0};
}

std::set<std::pair<long, long>> clip(const std::set<std::pair<long, long>>& px, long w, long h) {
    std::set<std::pair<long, long>> out;
    for (const auto& p : px)
        if (p.first >= 0 && p.second >= 0 && p.first < w && p.second < h) out.insert(p);
    return out;
}

TEST(Marker, DirectionFlipsNearBorders) {
    const RgbImage img(64, 64, kGray);
    struct Case {
        std::size_t u, v;
        ArrowDirection d;
    };
    // the arrow body lies behind the tip, so it must point toward the border
    const Case cases[] = {
        {32, 32, ArrowDirection::down_left},  {0, 0, ArrowDirection::up_left},
        {63, 0, ArrowDirection::up_right},    {0, 63, ArrowDirection::down_left},
        {63, 63, ArrowDirection::down_right}, {60, 5, ArrowDirection::up_right},
        {40, 5, ArrowDirection::up_left},
    };
    for (const auto& c : cases) {
        const auto probe = render_marker(img, at(c.u, c.v));
        EXPECT_EQ(probe.direction, c.d) << c.u << "," << c.v << " got " << to_string(probe.direction);
        const auto [dx, dy] = unit_dir(c.d);
        EXPECT_EQ(changed(img, probe.image), clip(oracle_arrow(long(c.u), long(c.v), dx, dy), 64, 64))
            << c.u << "," << c.v;
    }
}

// Selection rule: first direction (down-left, down-right, up-left, up-right)
// whose whole arrow is inside; otherwise the first whose shaft end is inside.
TEST(Marker, EveryPlacementMatchesSelectionOracle) {
    const long w = 40, h = 36;
    const RgbImage img(w, h, kGray);
    constexpr ArrowDirection order[] = {ArrowDirection::down_left, ArrowDirection::down_right,
                                        ArrowDirection::up_left, ArrowDirection::up_right};
    std::size_t clipped = 0;
    for (long v = 0; v < h; ++v) {
        for (long u = 0; u < w; ++u) {
            std::optional<ArrowDirection> expect;
            for (auto d : order) {
                const auto [dx, dy] = unit_dir(d);
                const auto full = oracle_arrow(u, v, dx, dy);
                if (!expect && clip(full, w, h).size() == full.size()) expect = d;
            }
            bool is_clipped = false;
            if (!expect) {
                for (auto d : order) {
                    const auto [dx, dy] = unit_dir(d);
                    const long tx = std::lround(u - 20.0 * dx / std::sqrt(2.0));
                    const long ty = std::lround(v - 20.0 * dy / std::sqrt(2.0));
                    if (!expect && tx >= 0 && ty >= 0 && tx < w && ty < h) expect = d;
                }
                is_clipped = true;
            }
            ASSERT_TRUE(expect) << u << "," << v;
            const auto probe = render_marker(img, at(std::size_t(u), std::size_t(v)));
            ASSERT_EQ(probe.direction, *expect) << u << "," << v;
            ASSERT_EQ(probe.image.pixel(std::size_t(u), std::size_t(v)), kMarkerRed);
            const auto [dx, dy] = unit_dir(*expect);
            ASSERT_EQ(changed(img, probe.image), clip(oracle_arrow(u, v, dx, dy), w, h)) << u << "," << v;
            clipped += is_clipped ? 1 : 0;
        }
    }
    EXPECT_GT(clipped, 0u);
}

TEST(Marker, ImpossiblePlacementThrows) {
    const RgbImage img(12, 12, kGray);
    EXPECT_THROW(render_marker(img, at(6, 6)), DataError);
    EXPECT_THROW(render_marker(RgbImage(64, 64), at(64, 0)), DataError);
    MarkerStyle bad;
    bad.length_px = 0;
    EXPECT_THROW(render_marker(RgbImage(64, 64), at(3, 3), bad), Error);
}

}  // namespace
}  // namespace gvk
