#include "gvk/data/synth.hpp"

#include <cmath>
#include <cstdio>

#include "gvk/data/sampling.hpp"

namespace gvk {

std::string to_string(SceneFamily f) {
    switch (f) {
        case SceneFamily::fronto_plane: return "fronto_plane";
        case SceneFamily::slanted_plane: return "slanted_plane";
        case SceneFamily::spheres: return "spheres";
    }
    return "?";
}

SceneFamily parse_scene_family(const std::string& s) {
    if (s == "fronto_plane") return SceneFamily::fronto_plane;
    if (s == "slanted_plane") return SceneFamily::slanted_plane;
    if (s == "spheres") return SceneFamily::spheres;
    throw DataError("unknown scene family '" + s + "'");
}

DepthRange default_range(Domain domain) { return domain == Domain::outdoor ? kOutdoorRange : kIndoorRange; }

namespace {

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(dot(v, v));
    return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 pixel_ray(const CameraIntrinsics& k, double u, double v) {
    return {(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
}

struct Rng {
    std::uint64_t state;
    double uniform(double lo, double hi) {
        const double r = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * r;
    }
};

// Toward-the-light direction, up-left of the camera.
const Vec3 kLight = normalized({-0.4, -0.6, -1.0});

struct Hit {
    double depth = 0.0;
    Vec3 normal{0.0, 0.0, -1.0};  // facing the camera
    double albedo = 1.0;
};

std::uint8_t to_byte(double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); }

std::array<std::uint8_t, 3> shade(const Hit& h) {
    const double lr = std::log(kEncodingRange.max) - std::log(kEncodingRange.min);
    const double r = (std::log(h.depth) - std::log(kEncodingRange.min)) / lr;
    const double g = 0.15 + 0.85 * std::max(0.0, dot(h.normal, kLight));
    return {to_byte(r), to_byte(g), to_byte(h.albedo)};
}

}  // namespace

std::optional<double> ray_plane_depth(const CameraIntrinsics& k, double u, double v, std::array<double, 3> n,
                                      double d) {
    const auto r = pixel_ray(k, u, v);
    const double nr = dot(n, r);
    if (nr == 0.0) return std::nullopt;
    const double z = d / nr;
    if (!(z > 0.0) || !std::isfinite(z)) return std::nullopt;
    return z;
}

std::optional<double> ray_sphere_depth(const CameraIntrinsics& k, double u, double v, const Sphere& s) {
    const auto r = pixel_ray(k, u, v);
    const double rr = dot(r, r);
    const double rc = dot(r, s.center);
    const double disc = rc * rc - rr * (dot(s.center, s.center) - s.radius * s.radius);
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double z = (rc - sq) / rr;
    if (!(z > 0.0)) z = (rc + sq) / rr;
    if (!(z > 0.0)) return std::nullopt;
    return z;
}

SyntheticScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.intrinsics.validate();
    if (spec.width == 0 || spec.height == 0) throw DataError("synthetic scene: empty resolution");
    const auto range = spec.range.value_or(default_range(spec.domain));
    if (!(range.min > 0.0 && range.max > range.min)) throw DataError("synthetic scene: bad depth range");
    Rng rng{seed ^ fnv1a64(spec.id)};
    const auto& k = spec.intrinsics;
    const auto w = spec.width, h = spec.height;

    std::vector<Hit> hits(w * h);
    switch (spec.family) {
        case SceneFamily::fronto_plane: {
            const double z = spec.plane_depth.value_or(rng.uniform(range.min * 1.2, range.max / 1.2));
            const double albedo = rng.uniform(0.2, 1.0);
            for (auto& hit : hits) hit = {z, {0.0, 0.0, -1.0}, albedo};
            break;
        }
        case SceneFamily::slanted_plane: {
            std::array<double, 3> abc;
            if (spec.plane_abc) {
                abc = *spec.plane_abc;
            } else {
                const double z0 = rng.uniform(range.min * 1.5, range.max / 1.5);
                abc = {1.0 / z0, rng.uniform(-1.0, 1.0) / z0, rng.uniform(-1.0, 1.0) / z0};
                // Shrink the slant until every corner stays inside the range.
                for (int it = 0; it < 60; ++it) {
                    bool ok = true;
                    for (double u : {0.0, static_cast<double>(w)}) {
                        for (double v : {0.0, static_cast<double>(h)}) {
                            const auto r = pixel_ray(k, u, v);
                            const double inv = abc[0] + abc[1] * r[0] + abc[2] * r[1];
                            ok = ok && inv >= 1.0 / range.max && inv <= 1.0 / range.min;
                        }
                    }
                    if (ok) break;
                    abc[1] *= 0.5;
                    abc[2] *= 0.5;
                }
            }
            const Vec3 n{abc[1], abc[2], abc[0]};
            const auto facing = normalized({-n[0], -n[1], -n[2]});
            const double albedo = rng.uniform(0.2, 1.0);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const auto z = ray_plane_depth(k, x + 0.5, y + 0.5, n, 1.0);
                    if (!z) throw DataError("synthetic scene: slanted plane does not cover the image");
                    hits[y * w + x] = {*z, facing, albedo};
                }
            }
            break;
        }
        case SceneFamily::spheres: {
            auto spheres = spec.spheres;
            const double background = range.max * 0.9;
            if (spheres.empty()) {
                const int count = 1 + static_cast<int>(draw_below(rng.state, 3));
                const double xmax = static_cast<double>(w) / (2.0 * k.fx);
                const double ymax = static_cast<double>(h) / (2.0 * k.fy);
                // radius <= 0.25 z keeps the near surface above 1.05 * range.min
                const double lo = range.min * 1.4;
                const double hi = std::max(lo, background * 0.6 >= lo ? background * 0.6 : background);
                for (int i = 0; i < count; ++i) {
                    const double z = rng.uniform(lo, hi);
                    spheres.push_back({{rng.uniform(-0.6, 0.6) * xmax * z, rng.uniform(-0.6, 0.6) * ymax * z, z},
                                       z * rng.uniform(0.1, 0.25)});
                }
            }
            std::vector<double> albedo;
            for (std::size_t i = 0; i < spheres.size(); ++i) albedo.push_back(rng.uniform(0.2, 1.0));
            const double bg_albedo = rng.uniform(0.2, 1.0);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    Hit best{background, {0.0, 0.0, -1.0}, bg_albedo};
                    for (std::size_t i = 0; i < spheres.size(); ++i) {
                        const auto z = ray_sphere_depth(k, x + 0.5, y + 0.5, spheres[i]);
                        if (!z || *z >= best.depth) continue;
                        const auto r = pixel_ray(k, x + 0.5, y + 0.5);
                        const auto& c = spheres[i].center;
                        best = {*z, normalized({r[0] * *z - c[0], r[1] * *z - c[1], *z - c[2]}), albedo[i]};
                    }
                    hits[y * w + x] = best;
                }
            }
            break;
        }
    }

    SyntheticScene scene;
    scene.sample.id = spec.id;
    scene.sample.intrinsics = k;
    scene.sample.domain = spec.domain;
    scene.sample.dataset = spec.dataset;
    scene.sample.split = spec.split;
    scene.image = RgbImage(w, h);
    std::vector<float> depth(w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        depth[i] = static_cast<float>(hits[i].depth);
        const auto c = shade(hits[i]);
        std::copy(c.begin(), c.end(), scene.image.rgb.begin() + static_cast<long>(i * 3));
    }
    scene.depth = DepthMap(Tensor({h, w}, std::move(depth)));
    return scene;
}

std::vector<SyntheticScene> generate_synthetic_set(const SynthSetSpec& spec, std::uint64_t seed) {
    if (spec.families.empty()) throw DataError("synthetic set: no scene families");
    std::vector<SyntheticScene> out;
    for (std::size_t i = 0; i < spec.count; ++i) {
        SceneSpec s;
        s.width = spec.width;
        s.height = spec.height;
        s.intrinsics = {spec.focal, spec.focal, spec.width / 2.0, spec.height / 2.0};
        s.domain = spec.domain;
        s.family = spec.families[i % spec.families.size()];
        s.range = spec.range;
        char id[64];
        std::snprintf(id, sizeof id, "%s%04zu", spec.id_prefix.c_str(), i);
        s.id = id;
        s.dataset = spec.dataset;
        s.split = spec.split;
        out.push_back(generate_synthetic_scene(s, seed));
    }
    return out;
}

Manifest write_synthetic_set(std::vector<SyntheticScene>& scenes, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Manifest m;
    m.base_dir = dir;
    for (auto& s : scenes) {
        s.sample.image = s.sample.id + ".png";
        s.sample.depth = s.sample.id + ".gvkd";
        write_png(dir / s.sample.image, s.image);
        write_depth(dir / s.sample.depth, s.depth);
        m.entries.push_back(s.sample);
    }
    m.validate();
    return m;
}

}  // namespace gvk
