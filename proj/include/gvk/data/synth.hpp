#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gvk/data/image.hpp"
#include "gvk/data/manifest.hpp"

namespace gvk {

enum class SceneFamily { fronto_plane, slanted_plane, spheres };

std::string to_string(SceneFamily f);
SceneFamily parse_scene_family(const std::string& s);

struct DepthRange {
    double min = 0.3, max = 10.0;
};
constexpr DepthRange kIndoorRange{0.3, 10.0};
constexpr DepthRange kOutdoorRange{1.0, 80.0};
/// Fixed log-depth span encoded into the red channel of every scene.
constexpr DepthRange kEncodingRange{0.25, 100.0};

DepthRange default_range(Domain domain);

struct Sphere {
    std::array<double, 3> center;  // camera frame, meters, +z forward
    double radius = 0.0;
};

struct SceneSpec {
    std::size_t width = 64, height = 64;
    CameraIntrinsics intrinsics{1000.0, 1000.0, 32.0, 32.0};
    Domain domain = Domain::indoor;
    SceneFamily family = SceneFamily::fronto_plane;
    /// Defaults to the domain's range.
    std::optional<DepthRange> range;
    /// Fronto-parallel depth; drawn from the range when absent.
    std::optional<double> plane_depth;
    /// Slanted plane as inverse depth a + b*x + c*y over normalized image
    /// coordinates x = (u + 0.5 - cx)/fx, y = (v + 0.5 - cy)/fy, i.e. the
    /// plane {X : (b, c, a) . X = 1}. Drawn when absent.
    std::optional<std::array<double, 3>> plane_abc;
    /// Drawn (1 to 3 spheres) when empty. A background plane sits at the far
    /// end of the range.
    std::vector<Sphere> spheres;
    std::string id = "scene";
    std::string dataset = "synthetic";
    Split split = Split::train;
};

struct SyntheticScene {
    Sample sample;  // image/depth paths empty until written
    RgbImage image;
    DepthMap depth;
};

/// Analytic scene: exact depth per pixel center and an RGB rendering whose
/// red channel carries log-depth, green a Lambertian shading of the surface
/// normal and blue a per-surface albedo.
SyntheticScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed);

/// Depth along the optical axis where the ray through continuous image point
/// (u, v) meets the plane {X : n . X = d}; nullopt when parallel or behind the
/// camera. Pixel (i, j) has its center at (i + 0.5, j + 0.5).
std::optional<double> ray_plane_depth(const CameraIntrinsics& k, double u, double v, std::array<double, 3> n,
                                      double d);
/// Nearest ray/sphere intersection depth, nullopt on miss.
std::optional<double> ray_sphere_depth(const CameraIntrinsics& k, double u, double v, const Sphere& s);

struct SynthSetSpec {
    std::size_t count = 32;
    std::size_t width = 64, height = 64;
    double focal = 1000.0;
    Domain domain = Domain::indoor;
    std::string dataset = "synthetic";
    Split split = Split::train;
    /// Families cycle in this order across scenes.
    std::vector<SceneFamily> families{SceneFamily::fronto_plane, SceneFamily::slanted_plane, SceneFamily::spheres};
    std::optional<DepthRange> range;
    std::string id_prefix = "syn";
};

std::vector<SyntheticScene> generate_synthetic_set(const SynthSetSpec& spec, std::uint64_t seed);

/// Writes `<id>.png` / `<id>.gvkd` for every scene into dir and returns a
/// manifest whose base_dir is dir.
Manifest write_synthetic_set(std::vector<SyntheticScene>& scenes, const std::filesystem::path& dir);

}  // namespace gvk
