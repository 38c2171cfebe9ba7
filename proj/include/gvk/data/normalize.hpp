#pragma once

#include <filesystem>

#include "gvk/data/image.hpp"
#include "gvk/data/manifest.hpp"

namespace gvk {

constexpr double kDefaultCanonicalFocal = 1000.0;
constexpr std::size_t kMinNormalizedDim = 8;

/// Bilinear resize that ignores invalid source pixels: weights are
/// renormalized over valid neighbors and an output pixel is valid iff its
/// valid weight sums to at least 0.5.
DepthMap resize_depth_masked(const DepthMap& depth, std::size_t out_h, std::size_t out_w);
/// Output size round(H*s) x round(W*s).
DepthMap resize_depth_masked(const DepthMap& depth, double s);

struct NormalizedView {
    RgbImage image;
    DepthMap depth;
    CameraIntrinsics intrinsics;
    double scale = 1.0;
};

/// Resizes image and depth by s = f_c / fx so the virtual camera has focal
/// length f_c. Depth values stay in meters. s == 1 returns exact copies.
NormalizedView focal_normalize(const RgbImage& image, const DepthMap& depth, const CameraIntrinsics& intrinsics,
                               double f_c = kDefaultCanonicalFocal);

/// Normalizes every entry, writing `<id>.png` and `<id>.gvkd` under out_dir.
/// The returned manifest has base_dir = out_dir and canonical_focal = f_c.
Manifest normalize_manifest(const Manifest& manifest, double f_c, const std::filesystem::path& out_dir,
                            std::size_t jobs);

}  // namespace gvk
