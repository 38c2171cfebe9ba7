#include "gvk/data/normalize.hpp"

#include <cmath>

#include "gvk/tensor/ops.hpp"
#include "gvk/util/parallel.hpp"

namespace gvk {

namespace {

std::size_t scaled_dim(std::size_t dim, double s) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(dim) * s));
}

DepthMap copy_depth(const DepthMap& depth) {
    auto d = depth.values.data();
    return DepthMap(Tensor(depth.values.shape(), std::vector<float>(d.begin(), d.end())), depth.valid);
}

}  // namespace

DepthMap resize_depth_masked(const DepthMap& depth, std::size_t out_h, std::size_t out_w) {
    const auto h = depth.height(), w = depth.width();
    if (out_h == h && out_w == w) return copy_depth(depth);
    if (out_h == 0 || out_w == 0 || h == 0 || w == 0) throw ShapeError("resize_depth_masked: empty size");
    const auto ty = ops::bilinear_axis_taps(h, out_h);
    const auto tx = ops::bilinear_axis_taps(w, out_w);
    std::vector<float> out(out_h * out_w, 0.0f);
    std::vector<std::uint8_t> mask(out_h * out_w, 0);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const std::size_t ys[2] = {ty.lo[oy], ty.hi[oy]};
        const double wy[2] = {1.0 - ty.frac[oy], ty.frac[oy]};
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t xs[2] = {tx.lo[ox], tx.hi[ox]};
            const double wx[2] = {1.0 - tx.frac[ox], tx.frac[ox]};
            double weight = 0.0, acc = 0.0;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    const double wt = wy[a] * wx[b];
                    if (wt == 0.0 || !depth.usable(ys[a], xs[b])) continue;
                    weight += wt;
                    acc += wt * depth.at(ys[a], xs[b]);
                }
            }
            if (weight >= 0.5) {
                out[oy * out_w + ox] = static_cast<float>(acc / weight);
                mask[oy * out_w + ox] = 1;
            }
        }
    }
    return DepthMap(Tensor({out_h, out_w}, std::move(out)), std::move(mask));
}

DepthMap resize_depth_masked(const DepthMap& depth, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ShapeError("resize_depth_masked: scale must be > 0");
    return resize_depth_masked(depth, scaled_dim(depth.height(), s), scaled_dim(depth.width(), s));
}

NormalizedView focal_normalize(const RgbImage& image, const DepthMap& depth, const CameraIntrinsics& intrinsics,
                               double f_c) {
    intrinsics.validate();
    if (!(f_c > 0.0) || !std::isfinite(f_c)) throw DataError("focal_normalize: f_c must be > 0");
    if (!intrinsics.eligible()) {
        throw DataError("focal_normalize: fx=" + std::to_string(intrinsics.fx) + " and fy=" +
                        std::to_string(intrinsics.fy) + " differ by more than 5%");
    }
    if (image.width != depth.width() || image.height != depth.height()) {
        throw DataError("focal_normalize: image and depth sizes differ");
    }
    NormalizedView out;
    out.scale = f_c / intrinsics.fx;
    if (out.scale == 1.0) {
        out.image = image;
        out.depth = copy_depth(depth);
        out.intrinsics = intrinsics;
        return out;
    }
    const auto new_w = scaled_dim(image.width, out.scale);
    const auto new_h = scaled_dim(image.height, out.scale);
    if (new_w < kMinNormalizedDim || new_h < kMinNormalizedDim) {
        throw DataError("focal_normalize: scale " + std::to_string(out.scale) + " yields " + std::to_string(new_w) +
                        "x" + std::to_string(new_h) + ", below the 8 px minimum");
    }
    out.image = resize_bilinear(image, new_w, new_h);
    out.depth = resize_depth_masked(depth, new_h, new_w);
    out.intrinsics = {f_c, f_c * intrinsics.fy / intrinsics.fx, out.scale * intrinsics.cx,
                      out.scale * intrinsics.cy};
    return out;
}

Manifest normalize_manifest(const Manifest& manifest, double f_c, const std::filesystem::path& out_dir,
                            std::size_t jobs) {
    std::filesystem::create_directories(out_dir);
    Manifest out = manifest;
    out.base_dir = out_dir;
    out.canonical_focal = f_c;
    parallel_for(manifest.entries.size(), jobs, [&](std::size_t i) {
        const auto& s = manifest.entries[i];
        try {
            auto view = focal_normalize(read_png(manifest.resolve(s.image)), load_depth_file(manifest.resolve(s.depth)),
                                        s.intrinsics, f_c);
            auto& e = out.entries[i];
            e.image = s.id + ".png";
            e.depth = s.id + ".gvkd";
            e.intrinsics = view.intrinsics;
            write_png(out_dir / e.image, view.image);
            write_depth(out_dir / e.depth, view.depth);
        } catch (const Error& err) {
            throw DataError("sample '" + s.id + "': " + err.what());
        }
    });
    return out;
}

}  // namespace gvk
