#include "gvk/head/depth_map.hpp"

#include <cmath>

#include "gvk/tensor/checkpoint.hpp"

namespace gvk {

DepthMap::DepthMap(Tensor v) : values(std::move(v)), valid(values.size(), 1) {
    if (values.rank() != 2) throw ShapeError("depth map must be [H,W], got " + shape_str(values.shape()));
}

DepthMap::DepthMap(Tensor v, std::vector<std::uint8_t> mask) : values(std::move(v)), valid(std::move(mask)) {
    if (values.rank() != 2) throw ShapeError("depth map must be [H,W], got " + shape_str(values.shape()));
    if (valid.size() != values.size()) throw ShapeError("depth mask size does not match values");
}

bool DepthMap::usable(std::size_t y, std::size_t x) const {
    const float v = at(y, x);
    return is_valid(y, x) && std::isfinite(v) && v > 0.0f;
}

std::size_t DepthMap::valid_count() const {
    std::size_t n = 0;
    for (auto m : valid) n += m ? 1 : 0;
    return n;
}

void DepthMap::check_invariants() const {
    for (std::size_t i = 0; i < valid.size(); ++i) {
        const float v = values.data()[i];
        if (valid[i] && !(std::isfinite(v) && v > 0.0f)) {
            throw Error("depth map: valid pixel " + std::to_string(i) + " has non-positive or non-finite value");
        }
    }
}

std::vector<std::uint8_t> encode_depth(const DepthMap& depth) {
    io::ByteWriter w;
    w.str("GVKDEPTH");
    w.u32(static_cast<std::uint32_t>(depth.height()));
    w.u32(static_cast<std::uint32_t>(depth.width()));
    for (float v : depth.values.data()) w.f32(v);
    std::vector<std::uint8_t> packed((depth.valid.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < depth.valid.size(); ++i)
        if (depth.valid[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    w.bytes(packed.data(), packed.size());
    return std::move(w.buffer());
}

DepthMap decode_depth(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("GVKDEPTH");
    const std::size_t h = r.u32();
    const std::size_t w = r.u32();
    std::vector<float> values(h * w);
    r.f32_array(values.data(), values.size());
    const std::size_t mask_bytes = (h * w + 7) / 8;
    if (r.remaining() != mask_bytes) {
        throw FormatError("validity mask has " + std::to_string(r.remaining()) + " bytes, expected " +
                              std::to_string(mask_bytes),
                          r.offset());
    }
    std::vector<std::uint8_t> mask(h * w);
    const auto packed = r.str(mask_bytes);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
    }
    return DepthMap(Tensor({h, w}, std::move(values)), std::move(mask));
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) { io::write_file(path, encode_depth(depth)); }

DepthMap read_depth(const std::filesystem::path& path) { return decode_depth(io::read_file(path)); }

}  // namespace gvk
