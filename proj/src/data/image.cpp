#include "gvk/data/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "gvk/head/model.hpp"
#include "gvk/tensor/ops.hpp"

namespace gvk {

RgbImage::RgbImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill)
    : width(w), height(h), rgb(w * h * 3) {
    for (std::size_t i = 0; i < w * h; ++i)
        for (std::size_t c = 0; c < 3; ++c) rgb[i * 3 + c] = fill[c];
}

std::array<std::uint8_t, 3> RgbImage::pixel(std::size_t x, std::size_t y) const {
    const auto o = (y * width + x) * 3;
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
}

void RgbImage::set_pixel(std::size_t x, std::size_t y, std::array<std::uint8_t, 3> c) {
    const auto o = (y * width + x) * 3;
    rgb[o] = c[0];
    rgb[o + 1] = c[1];
    rgb[o + 2] = c[2];
}

RgbImage resize_bilinear(const RgbImage& image, std::size_t out_w, std::size_t out_h) {
    if (out_w == image.width && out_h == image.height) return image;
    NoGradGuard no_grad;
    std::vector<float> planes(image.rgb.size());
    const auto plane = image.width * image.height;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) planes[c * plane + i] = image.rgb[i * 3 + c];
    auto resized = ops::bilinear_resize(Tensor({3, image.height, image.width}, std::move(planes)), out_h, out_w);
    RgbImage out(out_w, out_h);
    const auto out_plane = out_w * out_h;
    const auto data = resized.data();
    for (std::size_t i = 0; i < out_plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const float v = std::round(data[c * out_plane + i]);
            out.rgb[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
        }
    }
    return out;
}

Tensor to_tensor(const RgbImage& image) { return image_to_tensor(image.rgb, image.height, image.width); }

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw Error("cannot open " + path.string());
    return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    (void)png;
    throw Error(std::string("png: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngRead() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
        if (!png) throw Error("png: cannot create read struct");
        info = png_create_info_struct(png);
    }
    ~PngRead() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWrite() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
        if (!png) throw Error("png: cannot create write struct");
        info = png_create_info_struct(png);
    }
    ~PngWrite() { png_destroy_write_struct(&png, &info); }
};

// Returns rows of `channels` samples at `bit_depth` after normalizing the
// stored format with libpng transforms.
std::vector<std::vector<png_byte>> read_rows(const std::filesystem::path& path, bool want_rgb8, std::size_t& w,
                                             std::size_t& h) {
    auto file = open_file(path, "rb");
    PngRead r;
    png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);
    w = png_get_image_width(r.png, r.info);
    h = png_get_image_height(r.png, r.info);
    const auto color = png_get_color_type(r.png, r.info);
    const auto depth = png_get_bit_depth(r.png, r.info);
    if (want_rgb8) {
        if (depth == 16) png_set_strip_16(r.png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(r.png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
    } else {
        if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
            throw Error("depth PNG must be 16-bit grayscale: " + path.string());
        }
        png_set_swap(r.png);  // host little-endian samples
    }
    png_read_update_info(r.png, r.info);
    const auto rowbytes = png_get_rowbytes(r.png, r.info);
    std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> ptrs(h);
    for (std::size_t y = 0; y < h; ++y) ptrs[y] = rows[y].data();
    png_read_image(r.png, ptrs.data());
    png_read_end(r.png, nullptr);
    return rows;
}

void write_rows(const std::filesystem::path& path, std::size_t w, std::size_t h, int color, int bit_depth,
                std::vector<std::vector<png_byte>>& rows, bool swap16) {
    auto file = open_file(path, "wb");
    PngWrite wr;
    png_init_io(wr.png, file.get());
    png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    if (swap16) png_set_swap(wr.png);
    std::vector<png_bytep> ptrs(h);
    for (std::size_t y = 0; y < h; ++y) ptrs[y] = rows[y].data();
    png_write_image(wr.png, ptrs.data());
    png_write_end(wr.png, nullptr);
}

}  // namespace

RgbImage read_png(const std::filesystem::path& path) {
    std::size_t w = 0, h = 0;
    auto rows = read_rows(path, true, w, h);
    RgbImage img(w, h);
    for (std::size_t y = 0; y < h; ++y) std::copy_n(rows[y].begin(), w * 3, img.rgb.begin() + static_cast<long>(y * w * 3));
    return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    std::vector<std::vector<png_byte>> rows(image.height);
    for (std::size_t y = 0; y < image.height; ++y) {
        rows[y].assign(image.rgb.begin() + static_cast<long>(y * image.width * 3),
                       image.rgb.begin() + static_cast<long>((y + 1) * image.width * 3));
    }
    write_rows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, rows, false);
}

DepthMap read_depth_png_mm(const std::filesystem::path& path) {
    std::size_t w = 0, h = 0;
    auto rows = read_rows(path, false, w, h);
    std::vector<float> values(w * h);
    std::vector<std::uint8_t> mask(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto mm = static_cast<std::uint16_t>(rows[y][2 * x] | (rows[y][2 * x + 1] << 8));
            values[y * w + x] = static_cast<float>(mm) / 1000.0f;
            mask[y * w + x] = mm > 0 ? 1 : 0;
        }
    }
    return DepthMap(Tensor({h, w}, std::move(values)), std::move(mask));
}

void write_depth_png_mm(const std::filesystem::path& path, const DepthMap& depth) {
    const auto h = depth.height(), w = depth.width();
    std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(w * 2));
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::uint16_t mm = 0;
            if (depth.usable(y, x)) {
                mm = static_cast<std::uint16_t>(std::clamp(std::lround(depth.at(y, x) * 1000.0), 1L, 65535L));
            }
            rows[y][2 * x] = static_cast<png_byte>(mm & 0xFF);
            rows[y][2 * x + 1] = static_cast<png_byte>(mm >> 8);
        }
    }
    write_rows(path, w, h, PNG_COLOR_TYPE_GRAY, 16, rows, true);
}

DepthMap load_depth_file(const std::filesystem::path& path) {
    if (path.extension() == ".png") return read_depth_png_mm(path);
    return read_depth(path);
}

}  // namespace gvk
