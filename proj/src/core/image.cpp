#include "image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "rng.hpp"

namespace etdpc::corpus {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Raster read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw InternalError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw InternalError("png_create_info_struct failed");
    }
    std::vector<png_bytep> rows;
    Raster out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG file: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    out = Raster(static_cast<int32_t>(h), static_cast<int32_t>(w), 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.px.data() + static_cast<size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::string& path, const Raster& image) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot write PNG file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw InternalError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw InternalError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path);
    }
    png_init_io(png, fp.get());
    // Fixed settings keep outputs byte-identical across runs.
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int32_t y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.px.data() + static_cast<size_t>(y) * image.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Raster resize_bilinear(const Raster& in, int32_t out_h, int32_t out_w) {
    if (out_h <= 0 || out_w <= 0) throw ConfigError("resize target must be positive");
    if (in.height == out_h && in.width == out_w) return in;
    Raster out(out_h, out_w, 0);
    const double sy = static_cast<double>(in.height) / out_h;
    const double sx = static_cast<double>(in.width) / out_w;
    for (int32_t y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int32_t y0 = static_cast<int32_t>(std::floor(fy));
        const double wy = fy - y0;
        int32_t y1 = y0 + 1;
        y0 = std::clamp(y0, 0, in.height - 1);
        y1 = std::clamp(y1, 0, in.height - 1);
        for (int32_t x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int32_t x0 = static_cast<int32_t>(std::floor(fx));
            const double wx = fx - x0;
            int32_t x1 = x0 + 1;
            x0 = std::clamp(x0, 0, in.width - 1);
            x1 = std::clamp(x1, 0, in.width - 1);
            const double v = (1 - wy) * ((1 - wx) * in.at(y0, x0) + wx * in.at(y0, x1)) +
                             wy * ((1 - wx) * in.at(y1, x0) + wx * in.at(y1, x1));
            out.at(y, x) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

uint64_t raster_hash(const Raster& r) {
    uint64_t h = fnv1a64_bytes(&r.height, sizeof(r.height));
    h = fnv1a64_bytes(&r.width, sizeof(r.width), h);
    return fnv1a64_bytes(r.px.data(), r.px.size(), h);
}

}  // namespace etdpc::corpus
