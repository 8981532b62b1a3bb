#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace etdpc::corpus {

// 8-bit grayscale raster, row-major. The canonical page image form.
struct Raster {
    int32_t height = 0;
    int32_t width = 0;
    std::vector<uint8_t> px;

    Raster() = default;
    Raster(int32_t h, int32_t w, uint8_t fill = 255)
        : height(h), width(w), px(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {
        if (h <= 0 || w <= 0) throw ConfigError("raster dimensions must be positive");
    }

    uint8_t& at(int32_t y, int32_t x) { return px[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int32_t y, int32_t x) const { return px[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return px.size(); }
    bool operator==(const Raster& o) const = default;
};

// PNG I/O for 8-bit grayscale pages (other PNG color types are converted on
// read; writes are always grayscale-8).
Raster read_png(const std::string& path);
void write_png(const std::string& path, const Raster& image);

// Deterministic bilinear resize.
Raster resize_bilinear(const Raster& in, int32_t out_h, int32_t out_w);

uint64_t raster_hash(const Raster& r);

}  // namespace etdpc::corpus
