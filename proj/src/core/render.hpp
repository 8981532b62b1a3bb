#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"
#include "rng.hpp"

namespace etdpc::augment {

// Greedy word wrap. Lines never exceed `width` characters; a single word
// longer than the width is split into width-sized chunks. Whitespace is
// normalized to single spaces.
std::vector<std::string> wrap_text(const std::string& text, int64_t width = 90);

// Page rendering uses a built-in procedural 5x7 bitmap font (three families,
// integer pixel scaling), so no font files are required. Family and size are
// drawn per page; margins jitter by a seeded offset.
struct RenderSpec {
    int32_t page_height = 640;
    int32_t page_width = 640;
    std::vector<std::string> font_families = {"sans", "serif", "mono"};
    int32_t font_size_min = 8;   // points; pixel scale = max(1, round(pt/8))
    int32_t font_size_max = 14;
    int32_t margin_jitter = 6;   // pixels
    double line_spacing = 1.15;
    uint64_t seed = 0;

    void validate() const;  // rejects unknown fonts and jitter that leaves no page area
};

struct RenderStats {
    int64_t truncated_lines = 0;  // text that did not fit the page
};

corpus::Raster render_text_image(const std::vector<std::string>& lines, const RenderSpec& spec,
                                 Rng& rng, RenderStats* stats = nullptr);

const std::vector<std::string>& builtin_font_families();

}  // namespace etdpc::augment
