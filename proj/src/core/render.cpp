#include "render.hpp"

#include <algorithm>
#include <cmath>

namespace etdpc::augment {

using corpus::Raster;

std::vector<std::string> wrap_text(const std::string& text, int64_t width) {
    if (width < 1) throw ConfigError("wrap width must be >= 1");
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));

    std::vector<std::string> lines;
    std::string line;
    for (std::string word : words) {
        while (static_cast<int64_t>(word.size()) > width) {
            if (!line.empty()) {
                lines.push_back(line);
                line.clear();
            }
            lines.push_back(word.substr(0, static_cast<size_t>(width)));
            word = word.substr(static_cast<size_t>(width));
        }
        if (word.empty()) continue;
        if (line.empty()) {
            line = word;
        } else if (static_cast<int64_t>(line.size() + 1 + word.size()) <= width) {
            line += ' ';
            line += word;
        } else {
            lines.push_back(line);
            line = word;
        }
    }
    if (!line.empty()) lines.push_back(line);
    return lines;
}

namespace {

constexpr int kGlyphCols = 5;
constexpr int kGlyphRows = 7;

uint64_t family_salt(const std::string& family) {
    return fnv1a64("font-family:" + family);
}

// 5x7 glyph bitmap derived from the character code and family salt. The hash
// is re-rolled until the glyph has enough ink, so every printable character is
// visible and distinct within a family. Space stays empty.
uint64_t glyph_bits(char c, uint64_t salt) {
    if (c == ' ') return 0;
    uint64_t x = salt ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(static_cast<unsigned char>(c)));
    for (int attempt = 0; attempt < 64; ++attempt) {
        const uint64_t bits = Rng::splitmix64(x) & ((1ULL << (kGlyphCols * kGlyphRows)) - 1);
        if (__builtin_popcountll(bits) >= 10) return bits;
    }
    return (1ULL << (kGlyphCols * kGlyphRows)) - 1;
}

}  // namespace

const std::vector<std::string>& builtin_font_families() {
    static const std::vector<std::string> families{"sans", "serif", "mono"};
    return families;
}

void RenderSpec::validate() const {
    if (page_height < 32 || page_width < 32) throw ConfigError("render page size must be at least 32x32");
    if (font_families.empty()) throw ConfigError("render spec needs at least one font family");
    const auto& known = builtin_font_families();
    for (const auto& f : font_families)
        if (std::find(known.begin(), known.end(), f) == known.end())
            throw ConfigError("unknown font family: '" + f + "'");
    if (font_size_min < 1 || font_size_max < font_size_min)
        throw ConfigError("font size range must satisfy 1 <= min <= max");
    if (margin_jitter < 0) throw ConfigError("margin jitter must be >= 0");
    if (line_spacing <= 0.0) throw ConfigError("line spacing must be > 0");
    const int32_t scale = std::max(1, (font_size_max + 4) / 8);
    if (2 * (4 + margin_jitter) + 8 * scale > std::min(page_height, page_width))
        throw ConfigError("margins and font size leave no drawable page area");
}

Raster render_text_image(const std::vector<std::string>& lines, const RenderSpec& spec, Rng& rng,
                         RenderStats* stats) {
    spec.validate();
    constexpr uint8_t kBackground = 255;
    constexpr uint8_t kInk = 16;
    Raster page(spec.page_height, spec.page_width, kBackground);

    const size_t family_idx = static_cast<size_t>(rng.below(spec.font_families.size()));
    const uint64_t salt = family_salt(spec.font_families[family_idx]);
    const int32_t pt = spec.font_size_min +
                       static_cast<int32_t>(rng.below(
                           static_cast<uint64_t>(spec.font_size_max - spec.font_size_min + 1)));
    const int32_t scale = std::max(1, (pt + 4) / 8);
    const int32_t cell_w = (kGlyphCols + 1) * scale;
    const int32_t cell_h = (kGlyphRows + 1) * scale;
    const int32_t advance_y =
        std::max(cell_h, static_cast<int32_t>(std::lround(cell_h * spec.line_spacing)));

    const int32_t margin_x = 4 + static_cast<int32_t>(rng.below(static_cast<uint64_t>(spec.margin_jitter) + 1));
    const int32_t margin_y = 4 + static_cast<int32_t>(rng.below(static_cast<uint64_t>(spec.margin_jitter) + 1));

    int32_t y = margin_y;
    for (size_t li = 0; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        if (y + cell_h > spec.page_height - margin_y) {
            if (stats) stats->truncated_lines += static_cast<int64_t>(lines.size() - li);
            break;
        }
        int32_t x = margin_x;
        for (char c : line) {
            if (x + cell_w > spec.page_width - margin_x) {
                if (stats) ++stats->truncated_lines;
                break;
            }
            const uint64_t bits = glyph_bits(c, salt);
            if (bits) {
                for (int gy = 0; gy < kGlyphRows; ++gy)
                    for (int gx = 0; gx < kGlyphCols; ++gx) {
                        if (!(bits >> (gy * kGlyphCols + gx) & 1ULL)) continue;
                        for (int32_t sy = 0; sy < scale; ++sy)
                            for (int32_t sx = 0; sx < scale; ++sx)
                                page.at(y + gy * scale + sy, x + gx * scale + sx) = kInk;
                    }
            }
            x += cell_w;
        }
        y += advance_y;
    }
    return page;
}

}  // namespace etdpc::augment
