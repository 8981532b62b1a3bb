#include "synthetic.hpp"

#include <algorithm>

#include "noise.hpp"
#include "rng.hpp"

namespace etdpc::corpus {

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words{
        "the", "of", "and", "in", "to", "a",  "is",   "for", "with", "on",  "as",  "by",
        "this", "that", "from", "it", "be", "are", "was", "were", "at",  "or",  "an", "not"};
    return words;
}

const std::vector<std::string>& keywords_for(int label) {
    static const std::vector<std::vector<std::string>> table{
        /* Chapters */ {"chapter", "section", "method", "results", "discussion", "analysis", "experiment"},
        /* Appendices */ {"appendix", "supplement", "derivation", "listing", "addendum", "annex", "extra"},
        /* ReferenceList */ {"references", "bibliography", "journal", "vol", "pp", "eds", "press"},
        /* TableofContent */ {"contents", "overview", "outline", "heading", "numbered", "parts", "toc"},
        /* TitlePage */ {"title", "submitted", "fulfillment", "requirements", "degree", "university", "candidate"},
        /* Abstract */ {"abstract", "summary", "study", "investigates", "presents", "findings", "concise"},
        /* ListofFigures */ {"figures", "illustration", "diagram", "plot", "graph", "chart", "caption"},
        /* Acknowledgment */ {"acknowledgment", "thanks", "grateful", "advisor", "support", "committee", "mentor"},
        /* ListofTables */ {"tables", "tabulated", "column", "row", "entries", "listing", "values"},
        /* CurriculumVitae */ {"vitae", "curriculum", "education", "employment", "publications", "awards", "born"},
        /* Dedication */ {"dedication", "dedicated", "memory", "parents", "love", "inspiration", "devoted"},
        /* ChapterAbstract */ {"synopsis", "chapter", "preview", "briefly", "summarizes", "scope", "aims"},
        /* Other */ {"misc", "blank", "note", "errata", "epigraph", "quotation", "interlude"}};
    return table.at(static_cast<size_t>(label));
}

void draw_hbar(Raster& img, int32_t y0, int32_t thickness, uint8_t ink) {
    for (int32_t y = y0; y < std::min(img.height, y0 + thickness); ++y)
        for (int32_t x = 2; x < img.width - 2; ++x) img.at(y, x) = ink;
}

void draw_vbar(Raster& img, int32_t x0, int32_t thickness, uint8_t ink) {
    for (int32_t x = x0; x < std::min(img.width, x0 + thickness); ++x)
        for (int32_t y = 2; y < img.height - 2; ++y) img.at(y, x) = ink;
}

// Category-specific geometric pattern: a distinct (vertical, horizontal) bar
// count per label, plus a frame. Counts are what a small convnet separates
// most easily after global pooling.
Raster pattern_raster(int label, int32_t height, int32_t width) {
    Raster img(height, width, 255);
    const int32_t nv = 2 + label % 5;
    const int32_t nh = 1 + label / 5;
    const int32_t thickness = std::max(2, height / 32);
    for (int32_t i = 0; i < nv; ++i) {
        const int32_t x = (width * (i + 1)) / (nv + 1);
        draw_vbar(img, x, thickness, 30);
    }
    for (int32_t i = 0; i < nh; ++i) {
        const int32_t y = (height * (i + 1)) / (nh + 1);
        draw_hbar(img, y, thickness, 30);
    }
    for (int32_t x = 0; x < width; ++x) img.at(0, x) = img.at(height - 1, x) = 30;
    for (int32_t y = 0; y < height; ++y) img.at(y, 0) = img.at(y, width - 1) = 30;
    return img;
}

}  // namespace

Raster text_only_template(int32_t height, int32_t width) {
    // Uniform paragraph-like stripes; identical for every TEXT_ONLY page.
    Raster img(height, width, 255);
    const int32_t row_h = std::max(2, height / 16);
    for (int32_t y = row_h; y + row_h / 2 < height - row_h; y += 2 * row_h)
        for (int32_t yy = y; yy < y + row_h / 2; ++yy)
            for (int32_t x = width / 10; x < width - width / 10; ++x) img.at(yy, x) = 170;
    return img;
}

std::map<std::string, CueMode> default_cue_modes() {
    std::map<std::string, CueMode> modes;
    modes["Chapters"] = CueMode::kBoth;
    for (const char* name : {"TitlePage", "Abstract", "ListofFigures", "Acknowledgment",
                             "ListofTables", "Dedication"})
        modes[name] = CueMode::kTextOnly;
    for (const char* name : {"Appendices", "ReferenceList", "TableofContent", "CurriculumVitae",
                             "ChapterAbstract", "Other"})
        modes[name] = CueMode::kVisualOnly;
    return modes;
}

void SyntheticCorpusSpec::validate() const {
    if (pages_per_category < 1) throw ConfigError("pages_per_category must be >= 1");
    if (image_height < 32 || image_width < 32)
        throw ConfigError("synthetic image size must be at least 32x32");
    if (noise_gaussian_sigma < 0.0) throw ConfigError("synthetic gaussian sigma must be >= 0");
    if (noise_salt_pepper_p < 0.0 || noise_salt_pepper_p > 1.0)
        throw ConfigError("synthetic salt-pepper probability must lie in [0,1]");
    const Taxonomy& tax = Taxonomy::standard();
    for (const auto& [name, _] : cue_modes) tax.index_of(name);
}

std::vector<PageRecord> generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
    spec.validate();
    const Taxonomy& tax = Taxonomy::standard();
    std::map<std::string, CueMode> modes = default_cue_modes();
    for (const auto& [name, mode] : spec.cue_modes) modes[name] = mode;

    const Raster shared_template = text_only_template(spec.image_height, spec.image_width);
    std::vector<PageRecord> out;
    out.reserve(static_cast<size_t>(spec.pages_per_category) * Taxonomy::kCategoryCount);

    for (int label = 0; label < Taxonomy::kCategoryCount; ++label) {
        const std::string& name = tax.label(label);
        const CueMode mode = modes.at(name);
        const std::vector<std::string>& keywords = keywords_for(label);
        const std::vector<std::string>& filler = filler_words();

        for (int64_t page = 0; page < spec.pages_per_category; ++page) {
            Rng rng(derive_seed(spec.seed, "synthetic:" + name, static_cast<uint64_t>(page)));

            // Text: keyword-bearing for TEXT_ONLY/BOTH, pure filler otherwise.
            const int64_t line_count = 6 + static_cast<int64_t>(rng.below(5));
            std::vector<std::string> lines;
            for (int64_t li = 0; li < line_count; ++li) {
                std::string line;
                const int64_t word_count = 5 + static_cast<int64_t>(rng.below(4));
                for (int64_t wi = 0; wi < word_count; ++wi) {
                    const bool use_keyword =
                        mode != CueMode::kVisualOnly && rng.uniform() < 0.4;
                    const std::string& w =
                        use_keyword ? keywords[static_cast<size_t>(rng.below(keywords.size()))]
                                    : filler[static_cast<size_t>(rng.below(filler.size()))];
                    if (!line.empty()) line += ' ';
                    line += w;
                }
                lines.push_back(std::move(line));
            }

            // Image: shared template (TEXT_ONLY) or category pattern.
            Raster img = mode == CueMode::kTextOnly
                             ? shared_template
                             : pattern_raster(label, spec.image_height, spec.image_width);
            if (spec.noise_gaussian_sigma > 0.0 || spec.noise_salt_pepper_p > 0.0) {
                augment::NoiseParams np;
                np.gaussian_sigma_min = np.gaussian_sigma_max = spec.noise_gaussian_sigma;
                np.salt_pepper_p = spec.noise_salt_pepper_p;
                np.blur_sigma = 0.0;
                np.contrast_alpha = 1.0;
                img = augment::additive_gaussian_noise(img, np, rng);
                img = augment::salt_and_pepper(img, np, rng);
            }

            PageRecord rec;
            rec.etd_id = name + "-etd" + std::to_string(page / 10);
            rec.page_number = static_cast<int32_t>(page % 10 + 1);
            rec.image = std::move(img);
            rec.label = label;
            rec.provenance = Provenance::kOriginal;

            // One LINE block per text line, stacked top to bottom.
            for (size_t li = 0; li < lines.size(); ++li) {
                OcrBlock blk;
                blk.id = rec.etd_id + "-p" + std::to_string(rec.page_number) + "-l" + std::to_string(li);
                blk.block_type = BlockType::kLine;
                blk.text = lines[li];
                blk.confidence = 0.90 + 0.09 * rng.uniform();
                blk.left = 0.08;
                blk.width = 0.84;
                blk.top = 0.05 + 0.075 * static_cast<double>(li);
                blk.height = 0.06;
                if (!rec.full_text.empty()) rec.full_text += '\n';
                rec.full_text += blk.text;
                rec.blocks.push_back(std::move(blk));
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

const char* cue_mode_name(CueMode m) {
    switch (m) {
        case CueMode::kVisualOnly: return "visual_only";
        case CueMode::kTextOnly: return "text_only";
        case CueMode::kBoth: return "both";
    }
    return "both";
}

CueMode cue_mode_from(const std::string& name) {
    if (name == "visual_only" || name == "VISUAL_ONLY") return CueMode::kVisualOnly;
    if (name == "text_only" || name == "TEXT_ONLY") return CueMode::kTextOnly;
    if (name == "both" || name == "BOTH") return CueMode::kBoth;
    throw ConfigError("unknown cue mode: '" + name + "'");
}

}  // namespace etdpc::corpus
