#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "records.hpp"

namespace etdpc::corpus {

enum class CueMode { kVisualOnly, kTextOnly, kBoth };

// Desk-scale stand-in corpus. Every category carries a designed cue:
// TEXT_ONLY categories share one visual template (images carry no class
// signal) but have distinct keyword vocabularies; VISUAL_ONLY categories
// share the filler vocabulary but draw distinct geometric patterns; BOTH
// categories carry both cues. Deterministic given the seed.
struct SyntheticCorpusSpec {
    int64_t pages_per_category = 200;
    int32_t image_height = 64;
    int32_t image_width = 64;
    std::map<std::string, CueMode> cue_modes;  // empty -> default assignment
    uint64_t seed = 0;
    double noise_gaussian_sigma = 6.0;
    double noise_salt_pepper_p = 0.01;

    void validate() const;
};

// Default cue assignment: Chapters BOTH; TitlePage/Abstract/ListofFigures/
// Acknowledgment/ListofTables/Dedication TEXT_ONLY; the rest VISUAL_ONLY.
std::map<std::string, CueMode> default_cue_modes();

std::vector<PageRecord> generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

// The shared pre-noise raster used by every TEXT_ONLY page.
Raster text_only_template(int32_t height, int32_t width);

const char* cue_mode_name(CueMode m);
CueMode cue_mode_from(const std::string& name);

}  // namespace etdpc::corpus
