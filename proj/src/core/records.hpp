#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "image.hpp"
#include "taxonomy.hpp"

namespace etdpc::corpus {

enum class BlockType { kWord, kLine };
enum class Provenance { kOriginal, kAugmented };

struct OcrBlock {
    std::string id;
    BlockType block_type = BlockType::kLine;
    std::string text;
    double confidence = 0.0;  // stored normalized to [0,1]
    double left = 0.0, top = 0.0, width = 0.0, height = 0.0;  // fractions of page dims
};

struct ParsedOcr {
    std::vector<OcrBlock> blocks;
    std::string full_text;  // LINE texts joined by '\n' in file order
};

// Parses the OCR JSON subset: top-level "Blocks" array; each block carries
// "BlockType", "Id", "Confidence" (0-100), "Geometry"."BoundingBox" with
// "Left"/"Top"/"Width"/"Height", and "Text" for WORD/LINE blocks. Unknown
// block types (PAGE, ...) are skipped. Confidence is rescaled to [0,1].
ParsedOcr parse_ocr_json(const std::string& bytes);
ParsedOcr parse_ocr_file(const std::string& path);

struct PageRecord {
    std::string etd_id;
    int32_t page_number = 1;
    Raster image;
    std::vector<OcrBlock> blocks;
    std::string full_text;
    int label = 0;  // taxonomy index
    Provenance provenance = Provenance::kOriginal;

    // Manifest paths (relative to the manifest directory) when the record was
    // loaded lazily; image/blocks may be unloaded until materialize() runs.
    std::string image_path;
    std::string ocr_path;

    std::string key() const { return etd_id + "#" + std::to_string(page_number); }
};

// One manifest line per record:
// {"etd_id","page_number","image","ocr","label","provenance"}.
struct Manifest {
    std::vector<PageRecord> records;  // images/blocks not loaded
    std::string base_dir;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<PageRecord>& records);

// Loads image + OCR content for a manifest record (paths resolved against
// base_dir). Validates image dimensions (>= 32x32).
void materialize(PageRecord& rec, const std::string& base_dir);

std::map<int, int64_t> class_counts(const std::vector<PageRecord>& records);
std::map<int, int64_t> class_counts_of_labels(const std::vector<int>& labels);

const char* provenance_name(Provenance p);
Provenance provenance_from(const std::string& name);

}  // namespace etdpc::corpus
