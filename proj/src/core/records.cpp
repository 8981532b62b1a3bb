#include "records.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace etdpc::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kBboxEps = 1e-6;

double get_number(const json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_number())
        throw DataError("OCR schema error: missing numeric field '" + std::string(field) + "' in " + where);
    return it->get<double>();
}

std::string get_string(const json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string())
        throw DataError("OCR schema error: missing string field '" + std::string(field) + "' in " + where);
    return it->get<std::string>();
}

}  // namespace

ParsedOcr parse_ocr_json(const std::string& bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw DataError("malformed OCR JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    auto blocks_it = doc.find("Blocks");
    if (blocks_it == doc.end() || !blocks_it->is_array())
        throw DataError("OCR schema error: top-level 'Blocks' array missing");

    ParsedOcr out;
    bool first_line = true;
    for (const json& jb : *blocks_it) {
        const std::string type = get_string(jb, "BlockType", "block");
        BlockType bt;
        if (type == "WORD")
            bt = BlockType::kWord;
        else if (type == "LINE")
            bt = BlockType::kLine;
        else
            continue;  // PAGE and anything else: skip without error

        OcrBlock blk;
        blk.id = get_string(jb, "Id", "block");
        blk.block_type = bt;
        blk.text = get_string(jb, "Text", "block " + blk.id);
        const double conf = get_number(jb, "Confidence", "block " + blk.id);
        if (conf < 0.0 || conf > 100.0)
            throw DataError("OCR validation error: confidence " + std::to_string(conf) +
                            " outside [0,100] in block " + blk.id);
        blk.confidence = conf / 100.0;

        auto geom = jb.find("Geometry");
        if (geom == jb.end() || !geom->is_object())
            throw DataError("OCR schema error: missing 'Geometry' in block " + blk.id);
        auto bbox = geom->find("BoundingBox");
        if (bbox == geom->end() || !bbox->is_object())
            throw DataError("OCR schema error: missing 'BoundingBox' in block " + blk.id);
        blk.left = get_number(*bbox, "Left", "block " + blk.id);
        blk.top = get_number(*bbox, "Top", "block " + blk.id);
        blk.width = get_number(*bbox, "Width", "block " + blk.id);
        blk.height = get_number(*bbox, "Height", "block " + blk.id);

        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0 + kBboxEps; };
        if (!in_unit(blk.left) || !in_unit(blk.top) || !in_unit(blk.width) || !in_unit(blk.height) ||
            blk.width <= 0.0 || blk.height <= 0.0 || blk.left + blk.width > 1.0 + kBboxEps ||
            blk.top + blk.height > 1.0 + kBboxEps)
            throw DataError("OCR validation error: bounding box out of range in block " + blk.id);

        if (bt == BlockType::kLine) {
            if (!first_line) out.full_text += '\n';
            out.full_text += blk.text;
            first_line = false;
        }
        out.blocks.push_back(std::move(blk));
    }
    return out;
}

ParsedOcr parse_ocr_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open OCR file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ocr_json(ss.str());
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest: " + path);
    Manifest m;
    m.base_dir = fs::path(path).parent_path().string();
    const Taxonomy& tax = Taxonomy::standard();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                            ": malformed JSON (" + e.what() + ")");
        }
        try {
            PageRecord rec;
            rec.etd_id = j.at("etd_id").get<std::string>();
            rec.page_number = j.at("page_number").get<int32_t>();
            if (rec.page_number <= 0) throw DataError("page_number must be positive");
            rec.image_path = j.at("image").get<std::string>();
            rec.ocr_path = j.value("ocr", std::string());
            rec.label = tax.index_of(j.at("label").get<std::string>());
            rec.provenance = provenance_from(j.value("provenance", std::string("original")));
            m.records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return m;
}

void write_manifest(const std::string& path, const std::vector<PageRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest: " + path);
    const Taxonomy& tax = Taxonomy::standard();
    for (const PageRecord& rec : records) {
        json j;
        j["etd_id"] = rec.etd_id;
        j["page_number"] = rec.page_number;
        j["image"] = rec.image_path;
        j["ocr"] = rec.ocr_path;
        j["label"] = tax.label(rec.label);
        j["provenance"] = provenance_name(rec.provenance);
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("short write on manifest: " + path);
}

void materialize(PageRecord& rec, const std::string& base_dir) {
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (fs::path(base_dir) / fp).string();
    };
    if (rec.image.size() == 0 && !rec.image_path.empty()) {
        rec.image = read_png(resolve(rec.image_path));
        if (rec.image.height < 32 || rec.image.width < 32)
            throw DataError("page image below 32x32 for record " + rec.key());
    }
    if (rec.blocks.empty() && rec.full_text.empty() && !rec.ocr_path.empty()) {
        ParsedOcr parsed = parse_ocr_file(resolve(rec.ocr_path));
        rec.blocks = std::move(parsed.blocks);
        rec.full_text = std::move(parsed.full_text);
    }
}

std::map<int, int64_t> class_counts(const std::vector<PageRecord>& records) {
    std::map<int, int64_t> counts;
    for (int i = 0; i < Taxonomy::kCategoryCount; ++i) counts[i] = 0;
    for (const auto& r : records) ++counts[r.label];
    return counts;
}

std::map<int, int64_t> class_counts_of_labels(const std::vector<int>& labels) {
    std::map<int, int64_t> counts;
    for (int i = 0; i < Taxonomy::kCategoryCount; ++i) counts[i] = 0;
    for (int l : labels) ++counts[l];
    return counts;
}

const char* provenance_name(Provenance p) {
    return p == Provenance::kOriginal ? "original" : "augmented";
}

Provenance provenance_from(const std::string& name) {
    if (name == "original" || name == "ORIGINAL") return Provenance::kOriginal;
    if (name == "augmented" || name == "AUGMENTED") return Provenance::kAugmented;
    throw DataError("unknown provenance: '" + name + "'");
}

}  // namespace etdpc::corpus
