#include <doctest.h>

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "image.hpp"
#include "records.hpp"
#include "rng.hpp"
#include "split.hpp"
#include "synthetic.hpp"
#include "taxonomy.hpp"
#include "test_util.hpp"
#include "vocab.hpp"

using namespace etdpc;
using namespace etdpc::corpus;

namespace {

std::string line_block(const std::string& id, const std::string& text, double conf = 99.0,
                       double left = 0.1, double top = 0.1, double w = 0.3, double h = 0.05) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  R"({"BlockType":"LINE","Id":"%s","Text":"%s","Confidence":%g,)"
                  R"("Geometry":{"BoundingBox":{"Left":%g,"Top":%g,"Width":%g,"Height":%g}}})",
                  id.c_str(), text.c_str(), conf, left, top, w, h);
    return buf;
}

std::vector<PageRecord> light_records(const std::map<std::string, int64_t>& counts_by_label) {
    const Taxonomy& tax = Taxonomy::standard();
    std::vector<PageRecord> out;
    for (const auto& [label, count] : counts_by_label) {
        const int idx = tax.index_of(label);
        for (int64_t i = 0; i < count; ++i) {
            PageRecord r;
            r.etd_id = label + "-" + std::to_string(i / 50);
            r.page_number = static_cast<int32_t>(i % 50 + 1);
            r.label = idx;
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::map<std::string, int64_t> table1_counts() {
    return {{"Chapters", 71200},      {"Appendices", 9891},    {"ReferenceList", 3385},
            {"TableofContent", 1114}, {"TitlePage", 911},      {"Abstract", 777},
            {"ListofFigures", 586},   {"Acknowledgment", 543}, {"ListofTables", 477},
            {"CurriculumVitae", 124}, {"Dedication", 77},      {"ChapterAbstract", 66},
            {"Other", 3220}};
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("ocr parse maps fields and rescales confidence") {
    const std::string doc = R"({"Blocks":[)" + line_block("b1", "Abstract") + "]}";
    const ParsedOcr parsed = parse_ocr_json(doc);
    REQUIRE(parsed.blocks.size() == 1);
    CHECK(parsed.full_text == "Abstract");
    CHECK(parsed.blocks[0].confidence == doctest::Approx(0.99));
    CHECK(parsed.blocks[0].block_type == BlockType::kLine);
    CHECK(parsed.blocks[0].id == "b1");
}

TEST_CASE("ocr parse: empty Blocks array") {
    const ParsedOcr parsed = parse_ocr_json(R"({"Blocks":[]})");
    CHECK(parsed.blocks.empty());
    CHECK(parsed.full_text.empty());
}

TEST_CASE("ocr parse: three-line fixture equals hand-joined expectation") {
    TempDir tmp("ocr");
    const std::string doc = R"({"Blocks":[)" + line_block("l1", "first line", 91.5, 0.1, 0.1) + "," +
                            line_block("l2", "second line", 88.25, 0.1, 0.2) + "," +
                            line_block("l3", "third", 99.9, 0.1, 0.3) + "]}";
    write_file(tmp.file("page.json"), doc);
    const ParsedOcr parsed = parse_ocr_file(tmp.file("page.json"));
    // Hand-written expectation built alongside the fixture.
    const std::string expected = std::string("first line") + "\n" + "second line" + "\n" + "third";
    CHECK(parsed.full_text == expected);
    REQUIRE(parsed.blocks.size() == 3);
    CHECK(parsed.blocks[1].confidence == doctest::Approx(0.8825));
}

TEST_CASE("ocr parse: unknown block types are skipped, order preserved") {
    const std::string doc =
        R"({"Blocks":[{"BlockType":"PAGE","Id":"p","Confidence":99,"Geometry":{"BoundingBox":{"Left":0,"Top":0,"Width":1,"Height":1}}},)" +
        line_block("l1", "alpha") + "," +
        R"({"BlockType":"WORD","Id":"w1","Text":"alpha","Confidence":95,"Geometry":{"BoundingBox":{"Left":0.1,"Top":0.1,"Width":0.1,"Height":0.05}}},)" +
        line_block("l2", "beta", 97.0, 0.1, 0.3) + "]}";
    const ParsedOcr parsed = parse_ocr_json(doc);
    REQUIRE(parsed.blocks.size() == 3);  // PAGE dropped, WORD kept
    CHECK(parsed.blocks[0].id == "l1");
    CHECK(parsed.blocks[1].id == "w1");
    CHECK(parsed.blocks[1].block_type == BlockType::kWord);
    CHECK(parsed.full_text == "alpha\nbeta");  // WORD text never enters full_text
}

TEST_CASE("ocr parse error paths") {
    CHECK_THROWS_WITH_AS(parse_ocr_json("{not json"), doctest::Contains("byte"), DataError);
    CHECK_THROWS_AS(parse_ocr_json(R"({"NoBlocks":[]})"), DataError);
    // bbox out of range names the offending block id
    const std::string bad_bbox =
        R"({"Blocks":[)" + line_block("bad-block", "x", 99, 0.9, 0.9, 0.3, 0.05) + "]}";
    CHECK_THROWS_WITH_AS(parse_ocr_json(bad_bbox), doctest::Contains("bad-block"), DataError);
    // missing Text on a LINE
    const std::string missing =
        R"({"Blocks":[{"BlockType":"LINE","Id":"m1","Confidence":99,"Geometry":{"BoundingBox":{"Left":0.1,"Top":0.1,"Width":0.2,"Height":0.05}}}]})";
    CHECK_THROWS_WITH_AS(parse_ocr_json(missing), doctest::Contains("Text"), DataError);
    // confidence outside 0..100
    const std::string conf = R"({"Blocks":[)" + line_block("c1", "x", 150.0) + "]}";
    CHECK_THROWS_AS(parse_ocr_json(conf), DataError);
}

TEST_CASE("ocr full_text length equals sum of line lengths plus separators") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        std::string doc = R"({"Blocks":[)";
        size_t total = 0;
        for (int i = 0; i < n; ++i) {
            std::string text(1 + rng.below(12), static_cast<char>('a' + rng.below(26)));
            total += text.size();
            if (i) doc += ",";
            doc += line_block("l" + std::to_string(i), text, 90, 0.1, 0.05 * (i + 1));
        }
        doc += "]}";
        const ParsedOcr parsed = parse_ocr_json(doc);
        CHECK(parsed.full_text.size() == total + static_cast<size_t>(n - 1));
    }
}

TEST_CASE("vocabulary: frequency order with reserved ids") {
    std::vector<std::string> texts{"a a b"};
    const Vocabulary v = Vocabulary::build_from_texts(texts, 6);
    CHECK(v.size() == 6);
    CHECK(v.id_of("a") == 4);
    CHECK(v.id_of("b") == 5);
    CHECK(v.id_of("zzz") == Vocabulary::kUnk);
    CHECK(v.tokens()[0] == "<pad>");
    CHECK_THROWS_AS(Vocabulary::build_from_texts(texts, 4), ConfigError);
    CHECK_THROWS_AS(Vocabulary::build_from_texts({}, 100), DataError);
}

TEST_CASE("vocabulary: ties break lexicographically, case folded") {
    const Vocabulary v = Vocabulary::build_from_texts({"Beta alpha BETA Alpha gamma"}, 7);
    // alpha=2, beta=2, gamma=1 -> alpha before beta (tie), gamma last
    CHECK(v.id_of("alpha") == 4);
    CHECK(v.id_of("beta") == 5);
    CHECK(v.id_of("gamma") == 6);
}

TEST_CASE("vocabulary size matches an independent token count on a big corpus") {
    SyntheticCorpusSpec spec;
    spec.pages_per_category = 77;  // 1001 pages
    spec.seed = 11;
    const auto records = generate_synthetic_corpus(spec);
    REQUIRE(records.size() == 1001);

    // Independent counting pass over the same texts.
    std::set<std::string> distinct;
    for (const auto& r : records)
        for (const auto& tok : split_tokens(r.full_text)) distinct.insert(tok);

    const Vocabulary small = Vocabulary::build(records, 20);
    CHECK(small.size() == std::min<int64_t>(20, static_cast<int64_t>(distinct.size()) + 4));
    const Vocabulary big = Vocabulary::build(records, 100000);
    CHECK(big.size() == static_cast<int64_t>(distinct.size()) + 4);
}

TEST_CASE("tokenize basics") {
    const Vocabulary v = Vocabulary::build_from_texts({"a a b"}, 6);
    SUBCASE("empty text") {
        const TokenFeatures f = tokenize("", v, 4);
        CHECK(f.input_word_ids == std::vector<int32_t>{2, 3, 0, 0});
        CHECK(f.input_mask == std::vector<int32_t>{1, 1, 0, 0});
        CHECK(f.input_type_ids == std::vector<int32_t>{0, 0, 0, 0});
    }
    SUBCASE("two tokens") {
        const TokenFeatures f = tokenize("a b", v, 8);
        CHECK(f.input_word_ids == std::vector<int32_t>{2, 4, 5, 3, 0, 0, 0, 0});
        CHECK(f.input_mask == std::vector<int32_t>{1, 1, 1, 1, 0, 0, 0, 0});
    }
    SUBCASE("L too small") { CHECK_THROWS_AS(tokenize("a", v, 2), ConfigError); }
}

TEST_CASE("tokenize: long page accounting") {
    std::string text;
    for (int i = 0; i < 300; ++i) text += "tok" + std::to_string(i % 40) + " ";
    const Vocabulary v = Vocabulary::build_from_texts({text}, 64);
    const TokenFeatures f = tokenize(text, v, 128);
    REQUIRE(f.input_word_ids.size() == 128);
    int32_t mask_sum = 0;
    for (int32_t m : f.input_mask) mask_sum += m;
    CHECK(mask_sum == 128);
    CHECK(f.input_word_ids.back() == Vocabulary::kSep);  // last non-pad id is SEP
}

TEST_CASE("tokenize: mask is a prefix and output length is exact") {
    const Vocabulary v = Vocabulary::build_from_texts({"one two three four"}, 10);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text;
        const int words = static_cast<int>(rng.below(30));
        for (int w = 0; w < words; ++w) text += "w" + std::to_string(rng.below(50)) + " ";
        const int64_t L = 3 + static_cast<int64_t>(rng.below(40));
        const TokenFeatures f = tokenize(text, v, L);
        REQUIRE(static_cast<int64_t>(f.input_word_ids.size()) == L);
        REQUIRE(static_cast<int64_t>(f.input_mask.size()) == L);
        bool seen_zero = false;
        for (int32_t m : f.input_mask) {
            if (m == 0) seen_zero = true;
            CHECK((m == 0 || m == 1));
            if (seen_zero) CHECK(m == 0);  // prefix property
        }
        for (size_t i = 0; i < f.input_mask.size(); ++i)
            if (f.input_mask[i] == 0) CHECK(f.input_word_ids[i] == Vocabulary::kPad);
    }
}

TEST_CASE("split: exact division on one category") {
    auto records = light_records({{"Chapters", 100}});
    SplitSpec spec;
    spec.seed = 5;
    const SplitResult r = split_dataset(records, spec);
    CHECK(r.train.size() == 60);
    CHECK(r.val.size() == 25);
    CHECK(r.test.size() == 15);
}

TEST_CASE("split: same seed gives identical partitions") {
    auto records = light_records({{"Chapters", 40}, {"Abstract", 33}, {"Dedication", 7}});
    SplitSpec spec;
    spec.seed = 99;
    const SplitResult a = split_dataset(records, spec);
    const SplitResult b = split_dataset(records, spec);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    SplitSpec other = spec;
    other.seed = 100;
    const SplitResult c = split_dataset(records, other);
    CHECK(a.train != c.train);
}

TEST_CASE("split: table-1-sized mock manifest lands within the stratified bound") {
    const auto records = light_records(table1_counts());
    REQUIRE(records.size() == 92371);
    SplitSpec spec;
    spec.seed = 1;
    const SplitResult r = split_dataset(records, spec);
    CHECK(r.total() == 92371);
    // 0.15 * 92371 = 13855.65; 13 strata, each within +-1
    CHECK(r.test.size() >= 13856 - 13);
    CHECK(r.test.size() <= 13856 + 13);
}

TEST_CASE("split: disjoint union with per-class deviation at most one") {
    Rng rng(17);
    const Taxonomy& tax = Taxonomy::standard();
    for (int trial = 0; trial < 10; ++trial) {
        std::map<std::string, int64_t> counts;
        const int ncat = 2 + static_cast<int>(rng.below(8));
        for (int c = 0; c < ncat; ++c)
            counts[tax.label(static_cast<int>(rng.below(13)))] = 3 + static_cast<int64_t>(rng.below(200));
        auto records = light_records(counts);
        SplitSpec spec;
        spec.seed = rng.next_u64();
        const SplitResult r = split_dataset(records, spec);

        std::set<size_t> seen;
        for (const auto* part : {&r.train, &r.val, &r.test})
            for (size_t i : *part) CHECK(seen.insert(i).second);
        CHECK(seen.size() == records.size());

        std::map<int, std::array<int64_t, 3>> got;
        auto tally = [&](const std::vector<size_t>& part, int slot) {
            for (size_t i : part) got[records[i].label][static_cast<size_t>(slot)]++;
        };
        tally(r.train, 0);
        tally(r.val, 1);
        tally(r.test, 2);
        const double fr[3] = {0.60, 0.25, 0.15};
        for (const auto& [label, byslot] : got) {
            const int64_t n = byslot[0] + byslot[1] + byslot[2];
            for (int s = 0; s < 3; ++s)
                CHECK(std::abs(static_cast<double>(byslot[static_cast<size_t>(s)]) -
                               fr[s] * static_cast<double>(n)) <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("split: tiny category warns, test set never empty") {
    auto records = light_records({{"Dedication", 2}, {"Chapters", 4}});
    SplitSpec spec;
    spec.seed = 3;
    const SplitResult r = split_dataset(records, spec);
    CHECK(!r.warnings.empty());
    CHECK(!r.test.empty());
    CHECK(r.total() == 6);
}

TEST_CASE("split: group-by-etd keeps whole theses together") {
    auto records = light_records({{"Chapters", 120}, {"Abstract", 60}});
    SplitSpec spec;
    spec.seed = 21;
    spec.group_by_etd = true;
    const SplitResult r = split_dataset(records, spec);
    std::map<std::string, std::set<int>> part_of;
    auto scan = [&](const std::vector<size_t>& part, int id) {
        for (size_t i : part) part_of[records[i].etd_id].insert(id);
    };
    scan(r.train, 0);
    scan(r.val, 1);
    scan(r.test, 2);
    for (const auto& [etd, parts] : part_of) CHECK(parts.size() == 1);
    CHECK(r.total() == records.size());
}

TEST_CASE("synthetic corpus: counts and determinism") {
    SyntheticCorpusSpec spec;
    spec.pages_per_category = 10;
    spec.seed = 42;
    const auto a = generate_synthetic_corpus(spec);
    REQUIRE(a.size() == 130);
    const auto counts = class_counts(a);
    for (const auto& [label, count] : counts) CHECK(count == 10);

    const auto b = generate_synthetic_corpus(spec);
    REQUIRE(b.size() == a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.px == b[i].image.px);
        CHECK(a[i].full_text == b[i].full_text);
        CHECK(a[i].key() == b[i].key());
    }
    SyntheticCorpusSpec bad = spec;
    bad.image_height = 16;
    CHECK_THROWS_AS(generate_synthetic_corpus(bad), ConfigError);
}

TEST_CASE("synthetic corpus: TEXT_ONLY categories share one pre-noise template") {
    SyntheticCorpusSpec spec;
    spec.pages_per_category = 3;
    spec.seed = 8;
    spec.noise_gaussian_sigma = 0.0;
    spec.noise_salt_pepper_p = 0.0;
    const auto records = generate_synthetic_corpus(spec);
    const Taxonomy& tax = Taxonomy::standard();
    const auto modes = default_cue_modes();
    const Raster* first = nullptr;
    for (const auto& r : records) {
        if (modes.at(tax.label(r.label)) != CueMode::kTextOnly) continue;
        if (!first) {
            first = &r.image;
        } else {
            CHECK(r.image.px == first->px);  // pixel-identical template
        }
    }
    std::string title_text, abstract_text;
    for (const auto& r : records) {
        if (tax.label(r.label) == "TitlePage" && title_text.empty()) title_text = r.full_text;
        if (tax.label(r.label) == "Abstract" && abstract_text.empty()) abstract_text = r.full_text;
    }
    CHECK(title_text != abstract_text);
}

TEST_CASE("synthetic corpus: bag-of-words cannot fully separate VISUAL_ONLY categories") {
    SyntheticCorpusSpec spec;
    spec.pages_per_category = 30;
    spec.seed = 5;
    const auto records = generate_synthetic_corpus(spec);
    const Taxonomy& tax = Taxonomy::standard();
    const int a = tax.index_of("Appendices"), b = tax.index_of("ReferenceList");  // both VISUAL_ONLY

    // Centroid bag-of-words classifier trained and scored on the same pages:
    // an upper bound on what a linear text model can separate here.
    std::map<std::string, size_t> vocab_idx;
    for (const auto& r : records)
        if (r.label == a || r.label == b)
            for (const auto& tok : split_tokens(r.full_text)) vocab_idx.emplace(tok, vocab_idx.size());
    auto vec_of = [&](const PageRecord& r) {
        std::vector<double> v(vocab_idx.size(), 0.0);
        for (const auto& tok : split_tokens(r.full_text)) {
            auto it = vocab_idx.find(tok);
            if (it != vocab_idx.end()) v[it->second] += 1.0;
        }
        return v;
    };

    std::vector<double> ca(vocab_idx.size(), 0.0), cb(vocab_idx.size(), 0.0);
    int64_t na = 0, nb = 0;
    for (const auto& r : records) {
        if (r.label != a && r.label != b) continue;
        const auto v = vec_of(r);
        auto& c = r.label == a ? ca : cb;
        (r.label == a ? na : nb)++;
        for (size_t i = 0; i < v.size(); ++i) c[i] += v[i];
    }
    for (auto& x : ca) x /= static_cast<double>(na);
    for (auto& x : cb) x /= static_cast<double>(nb);

    int64_t correct = 0, total = 0;
    for (const auto& r : records) {
        if (r.label != a && r.label != b) continue;
        const auto v = vec_of(r);
        double da = 0.0, db = 0.0;
        for (size_t i = 0; i < v.size(); ++i) {
            da += (v[i] - ca[i]) * (v[i] - ca[i]);
            db += (v[i] - cb[i]) * (v[i] - cb[i]);
        }
        const int pred = da <= db ? a : b;
        correct += pred == r.label;
        ++total;
    }
    CHECK(total == 60);
    CHECK(correct < total);  // shared vocabulary: below 100%
}

TEST_CASE("class_counts: table-1 mock, empty, synthetic") {
    const auto records = light_records(table1_counts());
    const auto counts = class_counts(records);
    const Taxonomy& tax = Taxonomy::standard();
    CHECK(counts.at(tax.index_of("Chapters")) == 71200);
    CHECK(counts.at(tax.index_of("Dedication")) == 77);
    CHECK(counts.at(tax.index_of("ChapterAbstract")) == 66);
    int64_t total = 0;
    for (const auto& [_, c] : counts) total += c;
    CHECK(total == 92371);

    const auto empty = class_counts({});
    for (const auto& [_, c] : empty) CHECK(c == 0);
}

TEST_CASE("manifest round trip is field-identical") {
    TempDir tmp("manifest");
    auto records = light_records({{"Abstract", 3}, {"Chapters", 2}});
    for (auto& r : records) {
        r.image_path = "pages/" + r.key() + ".png";
        r.ocr_path = "ocr/" + r.key() + ".json";
    }
    records[1].provenance = Provenance::kAugmented;
    write_manifest(tmp.file("m.jsonl"), records);
    const Manifest m = read_manifest(tmp.file("m.jsonl"));
    REQUIRE(m.records.size() == records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(m.records[i].etd_id == records[i].etd_id);
        CHECK(m.records[i].page_number == records[i].page_number);
        CHECK(m.records[i].image_path == records[i].image_path);
        CHECK(m.records[i].ocr_path == records[i].ocr_path);
        CHECK(m.records[i].label == records[i].label);
        CHECK(m.records[i].provenance == records[i].provenance);
    }
}

TEST_CASE("manifest: corrupt line is reported with its line number") {
    TempDir tmp("manifest_bad");
    write_file(tmp.file("m.jsonl"),
               R"({"etd_id":"a","page_number":1,"image":"x.png","ocr":"","label":"Abstract"})"
               "\n{oops\n");
    CHECK_THROWS_WITH_AS(read_manifest(tmp.file("m.jsonl")), doctest::Contains("line 2"), DataError);
}

TEST_CASE("png round trip preserves the raster") {
    TempDir tmp("png");
    Raster img(48, 40, 255);
    Rng rng(9);
    for (auto& p : img.px) p = static_cast<uint8_t>(rng.below(256));
    write_png(tmp.file("x.png"), img);
    const Raster back = read_png(tmp.file("x.png"));
    CHECK(back == img);
    CHECK_THROWS_AS(read_png(tmp.file("missing.png")), DataError);
}

TEST_CASE("taxonomy invariants") {
    const Taxonomy& tax = Taxonomy::standard();
    REQUIRE(tax.labels().size() == 13);
    int chapter_count = 0;
    for (int i = 0; i < Taxonomy::kCategoryCount; ++i)
        if (tax.level1_of(i) == Level1::kChapter) ++chapter_count;
    CHECK(chapter_count == 1);
    CHECK(tax.level1_of(tax.index_of("Chapters")) == Level1::kChapter);
    CHECK(tax.non_chapter_labels().size() == 12);
    CHECK(Taxonomy::minority_labels().size() == 7);
    CHECK_THROWS_AS(tax.index_of("NotALabel"), DataError);
}

TEST_SUITE_END();
