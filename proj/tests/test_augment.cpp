#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "augmentor.hpp"
#include "noise.hpp"
#include "render.hpp"
#include "rng.hpp"
#include "synthetic.hpp"

using namespace etdpc;
using namespace etdpc::augment;
using corpus::PageRecord;
using corpus::Raster;
using corpus::Taxonomy;

namespace {

Raster constant_page(int32_t h, int32_t w, uint8_t v) { return Raster(h, w, v); }

std::map<int, int64_t> table1_counts_by_index() {
    const Taxonomy& tax = Taxonomy::standard();
    std::map<std::string, int64_t> byname{
        {"Chapters", 71200},      {"Appendices", 9891},    {"ReferenceList", 3385},
        {"TableofContent", 1114}, {"TitlePage", 911},      {"Abstract", 777},
        {"ListofFigures", 586},   {"Acknowledgment", 543}, {"ListofTables", 477},
        {"CurriculumVitae", 124}, {"Dedication", 77},      {"ChapterAbstract", 66},
        {"Other", 3220}};
    std::map<int, int64_t> out;
    for (const auto& [name, c] : byname) out[tax.index_of(name)] = c;
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("augment");

TEST_CASE("paraphrase: identity hook returns input") {
    Rng rng(1);
    const auto hook = identity_hook();
    CHECK(hook("Some page text.", rng) == "Some page text.");
}

TEST_CASE("paraphrase: one sentence with zero dropout is unchanged") {
    Rng rng(5);
    CHECK(default_paraphrase("A single sentence here.", rng, 0.0) == "A single sentence here.");
}

TEST_CASE("paraphrase: seeded shuffle + dropout matches an independent re-simulation") {
    const std::string text = "One two. Three four five. Six. Seven eight nine ten. Eleven twelve.";
    const uint64_t seed = 123;
    Rng rng(seed);
    const std::string out = default_paraphrase(text, rng, 0.1);

    // Re-simulate the documented sampling order: sentence shuffle first, then
    // one uniform draw per word in output order.
    Rng sim(seed);
    std::vector<std::string> sentences = split_sentences(text);
    sim.shuffle(sentences);
    std::vector<std::string> survivors;
    for (const auto& s : sentences) {
        std::istringstream ss(s);
        std::string w;
        while (ss >> w)
            if (sim.uniform() >= 0.1) survivors.push_back(w);
    }
    std::string expected;
    for (size_t i = 0; i < survivors.size(); ++i) {
        if (i) expected += ' ';
        expected += survivors[i];
    }
    CHECK(out == expected);

    // Reproducible permutation: same seed, same output.
    Rng rng2(seed);
    CHECK(default_paraphrase(text, rng2, 0.1) == out);
}

TEST_CASE("paraphrase: never empty for non-empty input") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        CHECK(!default_paraphrase("word", rng, 0.9).empty());
    }
}

TEST_CASE("wrap_text basics") {
    CHECK(wrap_text("").empty());
    CHECK_THROWS_AS(wrap_text("x", 0), ConfigError);

    // 100 one-char words, space separated, 199 chars total: 45+45+10 words
    std::string text;
    for (int i = 0; i < 100; ++i) {
        if (i) text += ' ';
        text += 'a';
    }
    REQUIRE(text.size() == 199);
    const auto lines = wrap_text(text, 90);
    CHECK(lines.size() == 3);
    for (const auto& l : lines) CHECK(l.size() <= 90);
}

TEST_CASE("wrap_text: rejoining reproduces the normalized word sequence") {
    Rng rng(31);
    const std::vector<std::string> pool{"alpha", "beta",     "gamma", "delta", "epsilon",
                                        "zeta",  "verylongwordhere", "x",     "y"};
    for (int trial = 0; trial < 25; ++trial) {
        std::string text;
        std::vector<std::string> words;
        const int n = 1 + static_cast<int>(rng.below(60));
        for (int i = 0; i < n; ++i) {
            const std::string& w = pool[static_cast<size_t>(rng.below(pool.size()))];
            words.push_back(w);
            text += w;
            text += rng.below(4) == 0 ? "\n\t " : " ";
        }
        const int64_t width = 20 + static_cast<int64_t>(rng.below(80));
        const auto lines = wrap_text(text, width);
        std::string joined;
        for (size_t i = 0; i < lines.size(); ++i) {
            if (i) joined += ' ';
            joined += lines[i];
        }
        std::string expected;
        for (size_t i = 0; i < words.size(); ++i) {
            if (i) expected += ' ';
            expected += words[i];
        }
        CHECK(joined == expected);
    }
}

TEST_CASE("wrap_text: oversize words split into width-sized chunks") {
    const auto lines = wrap_text("abcdefghij", 4);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "abcd");
    CHECK(lines[1] == "efgh");
    CHECK(lines[2] == "ij");
}

TEST_CASE("render: empty lines give an all-background page") {
    RenderSpec spec;
    spec.page_height = 64;
    spec.page_width = 64;
    Rng rng(2);
    const Raster page = render_text_image({}, spec, rng);
    for (uint8_t p : page.px) CHECK(p == 255);
}

TEST_CASE("render: deterministic given the same stream") {
    RenderSpec spec;
    spec.page_height = 96;
    spec.page_width = 96;
    Rng a(7), b(7);
    const Raster pa = render_text_image({"hello page"}, spec, a);
    const Raster pb = render_text_image({"hello page"}, spec, b);
    CHECK(pa.px == pb.px);
}

TEST_CASE("render: non-empty line puts ink on at least 1% of pixels") {
    RenderSpec spec;
    spec.page_height = 64;
    spec.page_width = 64;
    spec.margin_jitter = 0;
    Rng rng(11);
    const Raster page = render_text_image({"dark glyphs here", "second line"}, spec, rng);
    int64_t dark = 0;
    for (uint8_t p : page.px) dark += p < 128;
    CHECK(dark >= page.px.size() / 100);
}

TEST_CASE("render: unknown font family is a configuration error naming it") {
    RenderSpec spec;
    spec.font_families = {"sans", "wingdings"};
    CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("wingdings"), ConfigError);
}

TEST_CASE("gaussian noise: degenerate range is the identity") {
    NoiseParams p;
    p.gaussian_sigma_min = p.gaussian_sigma_max = 0.0;
    Rng rng(3);
    const Raster img = constant_page(64, 64, 90);
    CHECK(additive_gaussian_noise(img, p, rng).px == img.px);
}

TEST_CASE("gaussian noise: sample stddev matches the configured sigma") {
    NoiseParams p;
    p.gaussian_sigma_min = p.gaussian_sigma_max = 10.0;
    Rng rng(4);
    const Raster img = constant_page(512, 512, 127);
    const Raster out = additive_gaussian_noise(img, p, rng);
    double sum = 0.0, sum2 = 0.0;
    for (size_t i = 0; i < out.px.size(); ++i) {
        const double d = static_cast<double>(out.px[i]) - 127.0;
        sum += d;
        sum2 += d * d;
    }
    const double n = static_cast<double>(out.px.size());
    const double stddev = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    CHECK(stddev > 9.5);
    CHECK(stddev < 10.5);
}

TEST_CASE("gaussian noise: clamping, not wraparound, on a black page") {
    NoiseParams p;
    p.gaussian_sigma_min = p.gaussian_sigma_max = 10.0;
    Rng rng(5);
    const Raster out = additive_gaussian_noise(constant_page(128, 128, 0), p, rng);
    for (uint8_t v : out.px) CHECK(v <= 60);  // a wrapped negative would land near 255
}

TEST_CASE("salt and pepper: p=0 identity, p=1 all extremes") {
    NoiseParams p;
    Rng rng(6);
    const Raster img = constant_page(64, 64, 127);
    p.salt_pepper_p = 0.0;
    CHECK(salt_and_pepper(img, p, rng).px == img.px);
    p.salt_pepper_p = 1.0;
    const Raster out = salt_and_pepper(img, p, rng);
    for (uint8_t v : out.px) CHECK((v == 0 || v == 255));
}

TEST_CASE("salt and pepper: replaced fraction within the 3-sigma binomial bound") {
    NoiseParams p;
    p.salt_pepper_p = 0.9;
    Rng rng(7);
    const Raster img = constant_page(512, 512, 127);  // any replacement changes the pixel
    const Raster out = salt_and_pepper(img, p, rng);
    int64_t replaced = 0;
    for (size_t i = 0; i < out.px.size(); ++i) replaced += out.px[i] != 127;
    const double frac = static_cast<double>(replaced) / static_cast<double>(out.px.size());
    // 3*sigma = 3*sqrt(0.9*0.1/262144) ~= 0.00176; the spec allows 0.005
    CHECK(frac > 0.895);
    CHECK(frac < 0.905);
}

TEST_CASE("blur: sigma 0 identity; constant page unchanged") {
    NoiseParams p;
    p.blur_sigma = 0.0;
    const Raster img = constant_page(32, 32, 200);
    CHECK(gaussian_blur(img, p).px == img.px);
    p.blur_sigma = 0.5;
    CHECK(gaussian_blur(img, p).px == img.px);  // kernel sums to one
}

TEST_CASE("blur: unit impulse reproduces the normalized closed-form kernel") {
    NoiseParams p;
    p.blur_sigma = 0.5;
    const int32_t radius = 2;  // ceil(3*0.5)
    Raster img(33, 33, 0);
    img.at(16, 16) = 255;
    const Raster out = gaussian_blur(img, p);

    // Closed form: k(d) = exp(-d^2 / (2 sigma^2)), separably normalized.
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double s = 0.0;
    for (int i = -radius; i <= radius; ++i)
        s += k[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (0.5 * 0.5));
    for (auto& v : k) v /= s;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const double expected =
                255.0 * k[static_cast<size_t>(dy + radius)] * k[static_cast<size_t>(dx + radius)];
            const double got = out.at(16 + dy, 16 + dx);
            CHECK(std::abs(got - expected) <= 0.5 + 1e-9);  // one rounding step
        }
    // far away: zero
    CHECK(out.at(0, 0) == 0);
}

TEST_CASE("linear contrast") {
    NoiseParams p;
    const Raster img = constant_page(16, 16, 200);
    SUBCASE("alpha 1 is the exact identity") {
        p.contrast_alpha = 1.0;
        Raster ramp(16, 16, 0);
        for (size_t i = 0; i < ramp.px.size(); ++i) ramp.px[i] = static_cast<uint8_t>(i % 256);
        CHECK(linear_contrast(ramp, p).px == ramp.px);
    }
    SUBCASE("alpha 2 saturates a bright pixel") {
        p.contrast_alpha = 2.0;
        CHECK(linear_contrast(img, p).at(0, 0) == 255);  // clamp(127+146)
    }
    SUBCASE("alpha 0.5 matches the scalar formula on a ramp") {
        p.contrast_alpha = 0.5;
        Raster ramp(16, 16, 0);
        for (size_t i = 0; i < ramp.px.size(); ++i) ramp.px[i] = static_cast<uint8_t>(i % 256);
        const Raster out = linear_contrast(ramp, p);
        for (size_t i = 0; i < ramp.px.size(); ++i) {
            const double expected =
                std::clamp(127.0 + 0.5 * (static_cast<double>(ramp.px[i]) - 127.0), 0.0, 255.0);
            CHECK(static_cast<double>(out.px[i]) == doctest::Approx(expected).epsilon(0.51));
        }
    }
    SUBCASE("alpha must be positive") {
        p.contrast_alpha = 0.0;
        CHECK_THROWS_AS(linear_contrast(img, p), ConfigError);
    }
}

TEST_CASE("balance plan on the published counts") {
    const auto counts = table1_counts_by_index();
    const Taxonomy& tax = Taxonomy::standard();
    const BalancePlan plan = make_balance_plan(counts, 1000);
    CHECK(plan.additional.at(tax.index_of("Dedication")) == 923);  // 1000 - 77
    CHECK(plan.additional.at(tax.index_of("ChapterAbstract")) == 934);
    CHECK(plan.additional.at(tax.index_of("Chapters")) == 0);
    // TitlePage is below the floor but not a minority label: no additions.
    CHECK(plan.additional.at(tax.index_of("TitlePage")) == 0);
    for (const auto& name : Taxonomy::minority_labels()) {
        const int idx = tax.index_of(name);
        CHECK(counts.at(idx) + plan.additional.at(idx) >= 1000);
    }
    CHECK_THROWS_AS(make_balance_plan(counts, 0), ConfigError);

    std::map<int, int64_t> all_big;
    for (const auto& [label, _] : counts) all_big[label] = 5000;
    const BalancePlan zero = make_balance_plan(all_big, 1000);
    CHECK(zero.total() == 0);
}

TEST_CASE("augment_category: counts, determinism, provenance") {
    corpus::SyntheticCorpusSpec spec;
    spec.pages_per_category = 4;
    spec.seed = 19;
    const auto records = corpus::generate_synthetic_corpus(spec);
    const Taxonomy& tax = Taxonomy::standard();
    const int label = tax.index_of("Dedication");

    NoiseParams noise;
    noise.salt_pepper_p = 0.02;
    noise.gaussian_sigma_min = 0.0;
    noise.gaussian_sigma_max = 6.0;
    noise.seed = 77;
    RenderSpec render;
    render.page_height = 64;
    render.page_width = 64;

    CHECK(augment_category(records, label, 0, noise, render, default_hook()).empty());
    CHECK_THROWS_AS(augment_category(records, label, -1, noise, render, default_hook()), ConfigError);

    const auto a = augment_category(records, label, 5, noise, render, default_hook());
    REQUIRE(a.size() == 5);
    for (const auto& r : a) {
        CHECK(r.provenance == corpus::Provenance::kAugmented);
        CHECK(r.label == label);
        CHECK(!r.full_text.empty());
        CHECK(r.image.height == 64);
        CHECK(r.image.width == 64);
    }
    const auto b = augment_category(records, label, 5, noise, render, default_hook());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.px == b[i].image.px);  // bit-identical across runs
        CHECK(a[i].full_text == b[i].full_text);
    }

    // empty source pool
    std::vector<PageRecord> no_sources;
    CHECK_THROWS_WITH_AS(augment_category(no_sources, label, 3, noise, render, default_hook()),
                         doctest::Contains("unsatisfiable"), DataError);
}

TEST_CASE("augment pipeline preserves dimensions and is deterministic end to end") {
    NoiseParams p;
    p.salt_pepper_p = 0.05;
    p.gaussian_sigma_min = 2.0;
    p.gaussian_sigma_max = 8.0;
    const Raster img = constant_page(48, 72, 180);
    Rng a(21), b(21);
    const Raster ra = apply_noise_pipeline(img, p, a);
    const Raster rb = apply_noise_pipeline(img, p, b);
    CHECK(ra.height == 48);
    CHECK(ra.width == 72);
    CHECK(ra.px == rb.px);
}

TEST_CASE("hook failures carry the source record key") {
    corpus::SyntheticCorpusSpec spec;
    spec.pages_per_category = 2;
    spec.seed = 3;
    const auto records = corpus::generate_synthetic_corpus(spec);
    const int label = records.front().label;
    NoiseParams noise;
    RenderSpec render;
    render.page_height = 64;
    render.page_width = 64;
    const ParaphraseHook broken = [](const std::string&, Rng&) -> std::string {
        throw std::runtime_error("backend unavailable");
    };
    CHECK_THROWS_WITH_AS(augment_category(records, label, 1, noise, render, broken),
                         doctest::Contains(records.front().key()), DataError);
}

TEST_SUITE_END();
