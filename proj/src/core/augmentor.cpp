#include "augmentor.hpp"

#include <algorithm>

namespace etdpc::augment {

using corpus::PageRecord;
using corpus::Provenance;
using corpus::Taxonomy;

ParaphraseHook identity_hook() {
    return [](const std::string& text, Rng&) { return text; };
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::string cur;
    auto flush = [&] {
        const size_t a = cur.find_first_not_of(" \t\n\r");
        if (a != std::string::npos) {
            const size_t b = cur.find_last_not_of(" \t\n\r");
            sentences.push_back(cur.substr(a, b - a + 1));
        }
        cur.clear();
    };
    for (size_t i = 0; i < text.size(); ++i) {
        cur += text[i];
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' || text[i + 1] == '\t' ||
             text[i + 1] == '\r'))
            flush();
    }
    flush();
    return sentences;
}

std::string default_paraphrase(const std::string& text, Rng& rng, double word_dropout) {
    if (word_dropout < 0.0 || word_dropout >= 1.0)
        throw ConfigError("word dropout must lie in [0,1)");
    std::vector<std::string> sentences = split_sentences(text);
    if (sentences.empty()) return text;
    rng.shuffle(sentences);

    if (word_dropout == 0.0) {
        std::string out;
        for (size_t i = 0; i < sentences.size(); ++i) {
            if (i) out += ' ';
            out += sentences[i];
        }
        return out;
    }

    std::string first_word;
    std::string out;
    for (const std::string& s : sentences) {
        std::string word;
        auto emit = [&](const std::string& w) {
            if (w.empty()) return;
            if (first_word.empty()) first_word = w;
            if (rng.uniform() >= word_dropout) {
                if (!out.empty()) out += ' ';
                out += w;
            }
        };
        for (char c : s) {
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                emit(word);
                word.clear();
            } else {
                word += c;
            }
        }
        emit(word);
    }
    if (out.empty()) out = first_word;  // non-empty guarantee
    return out;
}

ParaphraseHook default_hook(double word_dropout) {
    return [word_dropout](const std::string& text, Rng& rng) {
        return default_paraphrase(text, rng, word_dropout);
    };
}

BalancePlan make_balance_plan(const std::map<int, int64_t>& counts, int64_t floor) {
    return make_balance_plan(counts, floor, Taxonomy::minority_labels());
}

BalancePlan make_balance_plan(const std::map<int, int64_t>& counts, int64_t floor,
                              const std::vector<std::string>& minority_labels) {
    if (floor <= 0) throw ConfigError("balance floor must be positive");
    const Taxonomy& tax = Taxonomy::standard();
    BalancePlan plan;
    for (const auto& [label, _] : counts) plan.additional[label] = 0;
    for (const std::string& name : minority_labels) {
        const int idx = tax.index_of(name);
        const auto it = counts.find(idx);
        const int64_t have = it == counts.end() ? 0 : it->second;
        plan.additional[idx] = std::max<int64_t>(0, floor - have);
    }
    return plan;
}

std::vector<PageRecord> augment_category(const std::vector<PageRecord>& records, int label, int64_t n,
                                         const NoiseParams& noise, const RenderSpec& render,
                                         const ParaphraseHook& hook) {
    std::vector<const PageRecord*> ptrs;
    ptrs.reserve(records.size());
    for (const auto& r : records) ptrs.push_back(&r);
    return augment_category(ptrs, label, n, noise, render, hook);
}

std::vector<PageRecord> augment_category(const std::vector<const PageRecord*>& records, int label,
                                         int64_t n, const NoiseParams& noise, const RenderSpec& render,
                                         const ParaphraseHook& hook) {
    if (n < 0) throw ConfigError("augmentation count must be >= 0");
    noise.validate();
    render.validate();
    std::vector<const PageRecord*> sources;
    for (const PageRecord* r : records)
        if (r->label == label && r->provenance == Provenance::kOriginal) sources.push_back(r);
    if (n > 0 && sources.empty())
        throw DataError("unsatisfiable augmentation plan: no original records labeled '" +
                        Taxonomy::standard().label(label) + "'");

    const std::string label_name = Taxonomy::standard().label(label);
    std::vector<PageRecord> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const PageRecord& src = *sources[static_cast<size_t>(i) % sources.size()];
        Rng rng(derive_seed(noise.seed, "augment:" + label_name, static_cast<uint64_t>(i)));

        std::string text;
        try {
            text = hook(src.full_text, rng);
        } catch (const std::exception& e) {
            throw DataError("paraphrase hook failed on source " + src.key() + ": " + e.what());
        }
        const std::vector<std::string> lines = wrap_text(text, 90);

        RenderSpec page_spec = render;
        if (src.image.height >= 32 && src.image.width >= 32) {
            page_spec.page_height = src.image.height;
            page_spec.page_width = src.image.width;
        }
        corpus::Raster img = render_text_image(lines, page_spec, rng);
        img = apply_noise_pipeline(img, noise, rng);

        PageRecord rec;
        rec.etd_id = "aug-" + label_name;
        rec.page_number = static_cast<int32_t>(i + 1);
        rec.image = std::move(img);
        rec.full_text = std::move(text);
        rec.label = label;
        rec.provenance = Provenance::kAugmented;
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace etdpc::augment
