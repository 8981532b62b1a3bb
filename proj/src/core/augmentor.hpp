#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "noise.hpp"
#include "records.hpp"
#include "render.hpp"

namespace etdpc::augment {

// Any deterministic text -> text function; the rng stream is derived per
// pseudo sample. Plug in an external paraphraser here if one is available.
using ParaphraseHook = std::function<std::string(const std::string&, Rng&)>;

ParaphraseHook identity_hook();

// Default hook: seeded sentence-order shuffle followed by independent word
// dropout. Output is never empty for non-empty input.
std::string default_paraphrase(const std::string& text, Rng& rng, double word_dropout = 0.1);
ParaphraseHook default_hook(double word_dropout = 0.1);

std::vector<std::string> split_sentences(const std::string& text);

struct BalancePlan {
    std::map<int, int64_t> additional;  // taxonomy index -> pseudo samples to make

    int64_t total() const {
        int64_t t = 0;
        for (const auto& [_, n] : additional) t += n;
        return t;
    }
};

// additional = max(0, floor - count) for each minority label; majority labels
// get zero even when below the floor.
BalancePlan make_balance_plan(const std::map<int, int64_t>& counts, int64_t floor = 1000);
BalancePlan make_balance_plan(const std::map<int, int64_t>& counts, int64_t floor,
                              const std::vector<std::string>& minority_labels);

// Produces n AUGMENTED records for one label: paraphrase -> width-90 wrap ->
// render -> gaussian -> salt-pepper -> blur -> contrast. Sources are the
// ORIGINAL records of the label, cycled with replacement. Each sample derives
// its own rng stream from (noise.seed, sample index), so output is
// reproducible and order-independent.
std::vector<corpus::PageRecord> augment_category(const std::vector<corpus::PageRecord>& records,
                                                 int label, int64_t n, const NoiseParams& noise,
                                                 const RenderSpec& render, const ParaphraseHook& hook);

std::vector<corpus::PageRecord> augment_category(const std::vector<const corpus::PageRecord*>& records,
                                                 int label, int64_t n, const NoiseParams& noise,
                                                 const RenderSpec& render, const ParaphraseHook& hook);

}  // namespace etdpc::augment
