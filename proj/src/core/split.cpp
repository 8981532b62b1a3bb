#include "split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "rng.hpp"

namespace etdpc::corpus {

namespace {

// Largest-remainder apportionment of n into three parts; every part lands
// within one of its exact share.
std::array<size_t, 3> apportion(size_t n, const std::array<double, 3>& fractions) {
    std::array<double, 3> exact{};
    std::array<size_t, 3> base{};
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        exact[i] = fractions[i] * static_cast<double>(n);
        base[i] = static_cast<size_t>(std::floor(exact[i] + 1e-12));
        assigned += base[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return exact[a] - std::floor(exact[a] + 1e-12) > exact[b] - std::floor(exact[b] + 1e-12);
    });
    long long leftover = static_cast<long long>(n) - static_cast<long long>(assigned);
    for (long long i = 0; i < leftover; ++i) ++base[order[static_cast<size_t>(i) % 3]];
    for (long long i = 0; i > leftover; --i) {
        for (int k = 2; k >= 0; --k)
            if (base[order[k]] > 0) {
                --base[order[k]];
                break;
            }
    }
    return base;
}

void distribute(const std::vector<size_t>& pool, const std::array<size_t, 3>& counts,
                SplitResult& out) {
    size_t pos = 0;
    for (size_t i = 0; i < counts[0]; ++i) out.train.push_back(pool[pos++]);
    for (size_t i = 0; i < counts[1]; ++i) out.val.push_back(pool[pos++]);
    for (size_t i = 0; i < counts[2]; ++i) out.test.push_back(pool[pos++]);
}

}  // namespace

void SplitSpec::validate() const {
    auto open_unit = [](double f) { return f > 0.0 && f < 1.0; };
    if (!open_unit(train_fraction) || !open_unit(val_fraction) || !open_unit(test_fraction))
        throw ConfigError("split fractions must each lie in (0,1)");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
}

SplitResult split_dataset(const std::vector<std::string>& keys, const std::vector<int>& labels,
                          const std::vector<std::string>& etd_ids, const SplitSpec& spec) {
    spec.validate();
    if (keys.size() != labels.size() || (!etd_ids.empty() && etd_ids.size() != keys.size()))
        throw DataError("split_dataset: keys/labels/etd_ids length mismatch");
    const std::array<double, 3> fr{spec.train_fraction, spec.val_fraction, spec.test_fraction};
    SplitResult out;

    if (spec.group_by_etd) {
        if (etd_ids.empty()) throw ConfigError("group_by_etd split requires etd ids");
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < keys.size(); ++i) groups[etd_ids[i]].push_back(i);
        std::vector<std::string> names;
        for (const auto& [name, _] : groups) names.push_back(name);
        Rng rng(derive_seed(spec.seed, "split-groups"));
        rng.shuffle(names);
        // Greedy: each thesis goes to the part with the largest remaining deficit.
        std::array<double, 3> want{fr[0] * keys.size(), fr[1] * keys.size(), fr[2] * keys.size()};
        std::array<double, 3> got{};
        std::array<std::vector<size_t>*, 3> parts{&out.train, &out.val, &out.test};
        for (const std::string& name : names) {
            int best = 0;
            for (int i = 1; i < 3; ++i)
                if (want[i] - got[i] > want[best] - got[best]) best = i;
            for (size_t idx : groups[name]) parts[best]->push_back(idx);
            got[best] += static_cast<double>(groups[name].size());
        }
    } else if (spec.stratified) {
        std::map<int, std::vector<size_t>> strata;
        for (size_t i = 0; i < labels.size(); ++i) strata[labels[i]].push_back(i);
        const Taxonomy& tax = Taxonomy::standard();
        for (auto& [label, pool] : strata) {
            if (pool.size() < 3)
                out.warnings.push_back("category " + tax.label(label) + " has only " +
                                       std::to_string(pool.size()) +
                                       " records; stratified split is best-effort");
            Rng rng(derive_seed(spec.seed, "split-stratum", static_cast<uint64_t>(label)));
            rng.shuffle(pool);
            distribute(pool, apportion(pool.size(), fr), out);
        }
    } else {
        std::vector<size_t> pool(keys.size());
        for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        Rng rng(derive_seed(spec.seed, "split-flat"));
        rng.shuffle(pool);
        distribute(pool, apportion(pool.size(), fr), out);
    }

    // Never leave the overall test set empty when input exists.
    if (out.test.empty() && !keys.empty()) {
        std::vector<size_t>* donor = !out.train.empty() ? &out.train : &out.val;
        if (!donor->empty()) {
            out.test.push_back(donor->back());
            donor->pop_back();
            out.warnings.push_back("moved one record into the otherwise-empty test split");
        }
    }
    return out;
}

SplitResult split_dataset(const std::vector<PageRecord>& records, const SplitSpec& spec) {
    std::vector<std::string> keys;
    std::vector<int> labels;
    std::vector<std::string> etds;
    keys.reserve(records.size());
    for (const auto& r : records) {
        keys.push_back(r.key());
        labels.push_back(r.label);
        etds.push_back(r.etd_id);
    }
    return split_dataset(keys, labels, etds, spec);
}

uint64_t split_hash(const std::vector<std::string>& keys, const SplitResult& split) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_part = [&](const std::vector<size_t>& part, const char* tag) {
        std::vector<std::string> sorted;
        sorted.reserve(part.size());
        for (size_t i : part) sorted.push_back(keys.at(i));
        std::sort(sorted.begin(), sorted.end());
        h = fnv1a64(tag, h);
        for (const auto& k : sorted) h = fnv1a64(k + ";", h);
    };
    mix_part(split.train, "|train|");
    mix_part(split.val, "|val|");
    mix_part(split.test, "|test|");
    return h;
}

}  // namespace etdpc::corpus
