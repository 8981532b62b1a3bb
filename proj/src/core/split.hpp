#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "records.hpp"

namespace etdpc::corpus {

struct SplitSpec {
    double train_fraction = 0.60;
    double val_fraction = 0.25;
    double test_fraction = 0.15;
    uint64_t seed = 0;
    bool stratified = true;
    bool group_by_etd = false;  // whole-thesis assignment instead of per-page

    void validate() const;
};

struct SplitResult {
    std::vector<size_t> train, val, test;      // indices into the input sequence
    std::vector<std::string> warnings;

    size_t total() const { return train.size() + val.size() + test.size(); }
};

// Partitions records into train/val/test. Stratified mode apportions each
// category with the largest-remainder rule, so per-category deviation from the
// exact fractions is at most one record. Deterministic given the seed.
SplitResult split_dataset(const std::vector<std::string>& keys, const std::vector<int>& labels,
                          const std::vector<std::string>& etd_ids, const SplitSpec& spec);

SplitResult split_dataset(const std::vector<PageRecord>& records, const SplitSpec& spec);

// Order-independent content hash of a partition (per-part FNV over sorted keys).
uint64_t split_hash(const std::vector<std::string>& keys, const SplitResult& split);

}  // namespace etdpc::corpus
