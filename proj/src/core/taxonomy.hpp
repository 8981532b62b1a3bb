#pragma once

#include <array>
#include <string>
#include <vector>

#include "errors.hpp"

namespace etdpc::corpus {

enum class Level1 { kChapter, kNonChapter };

// The fixed 13-way page taxonomy. Label indices follow this order everywhere
// (reports, confusion matrices, serialized ids), so they must never be
// re-ordered.
class Taxonomy {
public:
    static constexpr int kCategoryCount = 13;

    static const Taxonomy& standard();

    const std::vector<std::string>& labels() const { return labels_; }
    int index_of(const std::string& label) const;            // throws DataError on unknown label
    int find(const std::string& label) const;                // -1 on unknown
    const std::string& label(int index) const { return labels_.at(static_cast<size_t>(index)); }
    Level1 level1_of(int index) const {
        return label(index) == "Chapters" ? Level1::kChapter : Level1::kNonChapter;
    }
    int chapters_index() const { return 0; }

    // Non-chapter labels in taxonomy order; the level-2 class list.
    std::vector<std::string> non_chapter_labels() const;

    // The seven minority categories eligible for augmentation.
    static const std::vector<std::string>& minority_labels();

private:
    Taxonomy();
    std::vector<std::string> labels_;
};

}  // namespace etdpc::corpus
