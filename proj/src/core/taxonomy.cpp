#include "taxonomy.hpp"

namespace etdpc::corpus {

Taxonomy::Taxonomy()
    : labels_{"Chapters",      "Appendices",     "ReferenceList",  "TableofContent",
              "TitlePage",     "Abstract",       "ListofFigures",  "Acknowledgment",
              "ListofTables",  "CurriculumVitae", "Dedication",    "ChapterAbstract",
              "Other"} {}

const Taxonomy& Taxonomy::standard() {
    static const Taxonomy instance;
    return instance;
}

int Taxonomy::index_of(const std::string& label) const {
    const int idx = find(label);
    if (idx < 0) throw DataError("unknown category label: '" + label + "'");
    return idx;
}

int Taxonomy::find(const std::string& label) const {
    for (size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> Taxonomy::non_chapter_labels() const {
    std::vector<std::string> out;
    for (const auto& l : labels_)
        if (l != "Chapters") out.push_back(l);
    return out;
}

const std::vector<std::string>& Taxonomy::minority_labels() {
    static const std::vector<std::string> minority{
        "Abstract",       "ListofFigures", "Acknowledgment", "ListofTables",
        "CurriculumVitae", "Dedication",    "ChapterAbstract"};
    return minority;
}

}  // namespace etdpc::corpus
