#include "vocab.hpp"

#include <algorithm>
#include <map>

namespace etdpc::corpus {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 4) throw DataError("vocabulary must include the four reserved tokens");
    for (size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int32_t>(i));
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto is_token_char = [](unsigned char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    };
    for (unsigned char c : text) {
        if (is_token_char(c)) {
            cur += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary Vocabulary::build_from_texts(const std::vector<std::string>& texts, int64_t max_vocab) {
    if (max_vocab < 5) throw ConfigError("max_vocab must be at least 5 (4 reserved ids + 1 token)");
    if (texts.empty()) throw DataError("cannot build a vocabulary from zero records");

    // std::map keeps ties resolved lexicographically after the stable sort below.
    std::map<std::string, int64_t> freq;
    for (const std::string& t : texts)
        for (const std::string& tok : split_tokens(t)) ++freq[tok];

    std::vector<std::pair<std::string, int64_t>> items(freq.begin(), freq.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> tokens{"<pad>", "<unk>", "<cls>", "<sep>"};
    const int64_t budget = max_vocab - 4;
    for (int64_t i = 0; i < budget && i < static_cast<int64_t>(items.size()); ++i)
        tokens.push_back(items[static_cast<size_t>(i)].first);
    return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::build(const std::vector<PageRecord>& records, int64_t max_vocab) {
    if (records.empty()) throw DataError("cannot build a vocabulary from zero records");
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.full_text);
    return build_from_texts(texts, max_vocab);
}

TokenFeatures tokenize(const std::string& text, const Vocabulary& vocab, int64_t seq_len) {
    if (seq_len < 3) throw ConfigError("sequence length must be at least 3 (CLS + token + SEP)");
    TokenFeatures f;
    f.input_word_ids.assign(static_cast<size_t>(seq_len), Vocabulary::kPad);
    f.input_mask.assign(static_cast<size_t>(seq_len), 0);
    f.input_type_ids.assign(static_cast<size_t>(seq_len), 0);

    const std::vector<std::string> toks = split_tokens(text);
    const int64_t body = std::min<int64_t>(static_cast<int64_t>(toks.size()), seq_len - 2);
    int64_t pos = 0;
    f.input_word_ids[static_cast<size_t>(pos++)] = Vocabulary::kCls;
    for (int64_t i = 0; i < body; ++i)
        f.input_word_ids[static_cast<size_t>(pos++)] = vocab.id_of(toks[static_cast<size_t>(i)]);
    f.input_word_ids[static_cast<size_t>(pos++)] = Vocabulary::kSep;
    for (int64_t i = 0; i < pos; ++i) f.input_mask[static_cast<size_t>(i)] = 1;
    return f;
}

}  // namespace etdpc::corpus
