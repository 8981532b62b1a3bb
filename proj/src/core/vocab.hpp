#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "records.hpp"

namespace etdpc::corpus {

struct TokenFeatures {
    std::vector<int32_t> input_word_ids;
    std::vector<int32_t> input_mask;      // 1 on a prefix, 0 on the padded suffix
    std::vector<int32_t> input_type_ids;  // all zero (single segment)
};

// Frequency vocabulary with four reserved ids: PAD=0, UNK=1, CLS=2, SEP=3.
class Vocabulary {
public:
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kUnk = 1;
    static constexpr int32_t kCls = 2;
    static constexpr int32_t kSep = 3;

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);  // full id->token list incl. specials

    static Vocabulary build(const std::vector<PageRecord>& records, int64_t max_vocab);
    static Vocabulary build_from_texts(const std::vector<std::string>& texts, int64_t max_vocab);

    int32_t id_of(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnk : it->second;
    }
    int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> index_;
};

// Lowercased tokens split on whitespace/punctuation (maximal alphanumeric
// runs; bytes >= 0x80 are treated as letters so UTF-8 sequences survive).
std::vector<std::string> split_tokens(const std::string& text);

// CLS + token ids (truncated to fit) + SEP, padded with PAD to exactly L.
TokenFeatures tokenize(const std::string& text, const Vocabulary& vocab, int64_t seq_len);

}  // namespace etdpc::corpus
