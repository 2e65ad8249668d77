#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace corpuscle::bpe {

// GPT-2 style byte-level BPE vocabulary: vocab.json maps byte-proxy token
// strings to ids, merges.txt lists merge rules in priority order.
class BpeVocab {
  public:
    static BpeVocab load(const std::filesystem::path& vocab_json,
                         const std::filesystem::path& merges_txt);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::string& token(int id) const { return id_to_token_.at(id); }
    int id_of(const std::string& token) const;    // -1 when absent
    int end_of_text_id() const { return eot_id_; }  // -1 when absent

    // rank of a merge pair, or -1 when the pair is not mergeable
    int merge_rank(const std::string& left, const std::string& right) const;

    // bijective byte <-> printable-proxy-codepoint map
    char32_t byte_to_proxy(uint8_t b) const { return byte_encoder_[b]; }
    int proxy_to_byte(char32_t cp) const;  // -1 when cp is not a proxy

  private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> merge_ranks_;  // "left\x00right" -> rank
    std::array<char32_t, 256> byte_encoder_{};
    std::unordered_map<char32_t, int> byte_decoder_;
    int eot_id_ = -1;

    void init_byte_maps();
};

// Splits text into GPT-2 pre-tokens: contraction suffixes, optionally
// space-prefixed letter/number/other runs, and whitespace runs (a run
// followed by a non-space keeps its last space for the next token).
std::vector<std::string> pretokenize(std::string_view text);

std::vector<int> encode(std::string_view text, const BpeVocab& vocab);

// Inverse of encode on its image; byte sequences that are not valid UTF-8
// decode with U+FFFD replacements. Throws on out-of-range ids.
std::string decode(const std::vector<int>& ids, const BpeVocab& vocab);

}  // namespace corpuscle::bpe
