#include "corpuscle/bpe.hpp"

#include <unicode/uchar.h>

#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "corpuscle/utf8.hpp"

namespace corpuscle::bpe {

namespace {

bool is_letter(char32_t cp) {
    const auto t = static_cast<UCharCategory>(u_charType(static_cast<UChar32>(cp)));
    return t == U_UPPERCASE_LETTER || t == U_LOWERCASE_LETTER || t == U_TITLECASE_LETTER ||
           t == U_MODIFIER_LETTER || t == U_OTHER_LETTER;
}

bool is_number(char32_t cp) {
    const auto t = static_cast<UCharCategory>(u_charType(static_cast<UChar32>(cp)));
    return t == U_DECIMAL_DIGIT_NUMBER || t == U_LETTER_NUMBER || t == U_OTHER_NUMBER;
}

// Python str.isspace() semantics: Unicode White_Space plus the C0 separator
// block U+001C..U+001F (bidi classes B and S).
bool is_space(char32_t cp) {
    if (cp >= 0x1C && cp <= 0x1F) return true;
    return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

std::string merge_key(const std::string& left, const std::string& right) {
    std::string k = left;
    k.push_back('\0');
    k += right;
    return k;
}

}  // namespace

void BpeVocab::init_byte_maps() {
    // Printable bytes map to themselves, the rest to 256+n in byte order.
    std::array<bool, 256> printable{};
    for (int b = '!'; b <= '~'; ++b) printable[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) {
        byte_encoder_[b] = printable[b] ? static_cast<char32_t>(b) : next++;
        byte_decoder_[byte_encoder_[b]] = b;
    }
}

BpeVocab BpeVocab::load(const std::filesystem::path& vocab_json,
                        const std::filesystem::path& merges_txt) {
    BpeVocab v;
    v.init_byte_maps();

    std::ifstream vin(vocab_json);
    if (!vin) throw std::runtime_error("cannot open vocab file: " + vocab_json.string());
    nlohmann::json j = nlohmann::json::parse(vin);
    int max_id = -1;
    for (const auto& [token, id] : j.items()) max_id = std::max(max_id, id.get<int>());
    v.id_to_token_.resize(max_id + 1);
    for (const auto& [token, id] : j.items()) {
        v.token_to_id_[token] = id.get<int>();
        v.id_to_token_[id.get<int>()] = token;
    }

    std::ifstream min(merges_txt);
    if (!min) throw std::runtime_error("cannot open merges file: " + merges_txt.string());
    std::string line;
    int rank = 0;
    bool first = true;
    while (std::getline(min, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && line.rfind("#version", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        const size_t sp = line.find(' ');
        if (sp == std::string::npos)
            throw std::runtime_error("malformed merges line: " + line);
        v.merge_ranks_[merge_key(line.substr(0, sp), line.substr(sp + 1))] = rank++;
    }

    if (auto it = v.token_to_id_.find("<|endoftext|>"); it != v.token_to_id_.end())
        v.eot_id_ = it->second;
    return v;
}

int BpeVocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

int BpeVocab::merge_rank(const std::string& left, const std::string& right) const {
    auto it = merge_ranks_.find(merge_key(left, right));
    return it == merge_ranks_.end() ? -1 : it->second;
}

int BpeVocab::proxy_to_byte(char32_t cp) const {
    auto it = byte_decoder_.find(cp);
    return it == byte_decoder_.end() ? -1 : it->second;
}

// Hand-rolled scanner for the GPT-2 pattern
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
// over codepoints. Any non-space codepoint is a letter, a number, or "other",
// so a single space before a non-space always attaches to the next token.
std::vector<std::string> pretokenize(std::string_view text) {
    const std::vector<char32_t> cps = utf8::to_codepoints(text);
    const size_t n = cps.size();
    std::vector<std::string> out;

    auto emit = [&](size_t begin, size_t end) {
        std::string tok;
        for (size_t k = begin; k < end; ++k) utf8::append(tok, cps[k]);
        out.push_back(std::move(tok));
    };

    size_t i = 0;
    while (i < n) {
        // contraction suffixes, matched case-sensitively
        if (cps[i] == U'\'') {
            static constexpr std::u32string_view kSuffixes[] = {U"'s", U"'t", U"'re", U"'ve",
                                                                U"'m", U"'ll", U"'d"};
            bool matched = false;
            for (auto suf : kSuffixes) {
                if (i + suf.size() <= n &&
                    std::u32string_view(reinterpret_cast<const char32_t*>(cps.data()) + i,
                                        suf.size()) == suf) {
                    emit(i, i + suf.size());
                    i += suf.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }

        const bool leading_space = cps[i] == U' ' && i + 1 < n && !is_space(cps[i + 1]);
        const size_t start = i;
        const size_t j = leading_space ? i + 1 : i;

        if (j < n && is_letter(cps[j])) {
            size_t k = j;
            while (k < n && is_letter(cps[k])) ++k;
            emit(start, k);
            i = k;
            continue;
        }
        if (j < n && is_number(cps[j])) {
            size_t k = j;
            while (k < n && is_number(cps[k])) ++k;
            emit(start, k);
            i = k;
            continue;
        }
        if (j < n && !is_space(cps[j])) {
            // contraction suffixes only bind at the start of a match; an
            // apostrophe inside an "other" run is consumed by the run
            size_t k = j;
            while (k < n && !is_space(cps[k]) && !is_letter(cps[k]) && !is_number(cps[k])) ++k;
            emit(start, k);
            i = k;
            continue;
        }

        // whitespace run
        size_t k = i;
        while (k < n && is_space(cps[k])) ++k;
        if (k == n) {
            emit(i, k);  // trailing run, \s+(?!\S) takes it whole
            i = k;
        } else if (k - i >= 2) {
            emit(i, k - 1);  // leave the last space for the next token
            i = k - 1;
        } else {
            emit(i, k);  // single non-attaching whitespace char
            i = k;
        }
    }
    return out;
}

namespace {

// Greedy lowest-rank merge loop over the proxy symbols of one pre-token.
std::vector<std::string> apply_merges(std::vector<std::string> symbols, const BpeVocab& vocab) {
    while (symbols.size() >= 2) {
        int best_rank = std::numeric_limits<int>::max();
        size_t best_pos = 0;
        for (size_t i = 0; i + 1 < symbols.size(); ++i) {
            const int r = vocab.merge_rank(symbols[i], symbols[i + 1]);
            if (r >= 0 && r < best_rank) {
                best_rank = r;
                best_pos = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;
        symbols[best_pos] += symbols[best_pos + 1];
        symbols.erase(symbols.begin() + static_cast<ptrdiff_t>(best_pos) + 1);
    }
    return symbols;
}

}  // namespace

std::vector<int> encode(std::string_view text, const BpeVocab& vocab) {
    std::vector<int> ids;
    for (const std::string& pre : pretokenize(text)) {
        // each byte becomes one proxy-codepoint symbol
        std::vector<std::string> symbols;
        symbols.reserve(pre.size());
        for (unsigned char b : pre) {
            std::string sym;
            utf8::append(sym, vocab.byte_to_proxy(b));
            symbols.push_back(std::move(sym));
        }
        for (const std::string& sym : apply_merges(std::move(symbols), vocab)) {
            const int id = vocab.id_of(sym);
            if (id < 0)
                throw std::runtime_error("BPE symbol missing from vocab: " + sym);
            ids.push_back(id);
        }
    }
    return ids;
}

std::string decode(const std::vector<int>& ids, const BpeVocab& vocab) {
    std::string bytes;
    for (int id : ids) {
        if (id < 0 || id >= vocab.size())
            throw std::out_of_range("token id out of range: " + std::to_string(id));
        const std::string& tok = vocab.token(id);
        for (size_t i = 0; i < tok.size();) {
            const char32_t cp = utf8::decode(tok, i);
            const int b = vocab.proxy_to_byte(cp);
            if (b < 0)
                throw std::runtime_error("vocab token contains non-proxy codepoint");
            bytes.push_back(static_cast<char>(b));
        }
    }
    return utf8::sanitize(bytes);
}

}  // namespace corpuscle::bpe
