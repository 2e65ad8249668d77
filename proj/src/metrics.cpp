#include "corpuscle/metrics.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "corpuscle/utf8.hpp"

namespace corpuscle::metrics {

namespace {

bool is_word_char(char32_t cp) {
    const auto t = static_cast<UCharCategory>(u_charType(static_cast<UChar32>(cp)));
    switch (t) {
        case U_UPPERCASE_LETTER:
        case U_LOWERCASE_LETTER:
        case U_TITLECASE_LETTER:
        case U_MODIFIER_LETTER:
        case U_OTHER_LETTER:
        case U_DECIMAL_DIGIT_NUMBER:
        case U_LETTER_NUMBER:
        case U_OTHER_NUMBER:
            return true;
        default:
            return false;
    }
}

bool is_punct_or_symbol(char32_t cp) {
    const auto t = static_cast<UCharCategory>(u_charType(static_cast<UChar32>(cp)));
    switch (t) {
        case U_DASH_PUNCTUATION:
        case U_START_PUNCTUATION:
        case U_END_PUNCTUATION:
        case U_CONNECTOR_PUNCTUATION:
        case U_OTHER_PUNCTUATION:
        case U_INITIAL_PUNCTUATION:
        case U_FINAL_PUNCTUATION:
            return true;
        default:
            return false;
    }
}

std::string to_lower(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        const char32_t cp = utf8::decode(s, i);
        utf8::append(out, static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp))));
    }
    return out;
}

PrfScore prf(double match, double cand_total, double ref_total) {
    PrfScore s;
    if (cand_total > 0) s.precision = match / cand_total;
    if (ref_total > 0) s.recall = match / ref_total;
    if (s.precision + s.recall > 0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

using Counts = std::map<std::vector<std::string>, int64_t>;

Counts ngram_counts(const std::vector<std::string>& tokens, size_t n) {
    Counts c;
    if (tokens.size() < n) return c;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        ++c[std::vector<std::string>(tokens.begin() + static_cast<ptrdiff_t>(i),
                                     tokens.begin() + static_cast<ptrdiff_t>(i + n))];
    return c;
}

int64_t overlap(const Counts& a, const Counts& b) {
    int64_t m = 0;
    for (const auto& [g, ca] : a) {
        auto it = b.find(g);
        if (it != b.end()) m += std::min(ca, it->second);
    }
    return m;
}

int64_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<int64_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::vector<std::string> word_tokenize(const std::string& text) {
    const std::string lower = to_lower(text);
    std::vector<std::string> tokens;
    std::string cur;
    for (size_t i = 0; i < lower.size();) {
        const char32_t cp = utf8::decode(lower, i);
        if (is_word_char(cp)) {
            utf8::append(cur, cp);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

// ---------------------------------------------------------------------------
// sliding window

WindowNll sliding_window_nll(std::span<const int> token_ids, int context_window, int stride,
                             backends::Backend& backend) {
    const auto length = static_cast<int64_t>(token_ids.size());
    if (length < 2) throw std::invalid_argument("sliding_window_nll: need >= 2 tokens");
    if (stride < 1 || context_window < stride)
        throw std::invalid_argument("sliding_window_nll: need 1 <= stride <= context_window");

    WindowNll out;
    int64_t scored_end = 1;  // token 0 has no context and is never scored
    int64_t window_end = std::min<int64_t>(context_window, length);
    for (;;) {
        const int64_t window_begin = std::max<int64_t>(0, window_end - context_window);
        const auto ctx = token_ids.subspan(static_cast<size_t>(window_begin),
                                           static_cast<size_t>(scored_end - window_begin));
        const auto cont = token_ids.subspan(static_cast<size_t>(scored_end),
                                            static_cast<size_t>(window_end - scored_end));
        const auto ll = backend.loglikelihood_tokens(ctx, cont);
        out.total_nll -= ll.sum_logprob;
        out.scored_tokens += ll.token_count;
        scored_end = window_end;
        if (window_end == length) break;
        window_end = std::min<int64_t>(window_end + stride, length);
    }
    return out;
}

PerplexityResult perplexities(double total_nll, int64_t token_count, int64_t char_count) {
    if (token_count < 1 || char_count < 1)
        throw std::invalid_argument("perplexities: counts must be >= 1");
    PerplexityResult r;
    r.total_nll = total_nll;
    r.token_count = token_count;
    r.char_count = char_count;
    r.token_ppl = std::exp(total_nll / static_cast<double>(token_count));
    r.char_ppl = std::exp(total_nll / static_cast<double>(char_count));
    return r;
}

// ---------------------------------------------------------------------------
// ROUGE

RougeTriple rouge_scores(const std::string& candidate, const std::string& reference) {
    RougeTriple out;
    const auto cand = word_tokenize(candidate);
    const auto ref = word_tokenize(reference);
    if (cand.empty() || ref.empty()) return out;

    const auto c1 = ngram_counts(cand, 1), r1 = ngram_counts(ref, 1);
    out.r1 = prf(static_cast<double>(overlap(c1, r1)), static_cast<double>(cand.size()),
                 static_cast<double>(ref.size()));

    const auto c2 = ngram_counts(cand, 2), r2 = ngram_counts(ref, 2);
    const auto cand_bigrams = cand.size() >= 2 ? cand.size() - 1 : 0;
    const auto ref_bigrams = ref.size() >= 2 ? ref.size() - 1 : 0;
    out.r2 = prf(static_cast<double>(overlap(c2, r2)), static_cast<double>(cand_bigrams),
                 static_cast<double>(ref_bigrams));

    out.rl = prf(static_cast<double>(lcs_length(cand, ref)), static_cast<double>(cand.size()),
                 static_cast<double>(ref.size()));
    return out;
}

// ---------------------------------------------------------------------------
// BLEU (sacrebleu 13a semantics)

std::vector<std::string> tokenize_13a(const std::string& line) {
    std::string s = line;
    auto replace_all = [](std::string& str, std::string_view from, std::string_view to) {
        size_t pos = 0;
        while ((pos = str.find(from, pos)) != std::string::npos) {
            str.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all(s, "<skipped>", "");
    replace_all(s, "-\n", "");
    replace_all(s, "\n", " ");
    if (s.find('&') != std::string::npos) {
        replace_all(s, "&quot;", "\"");
        replace_all(s, "&amp;", "&");
        replace_all(s, "&lt;", "<");
        replace_all(s, "&gt;", ">");
    }
    s = " " + s + " ";

    // pad the ASCII symbol/punctuation class (single chars: no overlap issues)
    std::string padded;
    padded.reserve(s.size() * 2);
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        const bool pad = (c >= 0x7B && c <= 0x7E) || (c >= 0x5B && c <= 0x60) ||
                         (c >= 0x20 && c <= 0x26) || (c >= 0x28 && c <= 0x2B) ||
                         (c >= 0x3A && c <= 0x40) || c == '/';
        if (pad) {
            padded += ' ';
            padded += ch;
            padded += ' ';
        } else {
            padded += ch;
        }
    }

    // period/comma unless adjacent to a digit; dash after a digit
    static const std::regex before(R"(([^0-9])([\.,]))");
    static const std::regex after(R"(([\.,])([^0-9]))");
    static const std::regex dash(R"(([0-9])(-))");
    padded = std::regex_replace(padded, before, "$1 $2 ");
    padded = std::regex_replace(padded, after, " $1 $2");
    padded = std::regex_replace(padded, dash, "$1 - ");

    std::vector<std::string> tokens;
    std::istringstream iss(padded);
    std::string tok;
    while (iss >> tok) tokens.push_back(tok);
    return tokens;
}

BleuScore corpus_bleu(std::span<const std::string> candidates,
                      std::span<const std::string> references) {
    if (candidates.size() != references.size() || candidates.empty())
        throw std::invalid_argument("corpus_bleu: need equal non-empty candidate/reference lists");

    BleuScore out;
    int64_t matches[4] = {0, 0, 0, 0};
    int64_t totals[4] = {0, 0, 0, 0};
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto cand = tokenize_13a(candidates[i]);
        const auto ref = tokenize_13a(references[i]);
        out.candidate_len += static_cast<int64_t>(cand.size());
        out.reference_len += static_cast<int64_t>(ref.size());
        for (size_t n = 1; n <= 4; ++n) {
            const auto cc = ngram_counts(cand, n);
            const auto rc = ngram_counts(ref, n);
            matches[n - 1] += overlap(cc, rc);
            totals[n - 1] +=
                cand.size() >= n ? static_cast<int64_t>(cand.size() - n + 1) : 0;
        }
    }

    out.brevity_penalty =
        out.candidate_len == 0 ? 0.0
        : out.candidate_len < out.reference_len
            ? std::exp(1.0 - static_cast<double>(out.reference_len) /
                                 static_cast<double>(out.candidate_len))
            : 1.0;

    double log_sum = 0.0;
    bool zero = false;
    for (int n = 0; n < 4; ++n) {
        out.precisions[n] =
            totals[n] > 0 ? static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
        if (out.precisions[n] <= 0.0)
            zero = true;
        else
            log_sum += std::log(out.precisions[n]);
    }
    out.bleu = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / 4.0) * 100.0;
    return out;
}

// ---------------------------------------------------------------------------
// SQuAD EM / F1

const std::vector<std::string> kFrenchArticles = {"le", "la",  "les", "l'", "un",
                                                  "une", "des", "du",  "de", "d'"};

std::string squad_normalize(const std::string& text, const std::vector<std::string>& articles) {
    const std::string lower = to_lower(text);

    // whitespace tokens, articles removed before punctuation stripping so
    // elided forms like "l'" still match
    std::vector<std::string> tokens;
    std::istringstream iss(lower);
    std::string raw;
    while (iss >> raw) {
        std::string tok = raw;
        bool dropped = false;
        for (const auto& art : articles) {
            if (tok == art) {
                dropped = true;
                break;
            }
            if (art.back() == '\'' && tok.size() > art.size() && tok.rfind(art, 0) == 0) {
                tok = tok.substr(art.size());
                break;
            }
        }
        if (dropped) continue;
        std::string clean;
        for (size_t i = 0; i < tok.size();) {
            const char32_t cp = utf8::decode(tok, i);
            if (!is_punct_or_symbol(cp)) utf8::append(clean, cp);
        }
        if (!clean.empty()) tokens.push_back(std::move(clean));
    }

    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

SquadScore squad_em_f1(const std::string& prediction, std::span<const std::string> gold_answers,
                       bool no_answer_prediction, const std::vector<std::string>& articles) {
    SquadScore score;
    if (no_answer_prediction) {
        score.em = gold_answers.empty() ? 1 : 0;
        score.f1 = score.em;
        return score;
    }
    if (gold_answers.empty()) return score;  // answerable gold missing, prediction given

    const std::string pred_norm = squad_normalize(prediction, articles);
    std::istringstream piss(pred_norm);
    std::unordered_map<std::string, int64_t> pred_bag;
    int64_t pred_total = 0;
    std::string tok;
    while (piss >> tok) {
        ++pred_bag[tok];
        ++pred_total;
    }

    for (const auto& gold : gold_answers) {
        const std::string gold_norm = squad_normalize(gold, articles);
        if (pred_norm == gold_norm) score.em = 1;

        std::istringstream giss(gold_norm);
        std::unordered_map<std::string, int64_t> gold_bag;
        int64_t gold_total = 0;
        while (giss >> tok) {
            ++gold_bag[tok];
            ++gold_total;
        }
        double f1 = 0.0;
        if (pred_total == 0 && gold_total == 0) {
            f1 = 1.0;
        } else if (pred_total > 0 && gold_total > 0) {
            int64_t common = 0;
            for (const auto& [w, c] : pred_bag) {
                auto it = gold_bag.find(w);
                if (it != gold_bag.end()) common += std::min(c, it->second);
            }
            if (common > 0) {
                const double p = static_cast<double>(common) / static_cast<double>(pred_total);
                const double r = static_cast<double>(common) / static_cast<double>(gold_total);
                f1 = 2.0 * p * r / (p + r);
            }
        }
        score.f1 = std::max(score.f1, f1);
    }
    if (score.em == 1) score.f1 = 1.0;
    return score;
}

// ---------------------------------------------------------------------------
// sentence clipping

std::string clip_sentences(const std::string& text, int max_sentences) {
    if (max_sentences < 1) throw std::invalid_argument("clip_sentences: max_sentences >= 1");
    int seen = 0;
    size_t end = text.size();
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '.') {
            ++seen;
            if (seen == max_sentences) {
                end = i + 1;
                break;
            }
        }
    }
    std::string out = text.substr(0, end);
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

}  // namespace corpuscle::metrics
