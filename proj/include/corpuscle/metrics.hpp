#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corpuscle/backends.hpp"

namespace corpuscle::metrics {

struct PerplexityResult {
    double total_nll = 0.0;  // nats
    int64_t token_count = 0;
    int64_t char_count = 0;
    double token_ppl = 0.0;
    double char_ppl = 0.0;
};

struct PrfScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RougeTriple {
    PrfScore r1;
    PrfScore r2;
    PrfScore rl;
};

struct BleuScore {
    double bleu = 0.0;  // 0..100
    double precisions[4] = {0, 0, 0, 0};
    double brevity_penalty = 1.0;
    int64_t candidate_len = 0;
    int64_t reference_len = 0;
};

struct SquadScore {
    int em = 0;
    double f1 = 0.0;
};

struct WindowNll {
    double total_nll = 0.0;
    int64_t scored_tokens = 0;
};

// Sliding-window negative log likelihood: windows end at context_window,
// context_window + stride, ... and finally at the sequence end; each window
// scores only tokens not scored before, so every token except token 0 is
// scored exactly once with up to context_window - stride tokens of context.
WindowNll sliding_window_nll(std::span<const int> token_ids, int context_window, int stride,
                             backends::Backend& backend);

PerplexityResult perplexities(double total_nll, int64_t token_count, int64_t char_count);

// ROUGE-1/2/L with lowercased, Unicode-aware word splitting (letters and
// digits are word characters), no stemming.
RougeTriple rouge_scores(const std::string& candidate, const std::string& reference);

// Corpus BLEU with mteval-13a tokenization, n-grams up to 4, corpus-level
// clipped precision, exponential brevity penalty, and no smoothing (any zero
// precision gives a score of 0).
BleuScore corpus_bleu(std::span<const std::string> candidates,
                      std::span<const std::string> references);

// SQuAD-v2 style scoring with a configurable article list; entries ending in
// an apostrophe ("l'", "d'") strip as elided prefixes.
extern const std::vector<std::string> kFrenchArticles;
SquadScore squad_em_f1(const std::string& prediction, std::span<const std::string> gold_answers,
                       bool no_answer_prediction = false,
                       const std::vector<std::string>& articles = kFrenchArticles);
std::string squad_normalize(const std::string& text,
                            const std::vector<std::string>& articles = kFrenchArticles);

// Simplistic sentence clipping: split at '.', keep the first max_sentences
// segments with their periods, trim trailing whitespace.
std::string clip_sentences(const std::string& text, int max_sentences);

// Shared by ROUGE and SQuAD: lowercase then split into letter/digit runs.
std::vector<std::string> word_tokenize(const std::string& text);

// 13a tokenization, exposed for the BLEU fixture tests.
std::vector<std::string> tokenize_13a(const std::string& line);

}  // namespace corpuscle::metrics
