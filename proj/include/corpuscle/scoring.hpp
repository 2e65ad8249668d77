#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpuscle/corpus.hpp"

namespace corpuscle::scoring {

struct ChunkScore {
    std::string doc_id;
    int64_t chunk_index = 0;
    double toxicity = 0.0;    // in [0,1]
    double loss = 0.0;        // per-token cross-entropy, nats
    int64_t char_count = 0;   // chunk length; weight for loss aggregation
};

struct DocScore {
    std::string doc_id;
    int64_t shard = 0;
    std::optional<double> toxicity;
    std::optional<double> loss;
    int64_t scored_chunks = 0;
};

struct ScorePair {
    double toxicity = 0.0;
    double loss = 0.0;
};

class Scorer {
  public:
    virtual ~Scorer() = default;
    // One ScorePair per input text, parallel order.
    virtual std::vector<ScorePair> score(std::span<const std::string> texts) = 0;
};

// POST /score {"texts": [...]} -> {"toxicity": [...], "loss": [...]}.
// Retries transient failures 3 times with exponential backoff; validates
// that returned values are in range (out-of-range fails fast).
class HttpScorer : public Scorer {
  public:
    explicit HttpScorer(std::string url, int timeout_seconds = 60);
    ~HttpScorer() override;
    std::vector<ScorePair> score(std::span<const std::string> texts) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Deterministic test scorer.
//   toxicity = (count of lexicon words) / (word count), words split on
//              whitespace; 0 for empty text.
//   loss     = uniform value in [0, 10) derived from a hash of the text.
class StubScorer : public Scorer {
  public:
    explicit StubScorer(std::vector<std::string> lexicon = {"toxique"});
    std::vector<ScorePair> score(std::span<const std::string> texts) override;
    ScorePair score_one(const std::string& text) const;

  private:
    std::vector<std::string> lexicon_;
};

// Builds a scorer from a URL; "stub:" or "stub://..." selects StubScorer.
std::unique_ptr<Scorer> make_scorer(const std::string& url,
                                    std::vector<std::string> stub_lexicon = {"toxique"});

// Scores the scorable chunks (others are skipped), preserving input order.
std::vector<ChunkScore> score_chunks(std::span<const corpus::Chunk> chunks, Scorer& scorer,
                                     int64_t batch_size);

// toxicity = max over chunks; loss = chunk-character-length-weighted mean.
DocScore aggregate_document_scores(const corpus::Document& doc,
                                   std::span<const ChunkScore> scores);

}  // namespace corpuscle::scoring
