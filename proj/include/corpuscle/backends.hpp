#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corpuscle/bpe.hpp"

namespace corpuscle::backends {

struct GenParams {
    int max_tokens = 16;
    double temperature = 1.0;
    std::optional<int> top_k;
    std::optional<double> top_p;  // at most one of top_k/top_p per call
    std::vector<std::string> stop;
    uint64_t seed = 42;
};

struct GenerationResult {
    std::string text;
    std::vector<int> token_ids;
    std::optional<std::vector<double>> logprobs;  // one per generated token, each <= 0
};

struct LoglikelihoodResult {
    double sum_logprob = 0.0;
    std::vector<double> per_token;
    int64_t token_count = 0;
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const std::string& prompt, const GenParams& params) = 0;
    virtual LoglikelihoodResult loglikelihood(const std::string& context,
                                              const std::string& continuation) = 0;
    // Token-level scoring used by the sliding-window perplexity protocol.
    virtual LoglikelihoodResult loglikelihood_tokens(std::span<const int> context,
                                                     std::span<const int> continuation) = 0;
    virtual int context_size() const = 0;
};

// Client for the minimal model-server protocol:
//   POST /generate      {"prompt","max_tokens","temperature","top_k"?,
//                        "top_p"?,"stop"?,"seed"} -> {"text","token_ids","logprobs"?}
//   POST /loglikelihood {"context","continuation"} -> {"sum_logprob","per_token"}
// Transient failures are retried 3 times with exponential backoff. Token-level
// scoring decodes through the configured vocabulary.
class HttpBackend : public Backend {
  public:
    HttpBackend(std::string url, const bpe::BpeVocab* vocab, int context_size = 2048,
                int timeout_seconds = 120);
    ~HttpBackend() override;
    GenerationResult generate(const std::string& prompt, const GenParams& params) override;
    LoglikelihoodResult loglikelihood(const std::string& context,
                                      const std::string& continuation) override;
    LoglikelihoodResult loglikelihood_tokens(std::span<const int> context,
                                             std::span<const int> continuation) override;
    int context_size() const override { return context_size_; }

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    const bpe::BpeVocab* vocab_;
    int context_size_;
};

struct StubOptions {
    int stub_vocab_size = 0;   // candidate id space; 0 = full vocab size
    bool uniform = false;      // uniform distribution over the id space
    uint64_t model_seed = 1234;
    int context_size = 2048;
};

// Deterministic test model: the next-token distribution is a softmax over
// hash-derived logits keyed on the last 4 context token ids. Greedy decoding
// ignores the sampling seed entirely.
class StubBackend : public Backend {
  public:
    StubBackend(const bpe::BpeVocab* vocab, StubOptions options = {});
    GenerationResult generate(const std::string& prompt, const GenParams& params) override;
    LoglikelihoodResult loglikelihood(const std::string& context,
                                      const std::string& continuation) override;
    LoglikelihoodResult loglikelihood_tokens(std::span<const int> context,
                                             std::span<const int> continuation) override;
    int context_size() const override { return options_.context_size; }

    // distribution over the candidate id space given trailing context; sums
    // to 1 within 1e-9
    std::vector<double> next_token_distribution(std::span<const int> context) const;

  private:
    const bpe::BpeVocab* vocab_;
    StubOptions options_;
    int id_space_;
};

// Shared sampling rules: temperature 0 or top_k=1 is greedy (argmax, ties to
// the lowest id); top-k keeps the k most probable; nucleus keeps the smallest
// probability-sorted prefix with cumulative mass >= p (ties by ascending id),
// then renormalizes.
int sample_from_distribution(std::span<const double> probs, const GenParams& params,
                             uint64_t& rng_state);

// Builds a backend from a URL; "stub:" or "stub://..." selects StubBackend
// ("stub://uniform" for the uniform variant).
std::unique_ptr<Backend> make_backend(const std::string& url, const bpe::BpeVocab* vocab,
                                      int context_size = 2048);

}  // namespace corpuscle::backends
