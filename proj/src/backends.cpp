#include "corpuscle/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace corpuscle::backends {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double to_unit(uint64_t x) { return static_cast<double>(x >> 11) / 9007199254740992.0; }

double next_unit(uint64_t& state) {
    state = splitmix64(state);
    return to_unit(state);
}

}  // namespace

// ---------------------------------------------------------------------------
// sampling

int sample_from_distribution(std::span<const double> probs, const GenParams& params,
                             uint64_t& rng_state) {
    const int n = static_cast<int>(probs.size());
    const bool greedy = params.temperature == 0.0 || (params.top_k && *params.top_k == 1);

    if (greedy) {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (probs[i] > probs[best]) best = i;
        return best;
    }

    // probability-descending order, ties by ascending id
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs[a] > probs[b]; });

    size_t kept = order.size();
    if (params.top_k) {
        kept = std::min<size_t>(kept, static_cast<size_t>(*params.top_k));
    } else if (params.top_p) {
        double cum = 0.0;
        kept = order.size();
        for (size_t i = 0; i < order.size(); ++i) {
            cum += probs[order[i]];
            if (cum >= *params.top_p) {
                kept = i + 1;
                break;
            }
        }
    }

    double mass = 0.0;
    for (size_t i = 0; i < kept; ++i) mass += probs[order[i]];
    const double r = next_unit(rng_state) * mass;
    double cum = 0.0;
    for (size_t i = 0; i < kept; ++i) {
        cum += probs[order[i]];
        if (r < cum) return order[i];
    }
    return order[kept - 1];
}

// ---------------------------------------------------------------------------
// HttpBackend

struct HttpBackend::Impl {
    std::unique_ptr<httplib::Client> client;

    nlohmann::json post(const std::string& path, const nlohmann::json& req) {
        const std::string body = req.dump();
        std::string last_error;
        for (int attempt = 0; attempt < 3; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
            auto res = client->Post(path, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server error: HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw std::runtime_error("backend rejected " + path + ": HTTP " +
                                         std::to_string(res->status) + " " + res->body);
            return nlohmann::json::parse(res->body);
        }
        throw std::runtime_error("backend unreachable after 3 attempts: " + last_error);
    }
};

HttpBackend::HttpBackend(std::string url, const bpe::BpeVocab* vocab, int context_size,
                         int timeout_seconds)
    : impl_(new Impl), vocab_(vocab), context_size_(context_size) {
    impl_->client = std::make_unique<httplib::Client>(url);
    impl_->client->set_read_timeout(timeout_seconds, 0);
    impl_->client->set_connection_timeout(timeout_seconds, 0);
}

HttpBackend::~HttpBackend() = default;

GenerationResult HttpBackend::generate(const std::string& prompt, const GenParams& params) {
    nlohmann::json req;
    req["prompt"] = prompt;
    req["max_tokens"] = params.max_tokens;
    req["temperature"] = params.temperature;
    if (params.top_k) req["top_k"] = *params.top_k;
    if (params.top_p) req["top_p"] = *params.top_p;
    if (!params.stop.empty()) req["stop"] = params.stop;
    req["seed"] = params.seed;
    nlohmann::json res = impl_->post("/generate", req);
    GenerationResult out;
    out.text = res.at("text").get<std::string>();
    out.token_ids = res.at("token_ids").get<std::vector<int>>();
    if (res.contains("logprobs") && !res["logprobs"].is_null())
        out.logprobs = res["logprobs"].get<std::vector<double>>();
    return out;
}

LoglikelihoodResult HttpBackend::loglikelihood(const std::string& context,
                                               const std::string& continuation) {
    nlohmann::json req;
    req["context"] = context;
    req["continuation"] = continuation;
    nlohmann::json res = impl_->post("/loglikelihood", req);
    LoglikelihoodResult out;
    out.sum_logprob = res.at("sum_logprob").get<double>();
    out.per_token = res.at("per_token").get<std::vector<double>>();
    out.token_count = static_cast<int64_t>(out.per_token.size());
    return out;
}

LoglikelihoodResult HttpBackend::loglikelihood_tokens(std::span<const int> context,
                                                      std::span<const int> continuation) {
    if (vocab_ == nullptr)
        throw std::runtime_error("token-level scoring over HTTP requires a vocabulary");
    const std::string ctx = bpe::decode({context.begin(), context.end()}, *vocab_);
    const std::string cont = bpe::decode({continuation.begin(), continuation.end()}, *vocab_);
    return loglikelihood(ctx, cont);
}

// ---------------------------------------------------------------------------
// StubBackend

StubBackend::StubBackend(const bpe::BpeVocab* vocab, StubOptions options)
    : vocab_(vocab), options_(options) {
    id_space_ = options_.stub_vocab_size > 0 ? options_.stub_vocab_size
               : vocab_ != nullptr           ? vocab_->size()
                                             : 0;
    if (id_space_ <= 0)
        throw std::invalid_argument("StubBackend: need a vocab or explicit stub_vocab_size");
}

std::vector<double> StubBackend::next_token_distribution(std::span<const int> context) const {
    std::vector<double> probs(static_cast<size_t>(id_space_));
    if (options_.uniform) {
        std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(id_space_));
        return probs;
    }
    uint64_t state = options_.model_seed;
    const size_t tail = context.size() > 4 ? context.size() - 4 : 0;
    for (size_t i = tail; i < context.size(); ++i)
        state = splitmix64(state ^ static_cast<uint64_t>(context[i] + 1));

    double max_logit = -1.0;
    std::vector<double> logits(probs.size());
    for (int i = 0; i < id_space_; ++i) {
        logits[i] = 4.0 * to_unit(splitmix64(state ^ (0x9E3779B97F4A7C15ULL *
                                                      static_cast<uint64_t>(i + 1))));
        max_logit = std::max(max_logit, logits[i]);
    }
    double z = 0.0;
    for (int i = 0; i < id_space_; ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    return probs;
}

GenerationResult StubBackend::generate(const std::string& prompt, const GenParams& params) {
    if (vocab_ == nullptr)
        throw std::runtime_error("StubBackend: string generation requires a vocabulary");
    std::vector<int> ids = bpe::encode(prompt, *vocab_);
    if (static_cast<int>(ids.size()) >= options_.context_size)
        throw std::runtime_error("prompt exceeds context size; caller must truncate");

    // rng keyed on seed and prompt so distinct prompts diverge under one seed
    uint64_t rng = splitmix64(params.seed);
    for (int id : ids) rng = splitmix64(rng ^ static_cast<uint64_t>(id + 1));

    GenerationResult out;
    out.logprobs.emplace();
    for (int t = 0; t < params.max_tokens; ++t) {
        if (static_cast<int>(ids.size()) >= options_.context_size) break;
        const auto probs = next_token_distribution(ids);
        const int id = sample_from_distribution(probs, params, rng);
        ids.push_back(id);
        out.token_ids.push_back(id);
        out.logprobs->push_back(std::log(probs[static_cast<size_t>(id)]));
        if (!params.stop.empty()) {
            const std::string text = bpe::decode(out.token_ids, *vocab_);
            bool hit = false;
            for (const auto& s : params.stop)
                if (!s.empty() && text.find(s) != std::string::npos) hit = true;
            if (hit) break;
        }
    }
    out.text = bpe::decode(out.token_ids, *vocab_);
    return out;
}

LoglikelihoodResult StubBackend::loglikelihood(const std::string& context,
                                               const std::string& continuation) {
    if (vocab_ == nullptr)
        throw std::runtime_error("StubBackend: string scoring requires a vocabulary");
    const std::vector<int> ctx = bpe::encode(context, *vocab_);
    const std::vector<int> full = bpe::encode(context + continuation, *vocab_);
    const auto split = std::min(ctx.size(), full.size());
    return loglikelihood_tokens(std::span<const int>(full.data(), split),
                                std::span<const int>(full.data() + split, full.size() - split));
}

LoglikelihoodResult StubBackend::loglikelihood_tokens(std::span<const int> context,
                                                      std::span<const int> continuation) {
    LoglikelihoodResult out;
    std::vector<int> running(context.begin(), context.end());
    for (int id : continuation) {
        double lp;
        if (options_.uniform) {
            lp = -std::log(static_cast<double>(id_space_));
        } else {
            if (id < 0 || id >= id_space_)
                throw std::runtime_error("StubBackend: token id outside the stub id space");
            const auto probs = next_token_distribution(running);
            lp = std::log(probs[static_cast<size_t>(id)]);
        }
        out.per_token.push_back(lp);
        out.sum_logprob += lp;
        running.push_back(id);
    }
    out.token_count = static_cast<int64_t>(out.per_token.size());
    return out;
}

std::unique_ptr<Backend> make_backend(const std::string& url, const bpe::BpeVocab* vocab,
                                      int context_size) {
    if (url == "stub:" || url.rfind("stub://", 0) == 0) {
        StubOptions opts;
        opts.context_size = context_size;
        opts.uniform = url.find("uniform") != std::string::npos;
        return std::make_unique<StubBackend>(vocab, opts);
    }
    return std::make_unique<HttpBackend>(url, vocab, context_size);
}

}  // namespace corpuscle::backends
