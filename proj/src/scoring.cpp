#include "corpuscle/scoring.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "corpuscle/utf8.hpp"

namespace corpuscle::scoring {

namespace {

void validate_pair(const ScorePair& p) {
    if (!(p.toxicity >= 0.0 && p.toxicity <= 1.0))
        throw std::runtime_error("scorer returned toxicity out of [0,1]: " +
                                 std::to_string(p.toxicity));
    if (!std::isfinite(p.loss) || p.loss < 0.0)
        throw std::runtime_error("scorer returned invalid loss: " + std::to_string(p.loss));
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

struct HttpScorer::Impl {
    std::string host;
    std::string path;
    int timeout = 60;
    std::unique_ptr<httplib::Client> client;
};

HttpScorer::HttpScorer(std::string url, int timeout_seconds) : impl_(new Impl) {
    impl_->timeout = timeout_seconds;
    impl_->client = std::make_unique<httplib::Client>(url);
    impl_->client->set_read_timeout(timeout_seconds, 0);
    impl_->client->set_connection_timeout(timeout_seconds, 0);
}

HttpScorer::~HttpScorer() = default;

std::vector<ScorePair> HttpScorer::score(std::span<const std::string> texts) {
    nlohmann::json req;
    req["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    const std::string body = req.dump();

    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
        auto res = impl_->client->Post("/score", body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error: HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw std::runtime_error("scorer rejected request: HTTP " +
                                     std::to_string(res->status));
        nlohmann::json j = nlohmann::json::parse(res->body);
        const auto& tox = j.at("toxicity");
        const auto& loss = j.at("loss");
        if (tox.size() != texts.size() || loss.size() != texts.size())
            throw std::runtime_error("scorer response arrays not parallel to request");
        std::vector<ScorePair> out(texts.size());
        for (size_t i = 0; i < texts.size(); ++i) {
            out[i] = {tox[i].get<double>(), loss[i].get<double>()};
            validate_pair(out[i]);
        }
        return out;
    }
    throw std::runtime_error("scorer unreachable after 3 attempts: " + last_error);
}

StubScorer::StubScorer(std::vector<std::string> lexicon) : lexicon_(std::move(lexicon)) {}

ScorePair StubScorer::score_one(const std::string& text) const {
    int64_t words = 0;
    int64_t hits = 0;
    std::istringstream iss(text);
    std::string word;
    while (iss >> word) {
        ++words;
        if (std::find(lexicon_.begin(), lexicon_.end(), word) != lexicon_.end()) ++hits;
    }
    ScorePair p;
    p.toxicity = words == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(words);
    p.loss = 10.0 * (static_cast<double>(splitmix64(fnv1a(text)) >> 11) / 9007199254740992.0);
    return p;
}

std::vector<ScorePair> StubScorer::score(std::span<const std::string> texts) {
    std::vector<ScorePair> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(score_one(t));
    return out;
}

std::unique_ptr<Scorer> make_scorer(const std::string& url,
                                    std::vector<std::string> stub_lexicon) {
    if (url == "stub:" || url.rfind("stub://", 0) == 0)
        return std::make_unique<StubScorer>(std::move(stub_lexicon));
    return std::make_unique<HttpScorer>(url);
}

std::vector<ChunkScore> score_chunks(std::span<const corpus::Chunk> chunks, Scorer& scorer,
                                     int64_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("score_chunks: batch_size must be >= 1");
    std::vector<const corpus::Chunk*> scorable;
    for (const auto& c : chunks)
        if (c.scorable) scorable.push_back(&c);

    std::vector<ChunkScore> out;
    out.reserve(scorable.size());
    for (size_t i = 0; i < scorable.size(); i += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(scorable.size(), i + static_cast<size_t>(batch_size));
        std::vector<std::string> texts;
        texts.reserve(end - i);
        for (size_t k = i; k < end; ++k) texts.push_back(scorable[k]->text);
        auto pairs = scorer.score(texts);
        if (pairs.size() != texts.size())
            throw std::runtime_error("scorer returned wrong cardinality");
        for (size_t k = i; k < end; ++k) {
            const auto& pair = pairs[k - i];
            validate_pair(pair);
            ChunkScore s;
            s.doc_id = scorable[k]->doc_id;
            s.chunk_index = scorable[k]->index;
            s.toxicity = pair.toxicity;
            s.loss = pair.loss;
            s.char_count = scorable[k]->char_end - scorable[k]->char_start;
            out.push_back(std::move(s));
        }
    }
    return out;
}

DocScore aggregate_document_scores(const corpus::Document& doc,
                                   std::span<const ChunkScore> scores) {
    DocScore d;
    d.doc_id = doc.id;
    d.shard = doc.shard;
    d.scored_chunks = static_cast<int64_t>(scores.size());
    if (scores.empty()) return d;

    double max_tox = 0.0;
    double weighted_loss = 0.0;
    double total_weight = 0.0;
    for (const auto& s : scores) {
        if (s.doc_id != doc.id)
            throw std::invalid_argument("aggregate_document_scores: score for foreign doc_id " +
                                        s.doc_id);
        max_tox = std::max(max_tox, s.toxicity);
        const double w = static_cast<double>(std::max<int64_t>(s.char_count, 1));
        weighted_loss += w * s.loss;
        total_weight += w;
    }
    d.toxicity = max_tox;
    d.loss = weighted_loss / total_weight;
    return d;
}

}  // namespace corpuscle::scoring
