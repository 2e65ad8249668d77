#include "corpuscle/filtering.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "corpuscle/corpus.hpp"

namespace corpuscle::filtering {

std::string to_string(RemovalReason r) {
    switch (r) {
        case RemovalReason::kToxicity: return "TOXICITY";
        case RemovalReason::kLossLow: return "LOSS_LOW";
        case RemovalReason::kLossHigh: return "LOSS_HIGH";
    }
    return "?";
}

std::string FilterReport::to_json() const {
    nlohmann::json j;
    j["total_docs"] = total_docs;
    j["removed_toxicity"] = removed_toxicity;
    j["removed_loss_low"] = removed_loss_low;
    j["removed_loss_high"] = removed_loss_high;
    j["kept"] = kept;
    j["unscored_kept"] = unscored_kept;
    nlohmann::json cutoffs = nlohmann::json::object();
    for (const auto& [shard, cutoff] : per_shard_loss_cutoff)
        cutoffs[std::to_string(shard)] = cutoff;
    j["per_shard_loss_cutoff"] = cutoffs;
    return j.dump(2);
}

double shard_loss_cutoff(std::span<const double> losses, double q) {
    if (losses.empty()) throw std::invalid_argument("shard_loss_cutoff: empty losses");
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("shard_loss_cutoff: q not in (0,1)");
    std::vector<double> x(losses.begin(), losses.end());
    std::sort(x.begin(), x.end());
    const double h = q * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(h));
    if (lo + 1 >= x.size()) return x.back();
    return x[lo] + (h - std::floor(h)) * (x[lo + 1] - x[lo]);
}

FilterDecision decide(const scoring::DocScore& doc_score, const FilterPolicy& policy,
                      double shard_cutoff) {
    FilterDecision d;
    d.doc_id = doc_score.doc_id;
    if (doc_score.toxicity && *doc_score.toxicity > policy.toxicity_max)
        d.reasons.insert(RemovalReason::kToxicity);
    if (doc_score.loss) {
        if (*doc_score.loss < shard_cutoff) d.reasons.insert(RemovalReason::kLossLow);
        if (*doc_score.loss > policy.loss_abs_max) d.reasons.insert(RemovalReason::kLossHigh);
    }
    d.keep = d.reasons.empty();
    return d;
}

std::string doc_score_to_json(const scoring::DocScore& s) {
    nlohmann::json j;
    j["doc_id"] = s.doc_id;
    j["shard"] = s.shard;
    if (s.toxicity) j["toxicity"] = *s.toxicity;
    if (s.loss) j["loss"] = *s.loss;
    j["scored_chunks"] = s.scored_chunks;
    return j.dump();
}

scoring::DocScore doc_score_from_json(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    scoring::DocScore s;
    s.doc_id = j.at("doc_id").get<std::string>();
    s.shard = j.at("shard").get<int64_t>();
    if (j.contains("toxicity") && !j["toxicity"].is_null())
        s.toxicity = j["toxicity"].get<double>();
    if (j.contains("loss") && !j["loss"].is_null()) s.loss = j["loss"].get<double>();
    s.scored_chunks = j.value("scored_chunks", int64_t{0});
    return s;
}

std::vector<scoring::DocScore> load_score_shard(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open score shard: " + path.string());
    std::vector<scoring::DocScore> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(doc_score_from_json(line));
    }
    return out;
}

int64_t shard_index_from_name(const std::filesystem::path& path) {
    const std::string stem = path.stem().string();
    size_t end = stem.size();
    while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
    size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    if (begin == end) return -1;
    return std::stoll(stem.substr(begin, end - begin));
}

namespace {

std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        if (shard_index_from_name(e.path()) >= 0) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

FilterReport run_filter(const std::filesystem::path& score_store,
                        const std::filesystem::path& corpus_dir, const FilterPolicy& policy,
                        const std::filesystem::path& out_dir, int jobs) {
    (void)jobs;  // pass structure is shard-local; a worker pool slots in here
    const auto corpus_files = list_shards(corpus_dir);
    if (corpus_files.empty())
        throw std::runtime_error("no corpus shards found in " + corpus_dir.string());

    // Index the score store by shard.
    std::unordered_map<int64_t, std::filesystem::path> score_files;
    for (const auto& f : list_shards(score_store))
        score_files[shard_index_from_name(f)] = f;

    std::vector<int64_t> missing;
    for (const auto& f : corpus_files) {
        const int64_t shard = shard_index_from_name(f);
        if (!score_files.count(shard)) missing.push_back(shard);
    }
    if (!missing.empty()) {
        std::string msg = "score store missing shards:";
        for (int64_t s : missing) msg += " " + std::to_string(s);
        throw std::runtime_error(msg);
    }

    FilterReport report;
    std::filesystem::create_directories(out_dir);

    for (const auto& corpus_file : corpus_files) {
        const int64_t shard = shard_index_from_name(corpus_file);
        const auto scores = load_score_shard(score_files.at(shard));

        // Pass 1: per-shard loss cutoff over scored documents.
        std::vector<double> losses;
        std::unordered_map<std::string, const scoring::DocScore*> by_id;
        for (const auto& s : scores) {
            by_id[s.doc_id] = &s;
            if (s.loss) losses.push_back(*s.loss);
        }
        if (losses.empty())
            throw std::runtime_error("shard " + std::to_string(shard) +
                                     " has no scored documents");
        const double cutoff = shard_loss_cutoff(losses, policy.loss_low_quantile);
        report.per_shard_loss_cutoff[shard] = cutoff;

        // Pass 2: decide and copy kept documents in original order.
        char name[64];
        std::snprintf(name, sizeof(name), "shard-%05lld.jsonl",
                      static_cast<long long>(shard));
        std::ofstream out(out_dir / name);
        if (!out) throw std::runtime_error("cannot write filtered shard " + std::string(name));

        corpus::ShardReader reader(corpus_file, shard);
        while (auto doc = reader.next()) {
            ++report.total_docs;
            scoring::DocScore ds;
            if (auto it = by_id.find(doc->id); it != by_id.end()) ds = *it->second;
            else { ds.doc_id = doc->id; ds.shard = shard; }

            const FilterDecision d = decide(ds, policy, cutoff);
            if (d.reasons.count(RemovalReason::kToxicity)) ++report.removed_toxicity;
            if (d.reasons.count(RemovalReason::kLossLow)) ++report.removed_loss_low;
            if (d.reasons.count(RemovalReason::kLossHigh)) ++report.removed_loss_high;
            if (d.keep) {
                ++report.kept;
                if (!ds.loss && !ds.toxicity) ++report.unscored_kept;
                nlohmann::json j;
                j["id"] = doc->id;
                if (doc->url) j["url"] = *doc->url;
                j["text"] = doc->text;
                out << j.dump() << "\n";
            }
        }
    }
    return report;
}

}  // namespace corpuscle::filtering
