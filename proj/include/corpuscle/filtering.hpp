#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "corpuscle/scoring.hpp"

namespace corpuscle::filtering {

struct FilterPolicy {
    double toxicity_max = 0.5;
    double loss_low_quantile = 0.2;
    double loss_abs_max = 10.0;
};

enum class RemovalReason { kToxicity, kLossLow, kLossHigh };

std::string to_string(RemovalReason r);

struct FilterDecision {
    std::string doc_id;
    bool keep = true;
    std::set<RemovalReason> reasons;  // empty iff keep
};

struct FilterReport {
    int64_t total_docs = 0;
    int64_t removed_toxicity = 0;
    int64_t removed_loss_low = 0;
    int64_t removed_loss_high = 0;
    int64_t kept = 0;
    int64_t unscored_kept = 0;
    std::map<int64_t, double> per_shard_loss_cutoff;

    std::string to_json() const;
};

// q-quantile by linear interpolation between order statistics:
// h = q*(n-1); value = x[floor(h)] + (h - floor(h)) * (x[floor(h)+1] - x[floor(h)])
// on ascending-sorted x. Throws on empty input.
double shard_loss_cutoff(std::span<const double> losses, double q);

// Strict inequalities at every threshold. Documents with absent scores keep.
FilterDecision decide(const scoring::DocScore& doc_score, const FilterPolicy& policy,
                      double shard_cutoff);

// Two-pass filter over a corpus directory and its score store: pass 1 derives
// per-shard loss cutoffs, pass 2 decides and copies kept documents (original
// shard order) into out_dir. Shards present in the corpus but missing from
// the score store are a hard error.
FilterReport run_filter(const std::filesystem::path& score_store,
                        const std::filesystem::path& corpus_dir, const FilterPolicy& policy,
                        const std::filesystem::path& out_dir, int jobs = 1);

// Score-store (JSONL) helpers shared by the filter and the CLI.
std::string doc_score_to_json(const scoring::DocScore& s);
scoring::DocScore doc_score_from_json(const std::string& line);
std::vector<scoring::DocScore> load_score_shard(const std::filesystem::path& path);

// Shard index parsed from the trailing digit run of a file stem, e.g.
// "shard-00012.jsonl" -> 12. Returns -1 when no digits are present.
int64_t shard_index_from_name(const std::filesystem::path& path);

}  // namespace corpuscle::filtering
