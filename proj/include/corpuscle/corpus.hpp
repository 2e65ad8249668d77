#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace corpuscle::corpus {

struct Document {
    std::string id;
    int64_t shard = 0;
    std::string text;
    std::optional<std::string> url;
    int64_t char_count = 0;  // Unicode scalar values, not bytes
};

struct Chunk {
    std::string doc_id;
    int64_t index = 0;
    int64_t char_start = 0;
    int64_t char_end = 0;
    std::string text;
    bool scorable = true;
};

struct ChunkPolicy {
    int64_t max_chars = 1200;
    int64_t min_scorable_chars = 600;
};

// Unicode NFKC with C0/C1 control characters other than \n and \t removed.
// Total on valid UTF-8; invalid byte sequences become U+FFFD first.
std::string normalize_text(std::string_view text);

std::vector<Chunk> chunk_document(const Document& doc, const ChunkPolicy& policy);

struct IngestStats {
    int64_t records = 0;       // lines seen (non-blank)
    int64_t documents = 0;     // documents yielded
    int64_t skipped_empty = 0; // records with missing/empty/whitespace text
    int64_t malformed = 0;     // JSON parse failures
};

// Streams documents out of one newline-delimited JSON shard file, optionally
// gzip-compressed (detected by magic bytes). Records must carry a "text"
// field; a missing "id" is synthesized as "<shard>-<record_index>".
// Malformed lines are counted and skipped; if more than 1% of the records in
// the shard are malformed the whole shard fails.
class ShardReader {
  public:
    ShardReader(const std::filesystem::path& path, int64_t shard);
    ~ShardReader();
    ShardReader(const ShardReader&) = delete;
    ShardReader& operator=(const ShardReader&) = delete;

    // Next document, or nullopt at end of file. Throws on I/O errors and on
    // the >1% malformed-record budget (checked at end of file).
    std::optional<Document> next();

    const IngestStats& stats() const { return stats_; }

  private:
    struct Impl;
    Impl* impl_;
    int64_t shard_;
    int64_t record_index_ = 0;
    IngestStats stats_;
};

std::vector<Document> load_documents(const std::filesystem::path& path, int64_t shard,
                                     IngestStats* stats = nullptr);

}  // namespace corpuscle::corpus
