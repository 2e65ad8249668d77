#include "corpuscle/corpus.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <zlib.h>

#include <nlohmann/json.hpp>
#include <stdexcept>

#include "corpuscle/utf8.hpp"

namespace corpuscle::corpus {

namespace {

const icu::Normalizer2& nfkc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status) || norm == nullptr)
        throw std::runtime_error("ICU NFKC normalizer unavailable");
    return *norm;
}

bool is_stripped_control(char32_t cp) {
    if (cp == U'\n' || cp == U'\t') return false;
    return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F);
}

}  // namespace

std::string normalize_text(std::string_view text) {
    const std::string clean = utf8::sanitize(text);
    icu::UnicodeString input = icu::UnicodeString::fromUTF8(clean);
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString normalized = nfkc().normalize(input, status);
    if (U_FAILURE(status)) throw std::runtime_error("NFKC normalization failed");
    std::string out8;
    normalized.toUTF8String(out8);

    std::string out;
    out.reserve(out8.size());
    for (size_t i = 0; i < out8.size();) {
        char32_t cp = utf8::decode(out8, i);
        if (!is_stripped_control(cp)) utf8::append(out, cp);
    }
    return out;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkPolicy& policy) {
    if (doc.text.empty()) throw std::invalid_argument("chunk_document: empty document");
    if (policy.min_scorable_chars <= 0 || policy.min_scorable_chars > policy.max_chars)
        throw std::invalid_argument("chunk_document: invalid policy");

    std::vector<Chunk> chunks;
    const std::string_view text = doc.text;
    size_t byte = 0;
    int64_t char_pos = 0;
    int64_t index = 0;
    while (byte < text.size()) {
        size_t end_byte = byte;
        int64_t chars = 0;
        while (end_byte < text.size() && chars < policy.max_chars) {
            utf8::decode(text, end_byte);
            ++chars;
        }
        Chunk c;
        c.doc_id = doc.id;
        c.index = index++;
        c.char_start = char_pos;
        c.char_end = char_pos + chars;
        c.text = std::string(text.substr(byte, end_byte - byte));
        c.scorable = chars >= policy.min_scorable_chars;
        chunks.push_back(std::move(c));
        byte = end_byte;
        char_pos += chars;
    }
    return chunks;
}

struct ShardReader::Impl {
    gzFile file = nullptr;
    std::filesystem::path path;
    bool eof = false;

    // Reads one \n-terminated line; false at end of file.
    bool read_line(std::string& line) {
        line.clear();
        char buf[1 << 16];
        for (;;) {
            if (gzgets(file, buf, sizeof(buf)) == nullptr) {
                int errnum = 0;
                const char* msg = gzerror(file, &errnum);
                if (errnum != Z_OK && errnum != Z_STREAM_END)
                    throw std::runtime_error("read error in " + path.string() + ": " + msg);
                return !line.empty();
            }
            line += buf;
            if (!line.empty() && line.back() == '\n') {
                line.pop_back();
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return true;
            }
        }
    }
};

ShardReader::ShardReader(const std::filesystem::path& path, int64_t shard)
    : impl_(new Impl), shard_(shard) {
    impl_->path = path;
    // gzopen reads plain files transparently; gzip is detected by magic bytes.
    impl_->file = gzopen(path.string().c_str(), "rb");
    if (impl_->file == nullptr) {
        delete impl_;
        throw std::runtime_error("cannot open shard file: " + path.string());
    }
}

ShardReader::~ShardReader() {
    if (impl_->file != nullptr) gzclose(impl_->file);
    delete impl_;
}

std::optional<Document> ShardReader::next() {
    std::string line;
    while (impl_->read_line(line)) {
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++stats_.records;
        const int64_t rec = record_index_++;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++stats_.malformed;
            continue;
        }
        std::string text = j.value("text", std::string{});
        if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
            ++stats_.skipped_empty;
            continue;
        }
        Document doc;
        doc.shard = shard_;
        doc.text = std::move(text);
        doc.id = j.contains("id") && j["id"].is_string() && !j["id"].get<std::string>().empty()
                     ? j["id"].get<std::string>()
                     : std::to_string(shard_) + "-" + std::to_string(rec);
        if (j.contains("url") && j["url"].is_string()) doc.url = j["url"].get<std::string>();
        doc.char_count = static_cast<int64_t>(utf8::count_codepoints(doc.text));
        ++stats_.documents;
        return doc;
    }
    if (stats_.records > 0 && stats_.malformed * 100 > stats_.records)
        throw std::runtime_error("shard " + impl_->path.string() + ": " +
                                 std::to_string(stats_.malformed) + "/" +
                                 std::to_string(stats_.records) + " records malformed (>1%)");
    return std::nullopt;
}

std::vector<Document> load_documents(const std::filesystem::path& path, int64_t shard,
                                     IngestStats* stats) {
    ShardReader reader(path, shard);
    std::vector<Document> docs;
    while (auto doc = reader.next()) docs.push_back(std::move(*doc));
    if (stats != nullptr) *stats = reader.stats();
    return docs;
}

}  // namespace corpuscle::corpus
