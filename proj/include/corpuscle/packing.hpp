#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace corpuscle::packing {

struct PackedSample {
    std::vector<int> token_ids;  // length == sample_len, each < vocab size
};

// Concatenates document token streams (each followed by separator_id when
// set) and splits the stream into consecutive sample_len windows. The final
// partial window is dropped.
class Packer {
  public:
    explicit Packer(int64_t sample_len = 2049, std::optional<int> separator_id = std::nullopt);

    void feed(std::span<const int> doc_ids, const std::function<void(PackedSample&&)>& sink);
    // Tokens left in the buffer (the dropped tail); always < sample_len.
    int64_t pending() const { return static_cast<int64_t>(buffer_.size()); }
    int64_t samples_emitted() const { return samples_emitted_; }
    int64_t total_tokens() const { return total_tokens_; }

  private:
    int64_t sample_len_;
    std::optional<int> separator_id_;
    std::vector<int> buffer_;
    int64_t samples_emitted_ = 0;
    int64_t total_tokens_ = 0;

    void drain(const std::function<void(PackedSample&&)>& sink);
};

// Fixed-record binary writer: little-endian u32 ids, sample_len per record,
// with a JSON sidecar {sample_len, vocab_size, sample_count} next to it.
class PackWriter {
  public:
    PackWriter(const std::filesystem::path& bin_path, int64_t sample_len, int vocab_size);
    ~PackWriter();
    void write(const PackedSample& sample);
    void close();  // flushes and writes the sidecar
    int64_t sample_count() const { return sample_count_; }

  private:
    struct Impl;
    Impl* impl_;
    int64_t sample_len_;
    int vocab_size_;
    int64_t sample_count_ = 0;
    bool closed_ = false;
};

// Reads back a .bin written by PackWriter (validates against the sidecar).
std::vector<PackedSample> read_packed(const std::filesystem::path& bin_path);

}  // namespace corpuscle::packing
