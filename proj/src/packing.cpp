#include "corpuscle/packing.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace corpuscle::packing {

Packer::Packer(int64_t sample_len, std::optional<int> separator_id)
    : sample_len_(sample_len), separator_id_(separator_id) {
    if (sample_len < 2) throw std::invalid_argument("Packer: sample_len must be >= 2");
}

void Packer::feed(std::span<const int> doc_ids,
                  const std::function<void(PackedSample&&)>& sink) {
    buffer_.insert(buffer_.end(), doc_ids.begin(), doc_ids.end());
    total_tokens_ += static_cast<int64_t>(doc_ids.size());
    if (separator_id_) {
        buffer_.push_back(*separator_id_);
        ++total_tokens_;
    }
    drain(sink);
}

void Packer::drain(const std::function<void(PackedSample&&)>& sink) {
    size_t offset = 0;
    while (buffer_.size() - offset >= static_cast<size_t>(sample_len_)) {
        PackedSample s;
        s.token_ids.assign(buffer_.begin() + static_cast<ptrdiff_t>(offset),
                           buffer_.begin() + static_cast<ptrdiff_t>(offset + sample_len_));
        offset += static_cast<size_t>(sample_len_);
        ++samples_emitted_;
        sink(std::move(s));
    }
    if (offset > 0) buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<ptrdiff_t>(offset));
}

struct PackWriter::Impl {
    std::ofstream out;
    std::filesystem::path bin_path;
};

PackWriter::PackWriter(const std::filesystem::path& bin_path, int64_t sample_len, int vocab_size)
    : impl_(new Impl), sample_len_(sample_len), vocab_size_(vocab_size) {
    impl_->bin_path = bin_path;
    impl_->out.open(bin_path, std::ios::binary | std::ios::trunc);
    if (!impl_->out) {
        delete impl_;
        throw std::runtime_error("cannot open pack output: " + bin_path.string());
    }
}

PackWriter::~PackWriter() {
    try {
        close();
    } catch (...) {
    }
    delete impl_;
}

void PackWriter::write(const PackedSample& sample) {
    if (static_cast<int64_t>(sample.token_ids.size()) != sample_len_)
        throw std::invalid_argument("PackWriter: sample of wrong length");
    for (int id : sample.token_ids) {
        if (id < 0 || id >= vocab_size_)
            throw std::invalid_argument("PackWriter: token id out of range");
        const auto u = static_cast<uint32_t>(id);
        const unsigned char bytes[4] = {static_cast<unsigned char>(u & 0xFF),
                                        static_cast<unsigned char>((u >> 8) & 0xFF),
                                        static_cast<unsigned char>((u >> 16) & 0xFF),
                                        static_cast<unsigned char>((u >> 24) & 0xFF)};
        impl_->out.write(reinterpret_cast<const char*>(bytes), 4);
    }
    ++sample_count_;
}

void PackWriter::close() {
    if (closed_) return;
    closed_ = true;
    impl_->out.flush();
    if (!impl_->out) throw std::runtime_error("pack write failed");
    impl_->out.close();

    nlohmann::json sidecar;
    sidecar["sample_len"] = sample_len_;
    sidecar["vocab_size"] = vocab_size_;
    sidecar["sample_count"] = sample_count_;
    auto sidecar_path = impl_->bin_path;
    sidecar_path.replace_extension(".json");
    std::ofstream side(sidecar_path);
    side << sidecar.dump(2) << "\n";
    if (!side) throw std::runtime_error("cannot write pack sidecar");
}

std::vector<PackedSample> read_packed(const std::filesystem::path& bin_path) {
    auto sidecar_path = bin_path;
    sidecar_path.replace_extension(".json");
    std::ifstream side(sidecar_path);
    if (!side) throw std::runtime_error("missing pack sidecar: " + sidecar_path.string());
    nlohmann::json sidecar = nlohmann::json::parse(side);
    const int64_t sample_len = sidecar.at("sample_len").get<int64_t>();
    const int64_t sample_count = sidecar.at("sample_count").get<int64_t>();

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open pack file: " + bin_path.string());
    std::vector<PackedSample> samples;
    samples.reserve(static_cast<size_t>(sample_count));
    std::vector<unsigned char> buf(static_cast<size_t>(sample_len) * 4);
    for (int64_t s = 0; s < sample_count; ++s) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw std::runtime_error("pack file truncated");
        PackedSample ps;
        ps.token_ids.reserve(static_cast<size_t>(sample_len));
        for (int64_t i = 0; i < sample_len; ++i) {
            const size_t o = static_cast<size_t>(i) * 4;
            ps.token_ids.push_back(static_cast<int>(
                static_cast<uint32_t>(buf[o]) | (static_cast<uint32_t>(buf[o + 1]) << 8) |
                (static_cast<uint32_t>(buf[o + 2]) << 16) |
                (static_cast<uint32_t>(buf[o + 3]) << 24)));
        }
        samples.push_back(std::move(ps));
    }
    return samples;
}

}  // namespace corpuscle::packing
