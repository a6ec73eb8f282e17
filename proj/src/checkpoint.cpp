#include "qgcl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "qgcl/error.hpp"
#include "fs_util.hpp"

namespace qgcl {

namespace {

template <class U>
void put(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(const std::string& b, const std::string& origin) : b_(b), origin_(origin) {}

    template <class U>
    U get(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (b_.size() - pos_ < n)
            throw FormatError(origin_ + ": truncated while reading " + what + " at byte " + std::to_string(pos_));
    }
    const std::string& b_;
    const std::string& origin_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors<float>& tensors) {
    static_assert(std::numeric_limits<float>::is_iec559);
    std::string out = "QGCL";
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xFFFF) throw FormatError("tensor name too long: " + name.substr(0, 40));
        if (t.rank() > 0xFF) throw FormatError("tensor rank too large for '" + name + "'");
        put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape()) {
            if (d > 0xFFFFFFFFu) throw FormatError("dimension too large in '" + name + "'");
            put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        }
        for (float v : t.values()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

NamedTensors<float> decode_checkpoint(const std::string& bytes, const std::string& origin) {
    Reader r(bytes, origin);
    if (r.bytes(4, "magic") != "QGCL") throw FormatError(origin + ": not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>("entry count");
    NamedTensors<float> out;
    for (std::uint32_t e = 0; e < count; ++e) {
        const auto len = r.get<std::uint16_t>("name length");
        std::string name = r.bytes(len, "name");
        const auto rank = r.get<std::uint8_t>("rank");
        Shape shape(rank);
        for (auto& d : shape) {
            d = r.get<std::uint32_t>("dimension");
            if (d == 0) throw FormatError(origin + ": zero dimension in '" + name + "'");
        }
        const std::size_t n = rank ? shape_numel(shape) : 0;
        if (rank == 0 || n > (std::size_t(1) << 34)) throw FormatError(origin + ": bad shape for '" + name + "'");
        std::vector<float> values(n);
        for (auto& v : values) v = std::bit_cast<float>(r.get<std::uint32_t>("values"));
        if (!out.emplace(name, Tensor<float>(std::move(shape), std::move(values))).second)
            throw FormatError(origin + ": duplicate tensor '" + name + "'");
    }
    if (!r.done()) throw FormatError(origin + ": trailing bytes after the last entry");
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors<float>& tensors) {
    detail::write_file_atomic(path, encode_checkpoint(tensors));
}

NamedTensors<float> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file(path), path.string());
}

}  // namespace qgcl
