#pragma once

// Planar 8-bit luma sequences, their text descriptors, per-frame codec
// metadata, and pixel-fidelity metrics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qgcl/tensor.hpp"

namespace qgcl {

struct FrameMeta {
    int qp = 0;             // [0, 51]
    std::int64_t bits = 0;  // coded bits, > 0
};

struct FrameView {
    std::size_t width = 0;
    std::size_t height = 0;
    std::span<const std::uint8_t> pixels;  // row-major, width * height

    std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

struct LumaSequence {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::vector<std::uint8_t>> frames;
    std::optional<std::vector<FrameMeta>> meta;

    std::size_t frame_count() const { return frames.size(); }
    FrameView frame(std::size_t n) const { return {width, height, frames.at(n)}; }
    // Throws FormatError if any structural invariant is broken.
    void validate() const;
};

struct SequenceDescriptor {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t frames = 0;
};

// Descriptor text: one `key=value` per line for width, height, frames.
// '#' starts a comment; `key: value` and `key value` are also accepted.
SequenceDescriptor read_descriptor(const std::filesystem::path& path);
void write_descriptor(const std::filesystem::path& path, const SequenceDescriptor& d);

// `<data>.desc` next to the data file.
std::filesystem::path default_descriptor_path(const std::filesystem::path& data_path);

LumaSequence read_sequence(const std::filesystem::path& data_path,
                           const std::filesystem::path& descriptor_path);
void write_sequence(const LumaSequence& seq, const std::filesystem::path& data_path,
                    const std::filesystem::path& descriptor_path);

// CSV with header `frame_index,qp,bits`; rows may come in any order and are
// returned sorted by frame index.
std::vector<FrameMeta> read_meta(const std::filesystem::path& csv_path, std::size_t expected_frames);
void write_meta(const std::filesystem::path& csv_path, std::span<const FrameMeta> meta);
void validate_meta(const FrameMeta& m);

// PSNR in dB, or the infinite sentinel for identical frames.
class Psnr {
public:
    static Psnr infinite() { return Psnr(); }
    static Psnr decibels(double db) { return Psnr(db); }

    bool is_infinite() const { return !db_.has_value(); }
    // Throws DomainError on the infinite sentinel.
    double db() const;
    std::optional<double> finite() const { return db_; }

    friend bool operator==(const Psnr&, const Psnr&) = default;

private:
    Psnr() = default;
    explicit Psnr(double db) : db_(db) {}
    std::optional<double> db_;
};

Psnr psnr(const FrameView& a, const FrameView& b);
double mse(const FrameView& a, const FrameView& b);

struct DeltaPsnrReport {
    std::vector<Psnr> compressed;  // PSNR(compressed_n, raw_n)
    std::vector<Psnr> enhanced;    // PSNR(enhanced_n, raw_n)
    // Gain per frame; empty where either PSNR is infinite.
    std::vector<std::optional<double>> delta;
    // Mean over finite frames; empty if there are none.
    std::optional<double> mean;
    std::size_t excluded_frames = 0;
};

DeltaPsnrReport delta_psnr(const LumaSequence& raw, const LumaSequence& compressed,
                           const LumaSequence& enhanced);

// Frame intensities scaled to [0,1] as a (1,H,W) tensor.
template <class T>
Tensor<T> to_unit(const FrameView& f);
// Stack of all frames as (N,1,H,W).
template <class T>
Tensor<T> to_unit_clip(const LumaSequence& seq, std::size_t first, std::size_t count);
// Clip to [0,1] and round to 8-bit. Accepts (1,H,W) or (H,W).
template <class T>
std::vector<std::uint8_t> from_unit(const Tensor<T>& t);
// (N,1,H,W) back to an 8-bit sequence without metadata.
template <class T>
LumaSequence from_unit_clip(const Tensor<T>& t);

}  // namespace qgcl
