#include "qgcl/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qgcl/error.hpp"
#include "text_util.hpp"

namespace qgcl {

namespace fs = std::filesystem;

void LumaSequence::validate() const {
    if (width == 0 || height == 0) throw FormatError("sequence dimensions must be positive");
    if (frames.empty()) throw FormatError("sequence has no frames");
    for (std::size_t n = 0; n < frames.size(); ++n)
        if (frames[n].size() != width * height)
            throw FormatError("frame " + std::to_string(n) + " holds " + std::to_string(frames[n].size()) +
                              " pixels, expected " + std::to_string(width * height));
    if (meta && meta->size() != frames.size())
        throw FormatError("metadata covers " + std::to_string(meta->size()) + " frames, sequence has " +
                          std::to_string(frames.size()));
    if (meta)
        for (const auto& m : *meta) validate_meta(m);
}

SequenceDescriptor read_descriptor(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read descriptor " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto sep = line.find_first_of("=: \t");
        if (sep == std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = detail::trim(line.substr(0, sep));
        std::string value = detail::trim(line.substr(sep + 1));
        if (!value.empty() && (value[0] == '=' || value[0] == ':')) value = detail::trim(value.substr(1));
        kv[key] = value;
    }
    SequenceDescriptor d;
    auto field = [&](const char* name) -> std::size_t {
        auto it = kv.find(name);
        if (it == kv.end()) throw FormatError("descriptor " + path.string() + " lacks '" + name + "'");
        const long long v = detail::parse_int(it->second, path.string() + ": " + name);
        if (v <= 0) throw FormatError("descriptor " + path.string() + ": " + name + " must be positive");
        return static_cast<std::size_t>(v);
    };
    d.width = field("width");
    d.height = field("height");
    d.frames = field("frames");
    return d;
}

void write_descriptor(const fs::path& path, const SequenceDescriptor& d) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write descriptor " + path.string());
    out << "width=" << d.width << "\nheight=" << d.height << "\nframes=" << d.frames << "\n";
}

fs::path default_descriptor_path(const fs::path& data_path) {
    fs::path p = data_path;
    p += ".desc";
    return p;
}

LumaSequence read_sequence(const fs::path& data_path, const fs::path& descriptor_path) {
    const SequenceDescriptor d = read_descriptor(descriptor_path);
    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw FormatError("cannot read luma data " + data_path.string());
    const std::size_t frame_bytes = d.width * d.height;
    const std::uintmax_t expected = static_cast<std::uintmax_t>(frame_bytes) * d.frames;
    std::error_code ec;
    const std::uintmax_t actual = fs::file_size(data_path, ec);
    if (ec) throw FormatError("cannot stat " + data_path.string());
    if (actual != expected)
        throw FormatError("luma file " + data_path.string() + " holds " + std::to_string(actual) +
                          " bytes, descriptor implies " + std::to_string(expected) + " (" +
                          std::to_string(d.width) + "x" + std::to_string(d.height) + "x" +
                          std::to_string(d.frames) + ")");
    LumaSequence seq;
    seq.width = d.width;
    seq.height = d.height;
    seq.frames.resize(d.frames);
    for (auto& f : seq.frames) {
        f.resize(frame_bytes);
        in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(frame_bytes));
        if (!in) throw FormatError("short read from " + data_path.string());
    }
    return seq;
}

void write_sequence(const LumaSequence& seq, const fs::path& data_path, const fs::path& descriptor_path) {
    seq.validate();
    {
        std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write luma data " + data_path.string());
        for (const auto& f : seq.frames)
            out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size()));
        if (!out) throw FormatError("write failed for " + data_path.string());
    }
    write_descriptor(descriptor_path, {seq.width, seq.height, seq.frame_count()});
}

void validate_meta(const FrameMeta& m) {
    if (m.qp < 0 || m.qp > 51) throw FormatError("qp " + std::to_string(m.qp) + " outside [0,51]");
    if (m.bits <= 0) throw FormatError("bits must be positive, got " + std::to_string(m.bits));
}

std::vector<FrameMeta> read_meta(const fs::path& csv_path, std::size_t expected_frames) {
    std::ifstream in(csv_path);
    if (!in) throw FormatError("cannot read metadata " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "frame_index,qp,bits")
        throw FormatError(csv_path.string() + ": header must be 'frame_index,qp,bits'");
    std::map<long long, FrameMeta> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string where = csv_path.string() + ":" + std::to_string(lineno);
        const auto cells = detail::split_csv(line);
        if (cells.size() != 3) throw FormatError(where + ": expected 3 columns");
        const long long idx = detail::parse_int(cells[0], where + " frame_index");
        FrameMeta m;
        m.qp = static_cast<int>(detail::parse_int(cells[1], where + " qp"));
        m.bits = detail::parse_int(cells[2], where + " bits");
        try {
            validate_meta(m);
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
        if (idx < 0 || static_cast<std::size_t>(idx) >= expected_frames)
            throw FormatError(where + ": frame_index " + std::to_string(idx) + " outside [0," +
                              std::to_string(expected_frames) + ")");
        if (!rows.emplace(idx, m).second)
            throw FormatError(where + ": duplicate frame_index " + std::to_string(idx));
    }
    if (rows.size() != expected_frames) {
        for (std::size_t i = 0; i < expected_frames; ++i)
            if (!rows.count(static_cast<long long>(i)))
                throw FormatError(csv_path.string() + ": missing frame_index " + std::to_string(i));
    }
    std::vector<FrameMeta> out;
    out.reserve(rows.size());
    for (const auto& [i, m] : rows) out.push_back(m);
    return out;
}

void write_meta(const fs::path& csv_path, std::span<const FrameMeta> meta) {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write metadata " + csv_path.string());
    out << "frame_index,qp,bits\n";
    for (std::size_t i = 0; i < meta.size(); ++i) out << i << ',' << meta[i].qp << ',' << meta[i].bits << '\n';
}

double Psnr::db() const {
    if (!db_) throw DomainError("PSNR is infinite (identical frames)");
    return *db_;
}

double mse(const FrameView& a, const FrameView& b) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("frame dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const int d = int(a.pixels[i]) - int(b.pixels[i]);
        acc += static_cast<std::uint64_t>(d * d);
    }
    return static_cast<double>(acc) / static_cast<double>(a.pixels.size());
}

Psnr psnr(const FrameView& a, const FrameView& b) {
    const double e = mse(a, b);
    if (e == 0.0) return Psnr::infinite();
    return Psnr::decibels(10.0 * std::log10(255.0 * 255.0 / e));
}

DeltaPsnrReport delta_psnr(const LumaSequence& raw, const LumaSequence& compressed,
                           const LumaSequence& enhanced) {
    auto same = [&](const LumaSequence& s, const char* what) {
        if (s.width != raw.width || s.height != raw.height || s.frame_count() != raw.frame_count())
            throw ShapeError(std::string(what) + " sequence shape " + std::to_string(s.width) + "x" +
                             std::to_string(s.height) + "x" + std::to_string(s.frame_count()) +
                             " differs from raw " + std::to_string(raw.width) + "x" +
                             std::to_string(raw.height) + "x" + std::to_string(raw.frame_count()));
    };
    same(compressed, "compressed");
    same(enhanced, "enhanced");
    DeltaPsnrReport r;
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t n = 0; n < raw.frame_count(); ++n) {
        r.compressed.push_back(psnr(compressed.frame(n), raw.frame(n)));
        r.enhanced.push_back(psnr(enhanced.frame(n), raw.frame(n)));
        if (r.compressed.back().is_infinite() || r.enhanced.back().is_infinite()) {
            r.delta.emplace_back();
            ++r.excluded_frames;
        } else {
            const double d = r.enhanced.back().db() - r.compressed.back().db();
            r.delta.emplace_back(d);
            total += d;
            ++counted;
        }
    }
    if (counted) r.mean = total / static_cast<double>(counted);
    return r;
}

template <class T>
Tensor<T> to_unit(const FrameView& f) {
    Tensor<T> t(Shape{1, f.height, f.width});
    for (std::size_t i = 0; i < f.pixels.size(); ++i) t[i] = static_cast<T>(f.pixels[i]) / T(255);
    return t;
}

template <class T>
Tensor<T> to_unit_clip(const LumaSequence& seq, std::size_t first, std::size_t count) {
    if (count == 0 || first + count > seq.frame_count())
        throw ShapeError("clip [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") outside sequence of " + std::to_string(seq.frame_count()) + " frames");
    Tensor<T> t(Shape{count, 1, seq.height, seq.width});
    const std::size_t px = seq.width * seq.height;
    for (std::size_t n = 0; n < count; ++n)
        for (std::size_t i = 0; i < px; ++i)
            t[n * px + i] = static_cast<T>(seq.frames[first + n][i]) / T(255);
    return t;
}

template <class T>
std::vector<std::uint8_t> from_unit(const Tensor<T>& t) {
    std::vector<std::uint8_t> out(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const double v = std::clamp(static_cast<double>(t[i]), 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

template <class T>
LumaSequence from_unit_clip(const Tensor<T>& t) {
    if (t.rank() != 4 || t.dim(1) != 1) throw ShapeError("from_unit_clip: expected (N,1,H,W), got " + shape_str(t.shape()));
    LumaSequence s;
    s.height = t.dim(2);
    s.width = t.dim(3);
    const std::size_t px = s.width * s.height;
    for (std::size_t n = 0; n < t.dim(0); ++n) {
        std::vector<std::uint8_t> f(px);
        for (std::size_t i = 0; i < px; ++i)
            f[i] = static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(t[n * px + i]), 0.0, 1.0) * 255.0));
        s.frames.push_back(std::move(f));
    }
    return s;
}

template Tensor<float> to_unit<float>(const FrameView&);
template Tensor<double> to_unit<double>(const FrameView&);
template Tensor<float> to_unit_clip<float>(const LumaSequence&, std::size_t, std::size_t);
template Tensor<double> to_unit_clip<double>(const LumaSequence&, std::size_t, std::size_t);
template std::vector<std::uint8_t> from_unit<float>(const Tensor<float>&);
template std::vector<std::uint8_t> from_unit<double>(const Tensor<double>&);
template LumaSequence from_unit_clip<float>(const Tensor<float>&);
template LumaSequence from_unit_clip<double>(const Tensor<double>&);

}  // namespace qgcl
