#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "qgcl/error.hpp"

namespace qgcl::detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Writes next to the target, then renames over it, so readers never see a
// partial file.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& bytes) {
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
    if (ec) throw FormatError("cannot move " + tmp.string() + " to " + p.string() + ": " + ec.message());
}

}  // namespace qgcl::detail
