#pragma once

// Binary tensor archive. Layout, all integers little-endian:
//   "QGCL" | u32 version | u32 entry count
//   per entry: u16 name length | name | u8 rank | u32 dims[rank] | f32 values
// Entries are written in name order.

#include <cstdint>
#include <filesystem>
#include <string>

#include "qgcl/tensor.hpp"

namespace qgcl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const NamedTensors<float>& tensors);
NamedTensors<float> decode_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

// Written to a sibling temporary and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors<float>& tensors);
NamedTensors<float> load_checkpoint(const std::filesystem::path& path);

template <class To, class From>
NamedTensors<To> convert(const NamedTensors<From>& in) {
    NamedTensors<To> out;
    for (const auto& [k, v] : in) out.emplace(k, v.template cast<To>());
    return out;
}

}  // namespace qgcl
