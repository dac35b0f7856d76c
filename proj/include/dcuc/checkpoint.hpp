// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dcuc/model.hpp"

namespace dcuc::model {

// "DCUC" archive:
//   magic "DCUC", u32 version = 1, u32 tensor count, then per tensor
//   u16 name length, UTF-8 name, u8 rank, rank x u64 dims, f32 payload
//   (row-major); trailing u32 CRC32 of every preceding byte. Little-endian.
struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;
};

std::string encode_archive(const std::vector<NamedTensor>& tensors);
// Throws ChecksumError on CRC mismatch, FormatError on malformed layout.
std::vector<NamedTensor> decode_archive(std::string_view bytes);

// Parameters, buffers and the architecture ("config.*" entries).
std::vector<NamedTensor> to_archive(const Model& m);
Model from_archive(const std::vector<NamedTensor>& tensors);

void save_checkpoint(const std::filesystem::path& path, const Model& m);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace dcuc::model
