// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dcuc {

// IEEE CRC-32 (zlib).
std::uint32_t crc32(std::string_view bytes, std::uint32_t seed = 0);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dcuc
