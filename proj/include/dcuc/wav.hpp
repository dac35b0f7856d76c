// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>

#include "dcuc/stft.hpp"

namespace dcuc::dsp {

// RIFF/WAVE, 16-bit PCM little-endian, mono, 16 kHz. Anything else is
// rejected with a FormatError naming the offending field.
Waveform read_wav(const std::filesystem::path& path);

// Clamps to [-1, 1] and quantizes to 16-bit PCM.
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Sample <-> code mapping shared by reader and writer: code = round(32768 v)
// clamped to the int16 range, v = code / 32768. Grid values roundtrip
// exactly.
std::int16_t to_pcm16(double v);
double quantize_pcm16(double v);

}  // namespace dcuc::dsp
