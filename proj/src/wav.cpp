// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dcuc/error.hpp"

namespace dcuc::dsp {

namespace {

constexpr std::uint32_t kRequiredRate = 16000;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(where + "not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError(where + "truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(where + "short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = le16(f);
      const std::uint16_t channels = le16(f + 2);
      const std::uint32_t rate = le32(f + 4);
      const std::uint16_t bits = le16(f + 14);
      if (format != 1) {
        throw FormatError(where + "unsupported encoding (format tag " +
                          std::to_string(format) + "), need PCM");
      }
      if (channels != 1) {
        throw FormatError(where + "unsupported channel count " +
                          std::to_string(channels) + ", need mono");
      }
      if (bits != 16) {
        throw FormatError(where + "unsupported bit depth " +
                          std::to_string(bits) + ", need 16");
      }
      if (rate != kRequiredRate) {
        throw FormatError(where + "unsupported sample rate " +
                          std::to_string(rate) + ", need 16000");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(where + "data chunk before fmt chunk");
      Waveform w;
      w.sample_rate = kRequiredRate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(where + "no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.sample_rate != kRequiredRate) {
    throw FormatError("write_wav: sample rate must be 16000");
  }
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kRequiredRate);
  put32(out, kRequiredRate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, 2 * n);
  for (double v : w.samples) {
    put16(out, static_cast<std::uint16_t>(to_pcm16(v)));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

std::int16_t to_pcm16(double v) {
  const double c = std::clamp(std::isfinite(v) ? v : 0.0, -1.0, 1.0);
  return static_cast<std::int16_t>(std::clamp(std::lround(c * 32768.0), -32768L, 32767L));
}

double quantize_pcm16(double v) { return to_pcm16(v) / 32768.0; }

}  // namespace dcuc::dsp
