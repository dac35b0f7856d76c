// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcuc/nn.hpp"

namespace dcuc::visual {

// Grayscale frame stack, row-major [num_frames, height, width].
struct VideoFrames {
  std::vector<std::uint8_t> pixels;
  std::size_t num_frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double fps = 25.0;

  void validate() const;
  double duration() const { return static_cast<double>(num_frames) / fps; }
  const std::uint8_t* frame(std::size_t i) const {
    return pixels.data() + i * height * width;
  }
};

struct VisualEmbedding {
  Tensor data;  // [num_frames, embed_dim]
  std::size_t num_frames() const { return data.dim(0); }
};

struct VisualConfig {
  std::size_t frame_height = 32;
  std::size_t frame_width = 32;
  std::size_t stem_channels = 16;
  // One residual stage per entry; stages after the first halve the
  // resolution through a strided transition conv.
  std::vector<std::size_t> stage_channels{16, 32};
  std::size_t embed_dim = 32;

  void validate() const;
};

struct ConvBn {
  ag::Var weight;  // [out, in, 3, 3], no bias
  nn::BatchNorm bn;
  std::size_t stride = 1;
};

struct ResidualBlock {
  ConvBn first;
  ConvBn second;
};

struct Stage {
  bool has_transition = false;
  ConvBn transition;
  ResidualBlock block;
};

struct FrontendParams {
  ConvBn stem;
  std::vector<Stage> stages;
  nn::Linear head;  // last stage width -> embed_dim
};

FrontendParams make_frontend(nn::ParamStore& store, const std::string& prefix,
                             const VisualConfig& cfg, Rng& rng);

// [N, 1, H, W] scaled to [0, 1].
Tensor frames_to_tensor(const VideoFrames& v);

// Frames are processed independently: stem, residual stages, global average
// pool, linear head. Returns [N, embed_dim].
ag::Var encode_frames(const ag::Var& frames, const FrontendParams& p,
                      const nn::Context& ctx);
VisualEmbedding encode_frames(const VideoFrames& v, const FrontendParams& p,
                              const VisualConfig& cfg);

enum class UpsampleMode { nearest, linear };

// Source index per target row under t_src = floor(t_dst * src / target).
std::vector<std::size_t> nearest_index_map(std::size_t src, std::size_t target);

// Stretches `axis` from its current length to `target` rows.
ag::Var temporal_upsample(const ag::Var& e, std::size_t axis,
                          std::size_t target, UpsampleMode mode);
VisualEmbedding temporal_upsample(const VisualEmbedding& e,
                                  std::size_t target_frames,
                                  UpsampleMode mode);

// "DVID" frame file: magic, u32 version (1), u32 num_frames, u32 height,
// u32 width, f32 fps, then the u8 pixels, all little-endian.
VideoFrames read_dvid(const std::filesystem::path& path);
void write_dvid(const std::filesystem::path& path, const VideoFrames& v);

}  // namespace dcuc::visual
