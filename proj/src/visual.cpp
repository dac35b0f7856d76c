// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/visual.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dcuc/error.hpp"

namespace dcuc::visual {

namespace {

constexpr std::uint32_t kDvidVersion = 1;

ConvBn make_conv_bn(nn::ParamStore& store, const std::string& prefix,
                    std::size_t in, std::size_t out, std::size_t stride,
                    Rng& rng) {
  ConvBn c;
  c.weight = store.add(prefix + ".conv.weight",
                       nn::uniform_init({out, in, 3, 3}, in * 9, rng));
  c.bn = nn::make_batch_norm(store, prefix + ".bn", out);
  c.stride = stride;
  return c;
}

ag::Var conv_bn(const ag::Var& x, const ConvBn& c, nn::Mode mode) {
  ag::Var none;
  ag::Var y = ag::conv2d(x, c.weight, none, {c.stride, c.stride, 1, 1});
  return nn::batch_norm(y, c.bn, 1, mode);
}

std::uint32_t get32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void VideoFrames::validate() const {
  if (num_frames < 1) throw InvalidInput("video needs at least one frame");
  if (!(fps > 0.0)) throw InvalidInput("video fps must be > 0");
  if (pixels.size() != num_frames * height * width) {
    throw ShapeError("video pixel count does not match " +
                     std::to_string(num_frames) + "x" +
                     std::to_string(height) + "x" + std::to_string(width));
  }
}

void VisualConfig::validate() const {
  if (frame_height == 0 || frame_width == 0 || stage_channels.empty() ||
      embed_dim == 0 || stem_channels == 0) {
    throw InvalidInput("visual config has an empty dimension");
  }
}

FrontendParams make_frontend(nn::ParamStore& store, const std::string& prefix,
                             const VisualConfig& cfg, Rng& rng) {
  cfg.validate();
  FrontendParams p;
  p.stem = make_conv_bn(store, prefix + ".stem", 1, cfg.stem_channels, 1, rng);
  std::size_t width = cfg.stem_channels;
  for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    const std::string sp = prefix + ".stage" + std::to_string(s);
    const std::size_t ch = cfg.stage_channels[s];
    Stage st;
    const std::size_t stride = s == 0 ? 1 : 2;
    if (stride != 1 || ch != width) {
      st.has_transition = true;
      st.transition =
          make_conv_bn(store, sp + ".transition", width, ch, stride, rng);
    }
    st.block.first = make_conv_bn(store, sp + ".block.first", ch, ch, 1, rng);
    st.block.second = make_conv_bn(store, sp + ".block.second", ch, ch, 1, rng);
    p.stages.push_back(std::move(st));
    width = ch;
  }
  p.head = nn::make_linear(store, prefix + ".head", width, cfg.embed_dim, rng);
  return p;
}

Tensor frames_to_tensor(const VideoFrames& v) {
  v.validate();
  Tensor t({v.num_frames, 1, v.height, v.width});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = v.pixels[i] / 255.0;
  return t;
}

ag::Var encode_frames(const ag::Var& frames, const FrontendParams& p,
                      const nn::Context& ctx) {
  if (frames.shape().size() != 4 || frames.dim(1) != 1) {
    throw ShapeError("encode_frames expects [N, 1, H, W], got " +
                     to_string(frames.shape()));
  }
  ag::Var h = ag::relu(conv_bn(frames, p.stem, ctx.mode));
  for (const Stage& st : p.stages) {
    if (st.has_transition) h = ag::relu(conv_bn(h, st.transition, ctx.mode));
    ag::Var r = ag::relu(conv_bn(h, st.block.first, ctx.mode));
    r = conv_bn(r, st.block.second, ctx.mode);
    h = ag::relu(ag::add(h, r));
  }
  // Global average pool over H x W.
  const std::size_t N = h.dim(0), C = h.dim(1), HW = h.dim(2) * h.dim(3);
  ag::Var pooled = ag::reshape(h, {N, C, HW});
  ag::Var ones = ag::constant(Tensor({N, HW, 1}, 1.0 / static_cast<double>(HW)));
  pooled = ag::reshape(ag::bmm(pooled, ones, false), {N, C});
  return nn::apply(p.head, pooled);
}

VisualEmbedding encode_frames(const VideoFrames& v, const FrontendParams& p,
                              const VisualConfig& cfg) {
  v.validate();
  if (v.height != cfg.frame_height || v.width != cfg.frame_width) {
    throw ShapeError("frames are " + std::to_string(v.height) + "x" +
                     std::to_string(v.width) + ", frontend expects " +
                     std::to_string(cfg.frame_height) + "x" +
                     std::to_string(cfg.frame_width));
  }
  ag::NoGradGuard guard;
  nn::Context ctx;
  ag::Var e = encode_frames(ag::constant(frames_to_tensor(v)), p, ctx);
  return {e.value()};
}

std::vector<std::size_t> nearest_index_map(std::size_t src,
                                           std::size_t target) {
  std::vector<std::size_t> map(target);
  for (std::size_t t = 0; t < target; ++t) map[t] = t * src / target;
  return map;
}

ag::Var temporal_upsample(const ag::Var& e, std::size_t axis,
                          std::size_t target, UpsampleMode mode) {
  const std::size_t src = e.dim(axis);
  if (src < 1) throw InvalidInput("temporal_upsample of empty sequence");
  if (target < src) {
    throw InvalidInput("temporal_upsample: target " + std::to_string(target) +
                       " < source " + std::to_string(src) +
                       " (downsampling unsupported)");
  }
  std::vector<std::vector<ag::Tap>> taps(target);
  if (mode == UpsampleMode::nearest) {
    const auto map = nearest_index_map(src, target);
    for (std::size_t t = 0; t < target; ++t) taps[t] = {{map[t], 1.0}};
  } else {
    // Sample centres aligned: position of target row t in source units.
    const double ratio = static_cast<double>(src) / static_cast<double>(target);
    for (std::size_t t = 0; t < target; ++t) {
      double pos = (static_cast<double>(t) + 0.5) * ratio - 0.5;
      pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, src - 1);
      const double frac = pos - static_cast<double>(lo);
      if (hi == lo || frac == 0.0) {
        taps[t] = {{lo, 1.0}};
      } else {
        taps[t] = {{lo, 1.0 - frac}, {hi, frac}};
      }
    }
  }
  return ag::remap_axis(e, axis, taps);
}

VisualEmbedding temporal_upsample(const VisualEmbedding& e,
                                  std::size_t target_frames,
                                  UpsampleMode mode) {
  ag::NoGradGuard guard;
  return {temporal_upsample(ag::constant(e.data), 0, target_frames, mode)
              .value()};
}

VideoFrames read_dvid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (b.size() < 24 || std::memcmp(b.data(), "DVID", 4) != 0) {
    throw FormatError(where + "missing DVID magic");
  }
  const std::uint32_t version = get32(b.data() + 4);
  if (version != kDvidVersion) {
    throw FormatError(where + "unsupported DVID version " +
                      std::to_string(version));
  }
  VideoFrames v;
  v.num_frames = get32(b.data() + 8);
  v.height = get32(b.data() + 12);
  v.width = get32(b.data() + 16);
  v.fps = static_cast<double>(std::bit_cast<float>(get32(b.data() + 20)));
  const std::size_t n = v.num_frames * v.height * v.width;
  if (b.size() != 24 + n) {
    throw FormatError(where + "expected " + std::to_string(n) +
                      " pixel bytes, found " + std::to_string(b.size() - 24));
  }
  v.pixels.assign(b.begin() + 24, b.end());
  v.validate();
  return v;
}

void write_dvid(const std::filesystem::path& path, const VideoFrames& v) {
  v.validate();
  std::string out = "DVID";
  put32(out, kDvidVersion);
  put32(out, static_cast<std::uint32_t>(v.num_frames));
  put32(out, static_cast<std::uint32_t>(v.height));
  put32(out, static_cast<std::uint32_t>(v.width));
  put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v.fps)));
  out.append(reinterpret_cast<const char*>(v.pixels.data()), v.pixels.size());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace dcuc::visual
