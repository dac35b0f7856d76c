// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "dcuc/checksum.hpp"
#include "dcuc/error.hpp"

namespace dcuc::model {

namespace {

constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i]))
           << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("checkpoint truncated");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

NamedTensor vec(const std::string& name, std::vector<double> v) {
  NamedTensor t;
  t.name = name;
  t.dims = {v.size()};
  t.values.assign(v.begin(), v.end());
  return t;
}

std::vector<double> config_entry(const std::map<std::string, NamedTensor>& m,
                                 const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw FormatError("checkpoint lacks " + name);
  return {it->second.values.begin(), it->second.values.end()};
}

std::size_t as_size(double v) { return static_cast<std::size_t>(v); }

}  // namespace

std::string encode_archive(const std::vector<NamedTensor>& tensors) {
  std::string out = "DCUC";
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xffff) throw FormatError("tensor name too long");
    if (t.dims.size() > 0xff) throw FormatError("tensor rank too large");
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.values.size()) {
      throw FormatError("tensor " + t.name + " payload does not match dims");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint64_t>(out, d);
    for (float v : t.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  put_le<std::uint32_t>(out, crc32(out));
  return out;
}

std::vector<NamedTensor> decode_archive(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "DCUC") {
    throw FormatError("missing DCUC magic");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  const auto stored = tail.get<std::uint32_t>();
  if (stored != crc32(body)) {
    throw ChecksumError("checkpoint CRC mismatch");
  }
  Reader r(body);
  r.bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const auto len = r.get<std::uint16_t>();
    t.name = std::string(r.bytes(len));
    const auto rank = r.get<std::uint8_t>();
    std::uint64_t n = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      t.dims.push_back(r.get<std::uint64_t>());
      n *= t.dims.back();
    }
    if (n > body.size()) throw FormatError("tensor " + t.name + " too large");
    t.values.resize(n);
    for (auto& v : t.values) v = std::bit_cast<float>(r.get<std::uint32_t>());
    out.push_back(std::move(t));
  }
  if (r.pos() != body.size()) throw FormatError("trailing bytes in checkpoint");
  return out;
}

std::vector<NamedTensor> to_archive(const Model& m) {
  const ModelConfig& c = m.config();
  std::vector<NamedTensor> out;
  out.push_back(vec("config.conformer",
                    {double(c.conformer.model_dim), double(c.conformer.num_heads),
                     double(c.conformer.ffn_expansion),
                     double(c.conformer.conv_kernel),
                     double(c.conformer.num_blocks), c.conformer.dropout}));
  out.push_back(vec("config.encoder_channels",
                    {c.encoder_channels.begin(), c.encoder_channels.end()}));
  out.push_back(vec("config.kernel_stride",
                    {double(c.kernel_freq), double(c.kernel_time),
                     double(c.stride_freq), double(c.stride_time)}));
  out.push_back(vec("config.mask", {c.mask_bound,
                                    c.upsample == visual::UpsampleMode::linear ? 1.0 : 0.0}));
  // Seed as four 16-bit limbs, each exact in f32.
  std::vector<double> seed;
  for (int i = 0; i < 4; ++i) seed.push_back(double((c.seed >> (16 * i)) & 0xffff));
  out.push_back(vec("config.seed", seed));
  out.push_back(vec("config.stft",
                    {double(c.stft.win_length), double(c.stft.hop_length),
                     double(c.stft.fft_length),
                     c.stft.window == dsp::WindowKind::sqrt_hann ? 1.0 : 0.0,
                     c.stft.sample_rate}));
  std::vector<double> vis{double(c.visual.frame_height),
                          double(c.visual.frame_width),
                          double(c.visual.stem_channels),
                          double(c.visual.embed_dim)};
  vis.insert(vis.end(), c.visual.stage_channels.begin(),
             c.visual.stage_channels.end());
  out.push_back(vec("config.visual", vis));

  for (const auto& [name, e] : m.params().entries()) {
    NamedTensor t;
    t.name = name;
    for (auto d : e.var.shape()) t.dims.push_back(d);
    const auto& v = e.var.value();
    t.values.assign(v.values().begin(), v.values().end());
    out.push_back(std::move(t));
  }
  return out;
}

Model from_archive(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, NamedTensor> by_name;
  for (const auto& t : tensors) by_name[t.name] = t;

  ModelConfig c;
  const auto conf = config_entry(by_name, "config.conformer");
  const auto enc = config_entry(by_name, "config.encoder_channels");
  const auto ks = config_entry(by_name, "config.kernel_stride");
  const auto mask = config_entry(by_name, "config.mask");
  const auto seed = config_entry(by_name, "config.seed");
  const auto stft = config_entry(by_name, "config.stft");
  const auto vis = config_entry(by_name, "config.visual");
  if (conf.size() != 6 || ks.size() != 4 || mask.size() != 2 ||
      seed.size() != 4 || stft.size() != 5 || vis.size() < 5) {
    throw FormatError("checkpoint config entries have unexpected sizes");
  }
  c.conformer.model_dim = as_size(conf[0]);
  c.conformer.num_heads = as_size(conf[1]);
  c.conformer.ffn_expansion = as_size(conf[2]);
  c.conformer.conv_kernel = as_size(conf[3]);
  c.conformer.num_blocks = as_size(conf[4]);
  c.conformer.dropout = conf[5];
  c.encoder_channels.clear();
  for (double v : enc) c.encoder_channels.push_back(as_size(v));
  c.kernel_freq = as_size(ks[0]);
  c.kernel_time = as_size(ks[1]);
  c.stride_freq = as_size(ks[2]);
  c.stride_time = as_size(ks[3]);
  c.mask_bound = mask[0];
  c.upsample = mask[1] != 0.0 ? visual::UpsampleMode::linear
                              : visual::UpsampleMode::nearest;
  c.seed = 0;
  for (int i = 0; i < 4; ++i) c.seed |= static_cast<std::uint64_t>(seed[i]) << (16 * i);
  c.stft.win_length = as_size(stft[0]);
  c.stft.hop_length = as_size(stft[1]);
  c.stft.fft_length = as_size(stft[2]);
  c.stft.window = stft[3] != 0.0 ? dsp::WindowKind::sqrt_hann : dsp::WindowKind::hann;
  c.stft.sample_rate = stft[4];
  c.visual.frame_height = as_size(vis[0]);
  c.visual.frame_width = as_size(vis[1]);
  c.visual.stem_channels = as_size(vis[2]);
  c.visual.embed_dim = as_size(vis[3]);
  c.visual.stage_channels.clear();
  for (std::size_t i = 4; i < vis.size(); ++i) {
    c.visual.stage_channels.push_back(as_size(vis[i]));
  }

  Model m(c);
  std::size_t loaded = 0;
  for (const auto& [name, e] : m.params().entries()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor " + name);
    const NamedTensor& t = it->second;
    Shape dims(t.dims.begin(), t.dims.end());
    if (dims != e.var.shape()) {
      throw FormatError("tensor " + name + " has shape " + to_string(dims) +
                        ", model expects " + to_string(e.var.shape()));
    }
    Tensor& dst = ag::Var(e.var).value();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = t.values[i];
    ++loaded;
  }
  std::size_t config_entries = 0;
  for (const auto& [name, t] : by_name) {
    if (name.rfind("config.", 0) == 0) ++config_entries;
  }
  if (loaded + config_entries != by_name.size()) {
    throw FormatError("checkpoint has tensors the model does not define");
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const Model& m) {
  write_file(path, encode_archive(to_archive(m)));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return from_archive(decode_archive(read_file(path)));
}

}  // namespace dcuc::model
