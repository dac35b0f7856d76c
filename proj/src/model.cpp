// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/model.hpp"

#include <cmath>
#include <memory>

#include "dcuc/error.hpp"

namespace dcuc::model {

namespace {

ag::CVar resize_freq_time(const ag::CVar& x, std::size_t freq,
                          std::size_t time) {
  auto fix = [&](const ag::Var& v) {
    return ag::resize_axis(ag::resize_axis(v, 2, freq), 3, time);
  };
  return {fix(x.re), fix(x.im)};
}

ag::CVar concat_channels(const ag::CVar& a, const ag::CVar& b) {
  const ag::Var re[] = {a.re, b.re};
  const ag::Var im[] = {a.im, b.im};
  return {ag::concat(re, 1), ag::concat(im, 1)};
}

}  // namespace

void ModelConfig::validate() const {
  stft.validate();
  conformer.validate();
  visual.validate();
  if (encoder_channels.empty()) {
    throw InvalidInput("model needs at least one encoder block");
  }
  for (auto c : encoder_channels) {
    if (c == 0) throw InvalidInput("encoder channel width must be >= 1");
  }
  if (kernel_freq == 0 || kernel_time == 0 || stride_freq == 0) {
    throw InvalidInput("kernel and stride components must be >= 1");
  }
  if (stride_time != 1) {
    throw InvalidInput("time stride must be 1 to stay aligned with video");
  }
}

std::vector<std::size_t> ModelConfig::encoder_freq_sizes() const {
  std::vector<std::size_t> sizes;
  std::size_t f = stft.freq_bins();
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    f = ag::conv_out_size(f, kernel_freq, stride_freq, freq_pad());
    sizes.push_back(f);
  }
  return sizes;
}

std::size_t ModelConfig::latent_width() const {
  return encoder_channels.back() * encoder_freq_sizes().back();
}

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.stft.win_length = 16;
  c.stft.hop_length = 8;
  c.stft.fft_length = 16;
  c.encoder_channels = {2, 3};
  c.conformer.model_dim = 8;
  c.conformer.num_heads = 2;
  c.conformer.ffn_expansion = 2;
  c.conformer.conv_kernel = 3;
  c.conformer.num_blocks = 1;
  c.conformer.dropout = 0.0;
  c.visual.frame_height = 32;
  c.visual.frame_width = 32;
  c.visual.stem_channels = 2;
  c.visual.stage_channels = {2};
  c.visual.embed_dim = 3;
  return c;
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)), stft_(cfg_.stft) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const auto& ch = cfg_.encoder_channels;
  const std::size_t n = ch.size();
  std::size_t in = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "encoder." + std::to_string(i);
    EncoderBlock b;
    // Batch norm follows, so the conv carries no bias.
    b.conv = cnn::make_complex_conv(store_, p + ".conv", in, ch[i],
                                    cfg_.kernel_freq, cfg_.kernel_time, rng,
                                    false);
    b.conv.stride_freq = cfg_.stride_freq;
    b.conv.stride_time = cfg_.stride_time;
    b.conv.pad_freq = cfg_.freq_pad();
    b.conv.pad_time = cfg_.kernel_time - 1;
    b.bn = cnn::make_complex_batch_norm(store_, p + ".bn", ch[i]);
    b.slope = cnn::make_prelu_slope(store_, p + ".prelu", ch[i]);
    encoder_.push_back(std::move(b));
    in = ch[i];
  }

  frontend_ = visual::make_frontend(store_, "visual", cfg_.visual, rng);
  const std::size_t width = cfg_.latent_width();
  fusion_in_ = nn::make_linear(store_, "fusion.in_proj",
                               width + cfg_.visual_embed_dim(),
                               cfg_.fusion_proj_dim(), rng);
  for (std::size_t i = 0; i < cfg_.conformer.num_blocks; ++i) {
    blocks_.push_back(conformer::make_block(
        store_, "fusion.conformer." + std::to_string(i), cfg_.conformer, rng));
  }
  fusion_out_ = nn::make_linear(store_, "fusion.out_proj",
                                cfg_.fusion_proj_dim(), width, rng);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t level = n - 1 - i;
    const std::string p = "decoder." + std::to_string(i);
    DecoderBlock b;
    b.is_final = level == 0;
    const std::size_t out = b.is_final ? 1 : ch[level - 1];
    b.conv = cnn::make_complex_conv(store_, p + ".conv", 2 * ch[level], out,
                                    cfg_.kernel_freq, cfg_.kernel_time, rng,
                                    b.is_final);
    b.conv.stride_freq = cfg_.stride_freq;
    b.conv.stride_time = cfg_.stride_time;
    b.conv.pad_freq = cfg_.freq_pad();
    b.conv.pad_time = 0;
    if (!b.is_final) {
      b.bn = cnn::make_complex_batch_norm(store_, p + ".bn", out);
      b.slope = cnn::make_prelu_slope(store_, p + ".prelu", out);
    }
    decoder_.push_back(std::move(b));
  }
}

Encoded Model::encode(const ag::CVar& spec, const nn::Context& ctx) const {
  if (spec.shape().size() != 4 || spec.shape()[1] != 1) {
    throw ShapeError("encode expects [B, 1, F, T], got " +
                     to_string(spec.shape()));
  }
  const std::size_t T = spec.shape()[3];
  Encoded out;
  ag::CVar h = spec;
  for (const auto& b : encoder_) {
    h = cnn::complex_conv2d(h, b.conv);
    // Causal in time: keep the first T frames of the padded output.
    h = resize_freq_time(h, h.shape()[2], T);
    h = cnn::complex_batch_norm(h, b.bn, ctx.mode);
    h = cnn::prelu(h, b.slope);
    out.skips.push_back(h);
  }
  out.latent = h;
  return out;
}

ag::CVar Model::fuse(const ag::CVar& latent, const ag::Var& visual,
                     const nn::Context& ctx) const {
  const Shape& s = latent.shape();
  if (s.size() != 4) throw ShapeError("fuse expects a rank-4 latent");
  const std::size_t B = s[0], C = s[1], F = s[2], T = s[3];
  if (visual.shape().size() != 3 || visual.dim(0) != B ||
      visual.dim(2) != cfg_.visual_embed_dim()) {
    throw ShapeError("fuse: visual features " + to_string(visual.shape()) +
                     " do not match batch " + std::to_string(B));
  }
  if (visual.dim(1) != T) {
    throw InvalidInput("fuse: visual sequence has " +
                       std::to_string(visual.dim(1)) + " frames, audio " +
                       std::to_string(T) + "; upsample first");
  }
  if (C * F + visual.dim(2) != fusion_in_.weight.dim(1)) {
    throw ShapeError("fuse: latent " + to_string(s) +
                     " does not match the fusion projection");
  }
  ag::Var rows = ag::reshape(ag::permute(latent.re, {0, 3, 1, 2}), {B, T, C * F});
  const ag::Var parts[] = {rows, visual};
  ag::Var h = nn::apply(fusion_in_, ag::concat(parts, 2));
  for (const auto& blk : blocks_) h = conformer::conformer_block(h, blk, ctx);
  h = nn::apply(fusion_out_, h);
  ag::Var re = ag::permute(ag::reshape(h, {B, T, C, F}), {0, 2, 3, 1});
  return {re, latent.im};
}

ag::CVar Model::decode(const ag::CVar& fused,
                       const std::vector<ag::CVar>& skips,
                       std::size_t freq_bins, const nn::Context& ctx) const {
  const std::size_t n = decoder_.size();
  if (skips.size() != n) {
    throw ShapeError("decode: expected " + std::to_string(n) + " skips, got " +
                     std::to_string(skips.size()));
  }
  const std::size_t T = fused.shape().at(3);
  ag::CVar h = fused;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t level = n - 1 - i;
    const ag::CVar& skip = skips[level];
    if (skip.shape().size() != 4 || skip.shape()[0] != h.shape()[0] ||
        skip.shape()[2] != h.shape()[2] || skip.shape()[3] != T) {
      throw ShapeError("decode: skip " + to_string(skip.shape()) +
                       " does not match decoder input " +
                       to_string(h.shape()));
    }
    const DecoderBlock& b = decoder_[i];
    h = cnn::complex_conv_transpose2d(concat_channels(h, skip), b.conv);
    const std::size_t target =
        level == 0 ? freq_bins : skips[level - 1].shape()[2];
    h = resize_freq_time(h, target, T);
    if (!b.is_final) {
      h = cnn::complex_batch_norm(h, b.bn, ctx.mode);
      h = cnn::prelu(h, b.slope);
    }
  }
  return bound_mask(h, cfg_.mask_bound);
}

ag::Var Model::visual_features(const ag::Var& frames, std::size_t batch,
                               std::size_t target_frames,
                               const nn::Context& ctx) const {
  if (frames.shape().size() != 4 || batch == 0 || frames.dim(0) % batch != 0) {
    throw ShapeError("visual_features: frames " + to_string(frames.shape()) +
                     " for batch " + std::to_string(batch));
  }
  if (frames.dim(2) != cfg_.visual.frame_height ||
      frames.dim(3) != cfg_.visual.frame_width) {
    throw ShapeError("visual_features: frame size does not match config");
  }
  const std::size_t per_item = frames.dim(0) / batch;
  ag::Var e = visual::encode_frames(frames, frontend_, ctx);
  e = ag::reshape(e, {batch, per_item, cfg_.visual_embed_dim()});
  return visual::temporal_upsample(e, 1, target_frames, cfg_.upsample);
}

ag::CVar Model::estimate_mask(const ag::CVar& spec, const ag::Var& visual,
                              const nn::Context& ctx) const {
  Encoded enc = encode(spec, ctx);
  ag::CVar fused = fuse(enc.latent, visual, ctx);
  return decode(fused, enc.skips, spec.shape()[2], ctx);
}

ag::Var Model::forward(const Tensor& noisy, const Tensor& frames,
                       const nn::Context& ctx, ForwardOptions opt) const {
  if (noisy.rank() != 2) throw ShapeError("forward expects noisy [B, L]");
  const std::size_t B = noisy.dim(0), L = noisy.dim(1);
  ComplexTensor spec = stft_.analyze(noisy);
  ag::CVar x{ag::constant(std::move(spec.real)),
             ag::constant(std::move(spec.imag))};
  const std::size_t T = x.shape()[3];
  ag::Var vis;
  if (opt.zero_visual) {
    vis = ag::constant(Tensor({B, T, cfg_.visual_embed_dim()}));
  } else {
    vis = visual_features(ag::constant(frames), B, T, ctx);
  }
  ag::CVar mask = estimate_mask(x, vis, ctx);
  return stft_.synthesize(apply_mask(x, mask), L);
}

ag::CVar bound_mask(const ag::CVar& raw, double bound) {
  if (bound <= 0.0) return raw;
  const Tensor& r = raw.re.value();
  const Tensor& i = raw.im.value();
  const std::size_t n = r.size();
  // scale(m) = b tanh(m / b) / m and scale'(m) / m per element.
  auto sc = std::make_shared<std::vector<double>>(n);
  auto dsc = std::make_shared<std::vector<double>>(n);
  Tensor yr(r.shape()), yi(r.shape());
  const double b2 = bound * bound;
  for (std::size_t k = 0; k < n; ++k) {
    const double m = std::hypot(r[k], i[k]);
    if (m < 1e-4 * bound) {
      (*sc)[k] = 1.0 - m * m / (3.0 * b2);
      (*dsc)[k] = -2.0 / (3.0 * b2);
    } else {
      const double th = std::tanh(m / bound);
      (*sc)[k] = bound * th / m;
      (*dsc)[k] = ((1.0 - th * th) * m - bound * th) / (m * m * m);
    }
    yr[k] = (*sc)[k] * r[k];
    yi[k] = (*sc)[k] * i[k];
  }
  // Both outputs depend on both inputs; route the gradient through one node
  // holding [re; im] and split it again.
  Tensor both({2, n});
  std::copy(yr.values().begin(), yr.values().end(), both.data());
  std::copy(yi.values().begin(), yi.values().end(), both.data() + n);
  ag::Var joint = ag::make_op(std::move(both), {raw.re, raw.im},
                              [sc, dsc, n](ag::Node& nd) {
    const Tensor& r = nd.parents[0]->value;
    const Tensor& i = nd.parents[1]->value;
    Tensor* gr = nd.parent_needs_grad(0) ? &nd.parents[0]->grad_buffer() : nullptr;
    Tensor* gi = nd.parent_needs_grad(1) ? &nd.parents[1]->grad_buffer() : nullptr;
    for (std::size_t k = 0; k < n; ++k) {
      const double g_r = nd.grad[k], g_i = nd.grad[n + k];
      const double common = (g_r * r[k] + g_i * i[k]) * (*dsc)[k];
      if (gr) (*gr)[k] += g_r * (*sc)[k] + common * r[k];
      if (gi) (*gi)[k] += g_i * (*sc)[k] + common * i[k];
    }
  });
  const Shape shape = raw.shape();
  return {ag::reshape(ag::slice(joint, 0, 0, 1), shape),
          ag::reshape(ag::slice(joint, 0, 1, 1), shape)};
}

ag::CVar apply_mask(const ag::CVar& noisy, const ag::CVar& mask) {
  if (noisy.shape() != mask.shape()) {
    throw ShapeError("apply_mask: spectrum " + to_string(noisy.shape()) +
                     " vs mask " + to_string(mask.shape()));
  }
  return {ag::sub(ag::mul(noisy.re, mask.re), ag::mul(noisy.im, mask.im)),
          ag::add(ag::mul(noisy.re, mask.im), ag::mul(noisy.im, mask.re))};
}

dsp::Spectrogram apply_mask(const dsp::Spectrogram& noisy,
                            const ComplexTensor& mask) {
  if (noisy.data.shape() != mask.shape()) {
    throw ShapeError("apply_mask: spectrum " + to_string(noisy.data.shape()) +
                     " vs mask " + to_string(mask.shape()));
  }
  dsp::Spectrogram out = noisy;
  const Tensor& xr = noisy.data.real;
  const Tensor& xi = noisy.data.imag;
  for (std::size_t k = 0; k < xr.size(); ++k) {
    out.data.real[k] = xr[k] * mask.real[k] - xi[k] * mask.imag[k];
    out.data.imag[k] = xr[k] * mask.imag[k] + xi[k] * mask.real[k];
  }
  return out;
}

void force_constant_mask(Model& m, double re, double im) {
  if (m.config().mask_bound > 0.0) {
    throw InvalidInput("force_constant_mask needs an unbounded mask");
  }
  const DecoderBlock& last = m.decoder_blocks().back();
  ag::Var(last.conv.w_real).value().fill(0.0);
  ag::Var(last.conv.w_imag).value().fill(0.0);
  ag::Var(last.conv.bias_real).value().fill(re);
  ag::Var(last.conv.bias_imag).value().fill(im);
}

dsp::Waveform enhance(const dsp::Waveform& noisy,
                      const visual::VideoFrames& video, const Model& m,
                      ForwardOptions opt) {
  const auto& cfg = m.config();
  noisy.validate();
  video.validate();
  if (noisy.sample_rate != cfg.stft.sample_rate) {
    throw ConfigMismatch("enhance: waveform sample rate does not match model");
  }
  if (noisy.samples.empty()) throw InvalidInput("enhance: empty waveform");
  if (std::abs(video.duration() - noisy.duration()) > 1.0 / video.fps + 1e-9) {
    throw InvalidInput("enhance: video lasts " +
                       std::to_string(video.duration()) + " s but audio " +
                       std::to_string(noisy.duration()) + " s");
  }
  ag::NoGradGuard guard;
  nn::Context ctx;
  ag::Var y = m.forward(Tensor({1, noisy.size()}, noisy.samples),
                        visual::frames_to_tensor(video), ctx, opt);
  dsp::Waveform out;
  out.samples = y.value().storage();
  out.sample_rate = noisy.sample_rate;
  return out;
}

}  // namespace dcuc::model
