// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "dcuc/checksum.hpp"
#include "dcuc/error.hpp"
#include "dcuc/rng.hpp"
#include "dcuc/wav.hpp"

namespace dcuc::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Raised-sine syllables separated by silent gaps, peak 1.
std::vector<double> syllable_envelope(Rng& rng, std::size_t n, double sr) {
  std::vector<double> env(n, 0.0);
  double t = rng.uniform(0.05, 0.25);
  const double dur = static_cast<double>(n) / sr;
  bool any = false;
  while (t < dur - 0.1 || !any) {
    const double len = rng.uniform(0.12, 0.35);
    const double amp = rng.uniform(0.5, 1.0);
    const auto a = static_cast<std::size_t>(t * sr);
    const auto b = std::min(n, static_cast<std::size_t>((t + len) * sr));
    for (std::size_t i = a; i < b; ++i) {
      const double u = (static_cast<double>(i) / sr - t) / len;
      const double s = std::sin(std::numbers::pi * u);
      env[i] = amp * s * s;
    }
    any = any || b > a;
    t += len + rng.uniform(0.06, 0.25);
    if (!any && t >= dur) t = 0.0;
  }
  const double peak = *std::max_element(env.begin(), env.end());
  for (double& e : env) e /= peak;
  return env;
}

std::vector<double> white(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  return x;
}

// Kellet's refined pink filter over white noise.
std::vector<double> pink(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (double& v : x) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    v = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362) * 0.11;
    b6 = w * 0.115926;
  }
  return x;
}

std::string scene_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

dsp::Waveform wave(std::vector<double> s, double sr) {
  dsp::Waveform w;
  w.samples = std::move(s);
  w.sample_rate = sr;
  return w;
}

}  // namespace

CleanSignal synth_clean(std::uint64_t seed, double duration_s,
                        double sample_rate) {
  if (!(duration_s >= 0.5)) {
    throw InvalidInput("synth_clean needs at least 0.5 s");
  }
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  const double f0 = rng.uniform(100.0, 300.0);
  const std::size_t harmonics = 3 + rng.below(3);
  std::vector<double> amp(harmonics), phase0(harmonics);
  for (std::size_t k = 0; k < harmonics; ++k) {
    amp[k] = rng.uniform(0.3, 1.0) / static_cast<double>(k + 1);
    phase0[k] = rng.uniform(0.0, kTwoPi);
  }
  // Slow pitch drift of a few percent.
  const double drift_rate = rng.uniform(0.5, 2.0);
  const double drift_phase = rng.uniform(0.0, kTwoPi);
  const double drift_depth = rng.uniform(0.01, 0.05);

  CleanSignal out;
  out.envelope = syllable_envelope(rng, n, sample_rate);
  std::vector<double> x(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f = f0 * (1.0 + drift_depth * std::sin(kTwoPi * drift_rate * t + drift_phase));
    double s = 0.0;
    for (std::size_t k = 0; k < harmonics; ++k) {
      s += amp[k] * std::sin(static_cast<double>(k + 1) * phase + phase0[k]);
    }
    x[i] = out.envelope[i] * s;
    phase = std::fmod(phase + kTwoPi * f / sample_rate, kTwoPi);
  }
  std::size_t arg = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(x[i]) > std::abs(x[arg])) arg = i;
  }
  const double g = 0.5 / std::abs(x[arg]);
  for (double& v : x) v *= g;
  x[arg] = std::copysign(0.5, x[arg]);
  out.wave = wave(std::move(x), sample_rate);
  return out;
}

visual::VideoFrames synth_video(const std::vector<double>& envelope,
                                double sample_rate, double fps,
                                std::size_t height, std::size_t width,
                                std::uint64_t seed) {
  if (envelope.empty() || !(fps > 0.0) || height == 0 || width == 0) {
    throw InvalidInput("synth_video: empty envelope or frame geometry");
  }
  Rng rng(seed);
  const double bg = 170.0 + static_cast<double>(rng.below(60));
  const double fg = 20.0 + static_cast<double>(rng.below(40));
  const double half_w = static_cast<double>(width) * rng.uniform(0.28, 0.36);
  const double max_half_h = 0.4 * static_cast<double>(height);

  const double duration = static_cast<double>(envelope.size()) / sample_rate;
  visual::VideoFrames v;
  v.num_frames = std::max<std::size_t>(1, static_cast<std::size_t>(duration * fps));
  v.height = height;
  v.width = width;
  v.fps = fps;
  v.pixels.resize(v.num_frames * height * width);

  const double cy = 0.5 * static_cast<double>(height);
  const double cx = 0.5 * static_cast<double>(width);
  constexpr int kSub = 4;  // supersampling per axis
  for (std::size_t f = 0; f < v.num_frames; ++f) {
    const double mid = (static_cast<double>(f) + 0.5) / fps;
    const auto idx = std::min(envelope.size() - 1,
                              static_cast<std::size_t>(mid * sample_rate));
    const double half_h = max_half_h * std::clamp(envelope[idx], 0.0, 1.0);
    std::uint8_t* px = v.pixels.data() + f * height * width;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        int inside = 0;
        if (half_h > 0.0) {
          for (int sy = 0; sy < kSub; ++sy) {
            for (int sx = 0; sx < kSub; ++sx) {
              const double py = static_cast<double>(y) + (sy + 0.5) / kSub - cy;
              const double qx = static_cast<double>(x) + (sx + 0.5) / kSub - cx;
              const double r = (qx * qx) / (half_w * half_w) +
                               (py * py) / (half_h * half_h);
              inside += r <= 1.0;
            }
          }
        }
        const double cov = inside / double(kSub * kSub);
        px[y * width + x] =
            static_cast<std::uint8_t>(std::lround(bg - (bg - fg) * cov));
      }
    }
  }
  return v;
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::speech: return "speech";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  if (s == "speech") return NoiseKind::speech;
  throw InvalidInput("unknown noise kind '" + s + "'");
}

dsp::Waveform synth_noise(NoiseKind kind, std::uint64_t seed, std::size_t n,
                          double sample_rate) {
  Rng rng(seed);
  switch (kind) {
    case NoiseKind::white: return wave(white(rng, n), sample_rate);
    case NoiseKind::pink: return wave(pink(rng, n), sample_rate);
    case NoiseKind::speech: {
      const double dur = std::max(0.5, static_cast<double>(n) / sample_rate);
      auto s = synth_clean(seed, dur, sample_rate).wave;
      s.samples.resize(n, 0.0);
      return s;
    }
  }
  throw InvalidInput("unknown noise kind");
}

double power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

double snr_db(const std::vector<double>& signal, const std::vector<double>& noise) {
  const double pn = power(noise);
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(power(signal) / pn);
}

Mixture mix_at_snr(const dsp::Waveform& clean, const dsp::Waveform& noise,
                   double snr) {
  if (clean.size() != noise.size()) {
    throw ShapeError("mix_at_snr: clean has " + std::to_string(clean.size()) +
                     " samples, noise " + std::to_string(noise.size()));
  }
  const double pc = power(clean.samples);
  const double pn = power(noise.samples);
  if (pc == 0.0) throw InvalidInput("mix_at_snr: clean signal has zero power");
  if (pn == 0.0) throw InvalidInput("mix_at_snr: noise has zero power");
  if (std::isnan(snr) || snr == -std::numeric_limits<double>::infinity()) {
    throw InvalidInput("mix_at_snr: SNR must be finite or +inf");
  }
  Mixture m;
  m.noise_gain = std::isinf(snr) ? 0.0 : std::sqrt(pc / (pn * std::pow(10.0, snr / 10.0)));
  const std::size_t n = clean.size();
  std::vector<double> y(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = clean.samples[i] + m.noise_gain * noise.samples[i];
    peak = std::max(peak, std::abs(y[i]));
  }
  m.rescale = peak > 1.0 ? 0.99 / peak : 1.0;
  std::vector<double> c(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = m.rescale * clean.samples[i];
    z[i] = m.rescale * m.noise_gain * noise.samples[i];
    y[i] = m.rescale == 1.0 ? y[i] : c[i] + z[i];
  }
  m.clean = wave(std::move(c), clean.sample_rate);
  m.noise = wave(std::move(z), clean.sample_rate);
  m.noisy = wave(std::move(y), clean.sample_rate);
  return m;
}

void CorpusSpec::validate() const {
  if (num_scenes < 1) throw InvalidInput("corpus needs at least one scene");
  if (!(duration_s >= 0.5)) throw InvalidInput("scene duration must be >= 0.5 s");
  if (!(snr_lo_db <= snr_hi_db)) {
    throw InvalidInput("snr range is empty: lo " + format_double(snr_lo_db) +
                       " > hi " + format_double(snr_hi_db));
  }
  if (!std::isfinite(snr_lo_db) || !std::isfinite(snr_hi_db)) {
    throw InvalidInput("snr range must be finite");
  }
  if (!(sample_rate > 0.0) || !(fps > 0.0)) {
    throw InvalidInput("sample rate and fps must be positive");
  }
  if (frame_height == 0 || frame_width == 0) {
    throw InvalidInput("frame size must be positive");
  }
}

KeyValues CorpusSpec::to_kv() const {
  KeyValues kv;
  kv.set("num_scenes", std::uint64_t{num_scenes});
  kv.set("duration_s", duration_s);
  kv.set("snr_lo_db", snr_lo_db);
  kv.set("snr_hi_db", snr_hi_db);
  kv.set("sample_rate", sample_rate);
  kv.set("fps", fps);
  kv.set("frame_height", std::uint64_t{frame_height});
  kv.set("frame_width", std::uint64_t{frame_width});
  kv.set("seed", seed);
  return kv;
}

CorpusSpec CorpusSpec::from_kv(const KeyValues& kv) {
  kv.require_known({"num_scenes", "duration_s", "snr_lo_db", "snr_hi_db",
                    "sample_rate", "fps", "frame_height", "frame_width",
                    "seed"});
  CorpusSpec s;
  s.num_scenes = kv.integer("num_scenes");
  s.duration_s = kv.number("duration_s");
  s.snr_lo_db = kv.number("snr_lo_db");
  s.snr_hi_db = kv.number("snr_hi_db");
  s.sample_rate = kv.number("sample_rate");
  s.fps = kv.number("fps");
  s.frame_height = kv.integer("frame_height");
  s.frame_width = kv.integer("frame_width");
  s.seed = kv.integer("seed");
  s.validate();
  return s;
}

ToyScene generate_scene(const CorpusSpec& spec, std::size_t index) {
  spec.validate();
  ToyScene s;
  s.index = index;
  Rng scene_rng = Rng::derive(spec.seed, index);
  s.seed = scene_rng.next_u64();
  Rng rng(s.seed);
  s.snr_db = rng.uniform(spec.snr_lo_db, spec.snr_hi_db);
  s.noise_kind = static_cast<NoiseKind>(index % 3);

  const std::uint64_t clean_seed = rng.next_u64();
  const std::uint64_t noise_seed = rng.next_u64();
  const std::uint64_t video_seed = rng.next_u64();
  CleanSignal c = synth_clean(clean_seed, spec.duration_s, spec.sample_rate);
  dsp::Waveform n = synth_noise(s.noise_kind, noise_seed, c.wave.size(), spec.sample_rate);
  Mixture m = mix_at_snr(c.wave, n, s.snr_db);
  s.noise_gain = m.noise_gain;
  s.rescale = m.rescale;

  // Snap both components to the PCM grid; their sum is then on the grid too.
  for (double& v : m.clean.samples) v = dsp::quantize_pcm16(v);
  for (double& v : m.noise.samples) v = dsp::quantize_pcm16(v);
  s.clean = m.clean;
  s.noise = m.noise;
  s.noisy = m.clean;
  for (std::size_t i = 0; i < s.noisy.size(); ++i) {
    s.noisy.samples[i] += s.noise.samples[i];
  }
  // Quantization moves the realised SNR by ~1e-5 dB; record what is stored.
  s.target_snr_db = s.snr_db;
  s.snr_db = snr_db(s.clean.samples, s.noise.samples);
  s.video = synth_video(c.envelope, spec.sample_rate, spec.fps,
                        spec.frame_height, spec.frame_width, video_seed);
  return s;
}

void check_scene(const ToyScene& s, double snr_tol_db) {
  const std::string where = "scene " + std::to_string(s.index) + ": ";
  if (s.clean.size() != s.noise.size() || s.clean.size() != s.noisy.size()) {
    throw InvalidInput(where + "component lengths differ");
  }
  for (std::size_t i = 0; i < s.noisy.size(); ++i) {
    if (std::abs(s.noisy.samples[i] - (s.clean.samples[i] + s.noise.samples[i])) > 1e-6) {
      throw InvalidInput(where + "noisy != clean + noise at sample " + std::to_string(i));
    }
    if (std::abs(s.noisy.samples[i]) > 1.0) {
      throw InvalidInput(where + "sample exceeds |1|");
    }
  }
  const double measured = snr_db(s.clean.samples, s.noise.samples);
  if (!(std::abs(measured - s.snr_db) <= snr_tol_db)) {
    throw InvalidInput(where + "measured SNR " + format_double(measured) +
                       " dB vs recorded " + format_double(s.snr_db));
  }
  if (std::abs(s.video.duration() - s.clean.duration()) > 1.0 / s.video.fps + 1e-9) {
    throw InvalidInput(where + "video and audio durations differ by more than a frame");
  }
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvalidInput("unknown split '" + s + "' (train, val or test)");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

SplitSizes split_sizes(std::size_t n) {
  const std::size_t train = n * 8 / 10;
  const std::size_t val = n / 10;
  return {train, val, n - train - val};
}

Corpus Corpus::build(const CorpusSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "scenes", ec);
  if (ec) throw IoError("cannot create " + (dir / "scenes").string() + ": " + ec.message());
  Corpus c;
  c.spec_ = spec;
  c.dir_ = dir;
  for (std::size_t i = 0; i < spec.num_scenes; ++i) {
    const ToyScene s = generate_scene(spec, i);
    const fs::path sd = c.scene_dir(i);
    fs::create_directories(sd, ec);
    if (ec) throw IoError("cannot create " + sd.string() + ": " + ec.message());
    dsp::write_wav(sd / "clean.wav", s.clean);
    dsp::write_wav(sd / "noise.wav", s.noise);
    dsp::write_wav(sd / "noisy.wav", s.noisy);
    visual::write_dvid(sd / "video.dvid", s.video);
    KeyValues meta;
    meta.set("index", std::uint64_t{i});
    meta.set("seed", s.seed);
    meta.set("snr_db", s.snr_db);
    meta.set("target_snr_db", s.target_snr_db);
    meta.set("noise_kind", to_string(s.noise_kind));
    meta.set("noise_gain", s.noise_gain);
    meta.set("rescale", s.rescale);
    meta.set("num_samples", std::uint64_t{s.clean.size()});
    meta.save(sd / "meta.txt");
  }
  // Written last so a partial corpus is not mistaken for a complete one.
  spec.to_kv().save(dir / "corpus.txt");
  return c;
}

Corpus Corpus::open(const std::filesystem::path& dir) {
  const auto manifest = dir / "corpus.txt";
  if (!std::filesystem::exists(manifest)) {
    throw IoError("no corpus at " + dir.string() + " (missing corpus.txt)");
  }
  Corpus c;
  c.spec_ = CorpusSpec::from_kv(KeyValues::load(manifest));
  c.dir_ = dir;
  return c;
}

std::vector<std::size_t> Corpus::split(Split s) const {
  const SplitSizes z = split_sizes(spec_.num_scenes);
  std::size_t begin = 0, count = z.train;
  if (s == Split::val) {
    begin = z.train;
    count = z.val;
  } else if (s == Split::test) {
    begin = z.train + z.val;
    count = z.test;
  }
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
  return idx;
}

std::filesystem::path Corpus::scene_dir(std::size_t index) const {
  return dir_ / "scenes" / scene_name(index);
}

ToyScene Corpus::load(std::size_t index) const {
  if (index >= spec_.num_scenes) {
    throw InvalidInput("scene index " + std::to_string(index) + " out of range");
  }
  const auto sd = scene_dir(index);
  ToyScene s;
  s.index = index;
  s.clean = dsp::read_wav(sd / "clean.wav");
  s.noise = dsp::read_wav(sd / "noise.wav");
  s.noisy = dsp::read_wav(sd / "noisy.wav");
  s.video = visual::read_dvid(sd / "video.dvid");
  const KeyValues meta = KeyValues::load(sd / "meta.txt");
  s.seed = meta.integer("seed");
  s.snr_db = meta.number("snr_db");
  s.target_snr_db = meta.number("target_snr_db");
  s.noise_kind = parse_noise_kind(meta.str("noise_kind"));
  s.noise_gain = meta.number("noise_gain");
  s.rescale = meta.number("rescale");
  return s;
}

std::uint32_t Corpus::scene_checksum(std::size_t index) const {
  const auto sd = scene_dir(index);
  std::uint32_t c = 0;
  for (const char* f : {"clean.wav", "noise.wav", "noisy.wav", "video.dvid", "meta.txt"}) {
    c = crc32(read_file(sd / f), c);
  }
  return c;
}

std::uint32_t Corpus::checksum() const {
  std::uint32_t c = crc32(read_file(dir_ / "corpus.txt"));
  for (std::size_t i = 0; i < spec_.num_scenes; ++i) {
    c = crc32(read_file(scene_dir(i) / "meta.txt"), c);
    const std::uint32_t s = scene_checksum(i);
    const char le[4] = {char(s & 0xff), char((s >> 8) & 0xff),
                        char((s >> 16) & 0xff), char(s >> 24)};
    c = crc32(std::string_view(le, 4), c);
  }
  return c;
}

}  // namespace dcuc::data
