// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance run: one PASS/FAIL line per criterion.
//
//   dcuc_acceptance [--only 1,2,...] [--workdir DIR]
//
// Criterion 8 trains two default-size models and takes most of an hour on
// one core; the others finish in a few minutes.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "../support/helpers.hpp"
#include "../support/oracles.hpp"
#include "dcuc/checkpoint.hpp"
#include "dcuc/cli.hpp"
#include "dcuc/conformer.hpp"
#include "dcuc/data.hpp"
#include "dcuc/gradcheck.hpp"
#include "dcuc/metrics.hpp"
#include "dcuc/model.hpp"
#include "dcuc/train.hpp"

using namespace dcuc;
using testing::random_complex;
using testing::random_tensor;
using testing::rel_err;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

ag::CVar cvar(const ComplexTensor& c) { return {ag::constant(c.real), ag::constant(c.imag)}; }
ComplexTensor value(const ag::CVar& v) { return {v.re.value(), v.im.value()}; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// 1 -----------------------------------------------------------------------

Outcome kernel_oracles() {
  const double t0 = cpu_seconds();
  Rng rng(101);
  const std::size_t draws = 100;
  double conv = 0, tconv = 0, bn = 0, pr = 0, mask = 0;
  auto conv_params = [&](std::size_t in, std::size_t out, bool bias) {
    cnn::ComplexConvParams p;
    const std::size_t kh = 1 + rng.below(5), kw = 1 + rng.below(3);
    p.w_real = ag::constant(random_tensor({out, in, kh, kw}, rng));
    p.w_imag = ag::constant(random_tensor({out, in, kh, kw}, rng));
    if (bias) {
      p.bias_real = ag::constant(random_tensor({out}, rng));
      p.bias_imag = ag::constant(random_tensor({out}, rng));
    }
    p.stride_freq = 1 + rng.below(2);
    p.stride_time = 1 + rng.below(2);
    p.pad_freq = rng.below(kh);
    p.pad_time = rng.below(kw);
    return p;
  };
  auto oracle_conv = [](const ComplexTensor& x, const cnn::ComplexConvParams& p, bool t) {
    const Tensor none;
    const Tensor& br = p.bias_real.defined() ? p.bias_real.value() : none;
    const Tensor& bi = p.bias_imag.defined() ? p.bias_imag.value() : none;
    return t ? oracle::complex_conv_transpose2d(x, p.w_real.value(), p.w_imag.value(), br, bi,
                                                p.stride_freq, p.stride_time, p.pad_freq,
                                                p.pad_time)
             : oracle::complex_conv2d(x, p.w_real.value(), p.w_imag.value(), br, bi,
                                      p.stride_freq, p.stride_time, p.pad_freq, p.pad_time);
  };
  for (std::size_t d = 0; d < draws; ++d) {
    const std::size_t B = 1 + rng.below(2), C = 1 + rng.below(3), O = 1 + rng.below(3);
    const std::size_t H = 5 + rng.below(8), W = 3 + rng.below(6);
    const ComplexTensor x = random_complex({B, C, H, W}, rng);

    auto p = conv_params(C, O, rng.below(2) == 1);
    conv = std::max(conv, rel_err(value(cnn::complex_conv2d(cvar(x), p)), oracle_conv(x, p, false)));
    auto q = conv_params(C, O, rng.below(2) == 1);
    tconv = std::max(tconv,
                     rel_err(value(cnn::complex_conv_transpose2d(cvar(x), q)), oracle_conv(x, q, true)));

    nn::ParamStore store;
    auto bp = cnn::make_complex_batch_norm(store, "bn", C);
    for (auto* v : {&bp.gamma_rr, &bp.gamma_ii, &bp.beta_r, &bp.beta_i})
      for (double& e : v->value().values()) e = rng.uniform(0.3, 1.2);
    for (double& e : bp.gamma_ri.value().values()) e = rng.uniform(-0.3, 0.3);
    for (double& e : bp.var_rr.value().values()) e = rng.uniform(0.5, 1.5);
    for (double& e : bp.var_ii.value().values()) e = rng.uniform(0.5, 1.5);
    for (double& e : bp.var_ri.value().values()) e = rng.uniform(-0.2, 0.2);
    for (double& e : bp.mean_r.value().values()) e = rng.uniform(-0.3, 0.3);
    const bool train = d % 2 == 0;
    const ComplexTensor want = train ? oracle::complex_batch_norm_train(x, bp)
                                     : oracle::complex_batch_norm_eval(x, bp);
    bn = std::max(bn, rel_err(value(cnn::complex_batch_norm(
                                  cvar(x), bp, train ? nn::Mode::train : nn::Mode::eval)),
                              want));

    const Tensor slope = random_tensor({C}, rng);
    const auto y = value(cnn::prelu(cvar(x), ag::constant(slope)));
    pr = std::max(pr, std::max(rel_err(y.real, oracle::prelu(x.real, slope)),
                               rel_err(y.imag, oracle::prelu(x.imag, slope))));

    const ComplexTensor m = random_complex(x.shape(), rng);
    const auto got = value(model::apply_mask(cvar(x), cvar(m)));
    ComplexTensor ref(x.shape());
    for (std::size_t k = 0; k < x.real.size(); ++k) {
      const auto z = std::complex<double>(x.real[k], x.imag[k]) *
                     std::complex<double>(m.real[k], m.imag[k]);
      ref.real[k] = z.real();
      ref.imag[k] = z.imag();
    }
    mask = std::max(mask, rel_err(got, ref));
  }
  const double secs = cpu_seconds() - t0;
  const bool ok = conv <= 1e-6 && tconv <= 1e-6 && bn <= 1e-4 && pr <= 1e-6 && mask <= 1e-6 &&
                  secs < 60.0;
  return {ok, fmt("%zu draws each; rel err conv %.1e, conv_transpose %.1e, batch_norm %.1e, "
                  "prelu %.1e, apply_mask %.1e; %.1f s CPU",
                  draws, conv, tconv, bn, pr, mask, secs)};
}

// 2 -----------------------------------------------------------------------

Outcome rotation() {
  Rng rng(202);
  const ComplexTensor x = random_complex({2, 1, 9, 7}, rng);
  double worst = 0.0;
  for (double theta : {0.0, std::numbers::pi / 2, std::numbers::pi, 1.234}) {
    cnn::ComplexConvParams p;
    p.w_real = ag::constant(Tensor({1, 1, 1, 1}, std::cos(theta)));
    p.w_imag = ag::constant(Tensor({1, 1, 1, 1}, std::sin(theta)));
    const auto y = value(cnn::complex_conv2d(cvar(x), p));
    const std::complex<double> r = std::polar(1.0, theta);
    for (std::size_t k = 0; k < x.real.size(); ++k) {
      const auto want = std::complex<double>(x.real[k], x.imag[k]) * r;
      worst = std::max(worst, std::abs(std::complex<double>(y.real[k], y.imag[k]) - want));
    }
  }
  return {worst <= 1e-6, fmt("theta in {0, pi/2, pi, 1.234}; max phasor error %.1e", worst)};
}

// 3 -----------------------------------------------------------------------

Outcome stft_roundtrip() {
  dsp::StftConfig cfg;
  cfg.win_length = 400;
  cfg.hop_length = 160;
  cfg.fft_length = 512;
  const dsp::Stft stft(cfg);
  Rng rng(303);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t L = 32000;
    const Tensor x = random_tensor({1, L}, rng);
    const ComplexTensor s = stft.analyze(x);
    const Tensor y = stft.synthesize(cvar(s), L).value();
    worst = std::max(worst, max_abs_diff(x, y));
  }
  return {worst <= 1e-6, fmt("50 signals of 2 s, win 400 hop 160 fft 512; max error %.1e", worst)};
}

// 4 -----------------------------------------------------------------------

Outcome conformer_reduction() {
  Rng rng(404);
  conformer::ConformerConfig cfg;
  cfg.dropout = 0.0;
  double ln = 0.0, rows = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    nn::ParamStore store;
    auto p = conformer::make_block(store, "b", cfg, rng);
    for (auto& [n, v] : store.trainable_params()) {
      for (double& e : ag::Var(v).value().values()) e = rng.uniform(-0.5, 0.5);
    }
    const Tensor x = random_tensor({2, 30, cfg.model_dim}, rng, -2.0, 2.0);
    const Tensor a = conformer::attention_weights(ag::constant(x), p.mhsa);
    const std::size_t T = a.shape().back();
    for (std::size_t r = 0; r < a.size() / T; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < T; ++c) s += a[r * T + c];
      rows = std::max(rows, std::abs(s - 1.0));
    }
    for (const nn::Linear* l : {&p.ffn1.down, &p.mhsa.out, &p.conv.pointwise_out, &p.ffn2.down}) {
      ag::Var(l->weight).value().fill(0.0);
      if (l->bias.defined()) ag::Var(l->bias).value().fill(0.0);
    }
    const Tensor y = conformer::conformer_block(ag::constant(x), p, {}).value();
    ln = std::max(ln, max_abs_diff(y, oracle::layer_norm(x, p.final_norm)));
  }
  return {ln <= 1e-7 && rows <= 1e-6,
          fmt("zeroed branches vs LayerNorm %.1e; attention row sums off by %.1e", ln, rows)};
}

// 5 -----------------------------------------------------------------------

Outcome gradients() {
  const double t0 = cpu_seconds();
  std::size_t n = 0, failed = 0;
  double kernel_worst = 0.0, model_worst = 0.0;
  for (auto scope : {gradcheck::Scope::kernel, gradcheck::Scope::model}) {
    for (const auto& c : gradcheck::registered_checks(scope)) {
      const auto r = c.run();
      ++n;
      const double tol = scope == gradcheck::Scope::kernel ? 1e-4 : 1e-3;
      if (!(r.max_rel_err <= tol) || r.eps != 1e-5) {
        ++failed;
        std::printf("  gradcheck failure: %s\n", gradcheck::format_report(r).c_str());
      }
      double& w = scope == gradcheck::Scope::kernel ? kernel_worst : model_worst;
      w = std::max(w, r.max_rel_err);
    }
  }
  const double secs = cpu_seconds() - t0;
  return {failed == 0 && secs < 300.0,
          fmt("%zu checks, %zu failed; worst kernel %.1e, worst micro-model %.1e; %.1f s CPU", n,
              failed, kernel_worst, model_worst, secs)};
}

// 6 -----------------------------------------------------------------------

Outcome snr_properties() {
  Rng rng(606);
  double scale = 0.0, ortho = 0.0, plain = 0.0;
  auto zero_mean = [](std::vector<double> v) {
    double m = 0.0;
    for (double e : v) m += e;
    m /= v.size();
    for (double& e : v) e -= m;
    return v;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(4000), n(4000);
    for (auto& v : s) v = rng.uniform(-1, 1);
    for (auto& v : n) v = rng.uniform(-1, 1);
    s = zero_mean(s);
    n = zero_mean(n);
    const double a = dot(n, s) / dot(s, s);
    for (std::size_t i = 0; i < n.size(); ++i) n[i] -= a * s[i];
    const double ratio = std::pow(10.0, rng.uniform(-1.0, 3.0));
    const double k = std::sqrt(dot(s, s) / (ratio * dot(n, n)));
    std::vector<double> est(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] + k * n[i];
    const double base = metrics::si_snr(est, s);
    ortho = std::max(ortho, std::abs(base - 10.0 * std::log10(ratio)));
    for (double alpha : {0.1, 1.0, 3.7}) {
      auto e2 = est;
      for (double& v : e2) v *= alpha;
      scale = std::max(scale, std::abs(metrics::si_snr(e2, s) - base));
    }
    // 10 log10(|s|^2 / |s_hat - s|^2), literally.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      num += s[i] * s[i];
      den += (est[i] - s[i]) * (est[i] - s[i]);
    }
    plain = std::max(plain, std::abs(metrics::si_snr(est, s, metrics::SnrVariant::plain_snr) -
                                     10.0 * std::log10(num / den)));
  }
  return {scale <= 1e-9 && ortho <= 1e-9 && plain <= 1e-9,
          fmt("scale invariance %.1e dB, orthogonal case %.1e dB, plain variant %.1e dB", scale,
              ortho, plain)};
}

// 7 -----------------------------------------------------------------------

Outcome identity_mask() {
  model::ModelConfig cfg;
  cfg.mask_bound = 0.0;
  model::Model m(cfg);
  model::force_constant_mask(m, 1.0, 0.0);
  data::CorpusSpec spec;
  const auto scene = data::generate_scene(spec, 0);
  const auto out = model::enhance(scene.noisy, scene.video, m);
  double worst = out.size() == scene.noisy.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < out.size() && i < scene.noisy.size(); ++i) {
    worst = std::max(worst, std::abs(out.samples[i] - scene.noisy.samples[i]));
  }
  return {worst <= 1e-6, fmt("default model, mask 1+0j, 2 s scene; max abs error %.1e", worst)};
}

// 8 -----------------------------------------------------------------------

// Shared recipe for the audio-visual model and its audio-only ablation.
constexpr std::size_t kTrainSteps = 600;

train::TrainConfig learning_recipe(bool audio_only) {
  train::TrainConfig c;
  c.crop_frames = 25;
  c.max_steps = kTrainSteps;
  c.seed = 1;
  c.zero_visual = audio_only;
  return c;
}

double mean_improvement(const model::Model& m, const data::Corpus& corpus,
                        const std::vector<data::Split>& splits, model::ForwardOptions opt,
                        std::optional<data::NoiseKind> only, std::size_t* count) {
  double sum = 0.0;
  std::size_t n = 0;
  for (auto s : splits) {
    const auto r = train::evaluate(m, corpus, s, opt, only);
    sum += r.si_snr_improvement_db * r.num_utterances;
    n += r.num_utterances;
  }
  if (count) *count = n;
  return sum / n;
}

Outcome toy_learning(const fs::path& work) {
  data::CorpusSpec spec;  // 64 scenes, 2 s, SNR in [0, 10] dB
  const auto corpus = data::Corpus::build(spec, work / "corpus");

  auto run = [&](bool audio_only, double* cpu) {
    model::Model m{model::ModelConfig{}};
    const double t0 = cpu_seconds();
    train::train(m, corpus, learning_recipe(audio_only),
                 [&](const train::StepInfo& info, model::Model&) {
                   if (info.step % 100 == 0) {
                     std::printf("  [%s] step %zu/%zu loss %.3f\n", audio_only ? "audio" : "av",
                                 info.step, info.total_steps, info.record.loss);
                     std::fflush(stdout);
                   }
                 });
    *cpu = cpu_seconds() - t0;
    return m;
  };
  double av_cpu = 0.0, ao_cpu = 0.0;
  const model::Model av = run(false, &av_cpu);
  const auto test = train::evaluate(av, corpus, data::Split::test);
  const model::Model ao = run(true, &ao_cpu);

  // Only 4 of the held-out scenes carry competing speech, so the comparison
  // also uses every speech scene of a second corpus that neither model saw.
  data::CorpusSpec fresh_spec;
  fresh_spec.seed = 1;
  const auto fresh = data::Corpus::build(fresh_spec, work / "corpus_fresh");
  const std::vector<data::Split> held_out{data::Split::val, data::Split::test};
  const std::vector<data::Split> all{data::Split::train, data::Split::val, data::Split::test};
  auto speech = [&](const model::Model& m, model::ForwardOptions opt, std::size_t* count) {
    std::size_t a = 0, b = 0;
    const double x = mean_improvement(m, corpus, held_out, opt, data::NoiseKind::speech, &a);
    const double y = mean_improvement(m, fresh, all, opt, data::NoiseKind::speech, &b);
    if (count) *count = a + b;
    return (x * a + y * b) / static_cast<double>(a + b);
  };
  std::size_t n_speech = 0;
  const double av_speech = speech(av, {}, &n_speech);
  const double ao_speech = speech(ao, {.zero_visual = true}, nullptr);
  const double budget = 30 * 60.0;
  const bool ok = av_cpu <= budget && ao_cpu <= budget && test.si_snr_improvement_db >= 5.0 &&
                  av_speech - ao_speech >= 0.5;
  return {ok, fmt("test SI-SNRi %+.2f dB over %zu scenes; competing speech (%zu held-out "
                  "scenes): AV %+.2f dB vs audio-only %+.2f dB; training CPU %.0f s / %.0f s",
                  test.si_snr_improvement_db, test.num_utterances, n_speech, av_speech,
                  ao_speech, av_cpu, ao_cpu)};
}

// 9 -----------------------------------------------------------------------

Outcome determinism(const fs::path& work) {
  data::CorpusSpec spec;
  spec.num_scenes = 6;
  spec.duration_s = 0.5;
  spec.seed = 9;
  const auto a = data::Corpus::build(spec, work / "det_a");
  const auto b = data::Corpus::build(spec, work / "det_b");
  const bool corpus_same = a.checksum() == b.checksum();

  train::TrainConfig c;
  c.max_steps = 5;
  c.crop_frames = 5;
  c.batch_size = 2;
  c.seed = 4;
  auto run = [&](const data::Corpus& corpus, const std::string& name) {
    model::Model m(model::ModelConfig::micro());
    const std::string h = train::train(m, corpus, c).serialize(false);
    model::save_checkpoint(work / (name + ".dcuc"), m);
    return h;
  };
  const bool hist_same = run(a, "det_a") == run(b, "det_b");
  const bool ckpt_same = slurp(work / "det_a.dcuc") == slurp(work / "det_b.dcuc");
  return {corpus_same && hist_same && ckpt_same,
          fmt("corpus checksums %s, loss histories %s, checkpoints %s",
              corpus_same ? "identical" : "DIFFER", hist_same ? "identical" : "DIFFER",
              ckpt_same ? "identical" : "DIFFER")};
}

// 10 ----------------------------------------------------------------------

Outcome checkpoint_integrity(const fs::path& work) {
  model::Model m(model::ModelConfig{});
  Rng rng(10);
  for (auto& [n, v] : m.params().trainable_params()) {
    for (double& e : ag::Var(v).value().values()) e = rng.uniform(-0.5, 0.5);
  }
  model::save_checkpoint(work / "w1.dcuc", m);
  model::save_checkpoint(work / "w2.dcuc", model::load_checkpoint(work / "w1.dcuc"));
  const std::string bytes = slurp(work / "w1.dcuc");
  const bool same = bytes == slurp(work / "w2.dcuc");

  // Corrupt a byte and run the CLI on a real scene.
  std::string bad = bytes;
  bad[bad.size() / 2] ^= 0x40;
  {
    std::ofstream f(work / "bad.dcuc", std::ios::binary);
    f << bad;
  }
  data::CorpusSpec spec;
  spec.num_scenes = 2;
  spec.seed = 10;
  const auto corpus = data::Corpus::build(spec, work / "integrity");
  const auto scene = corpus.scene_dir(0);
  std::ostringstream out, err;
  const int code = cli::run({"enhance", "--ckpt", (work / "bad.dcuc").string(), "--in",
                             (scene / "noisy.wav").string(), "--video",
                             (scene / "video.dvid").string(), "--out",
                             (work / "bad.wav").string()},
                            out, err);
  return {same && code == 4,
          fmt("rewrite %s (%zu bytes); flipped byte gives exit %d",
              same ? "byte-identical" : "DIFFERS", bytes.size(), code)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DCUC-Net acceptance run"};
  std::string only;
  std::string workdir = (fs::temp_directory_path() / "dcuc_acceptance").string();
  app.add_option("--only", only, "Comma-separated criteria to run (default all)");
  app.add_option("--workdir", workdir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  if (!only.empty()) {
    std::stringstream ss(only);
    for (std::string tok; std::getline(ss, tok, ',');) selected.insert(std::stoi(tok));
  }
  const fs::path work = workdir;
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"kernel oracle equivalence", kernel_oracles},
      {"complex rotation", rotation},
      {"STFT roundtrip", stft_roundtrip},
      {"conformer reduction", conformer_reduction},
      {"gradient verification", gradients},
      {"SI-SNR properties", snr_properties},
      {"identity mask end-to-end", identity_mask},
      {"toy learning signal", [&] { return toy_learning(work); }},
      {"determinism", [&] { return determinism(work); }},
      {"checkpoint integrity", [&] { return checkpoint_integrity(work); }},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL",
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
