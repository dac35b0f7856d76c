// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "dcuc/complex_nn.hpp"
#include "dcuc/conformer.hpp"
#include "dcuc/error.hpp"
#include "dcuc/metrics.hpp"
#include "dcuc/model.hpp"
#include "dcuc/nn.hpp"
#include "dcuc/stft.hpp"
#include "dcuc/visual.hpp"

namespace dcuc::gradcheck {

namespace {

double eval(const LossFn& loss) {
  ag::NoGradGuard guard;
  return loss().value()[0];
}

// Random visiting order over all coordinates.
std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  return idx;
}

// Richardson-extrapolated forward and backward slopes agree to O(h^2) on
// smooth functions; a ReLU/PReLU kink inside [-h, h] breaks that.
bool straddles_kink(double f0, double fp, double fm, double fph, double fmh,
                    double h) {
  const double up = 2.0 * (fph - f0) / (0.5 * h) - (fp - f0) / h;
  const double down = 2.0 * (f0 - fmh) / (0.5 * h) - (f0 - fm) / h;
  return std::abs(up - down) >
         1e-6 * std::max(std::abs(up), std::abs(down)) + 1e-8;
}

}  // namespace

GradReport check_gradients(const std::string& op, const LossFn& loss,
                           const std::vector<Param>& params,
                           const Options& opt) {
  const double f0 = eval(loss);
  const double f1 = eval(loss);
  if (std::memcmp(&f0, &f1, sizeof f0) != 0) {
    throw NondeterminismError(op + ": two forward passes disagree");
  }

  for (const auto& p : params) ag::Var(p.var).zero_grad();
  {
    ag::Var l = loss();
    ag::backward(l);
  }

  GradReport r;
  r.op = op;
  r.tol = opt.tol;
  r.eps = opt.eps;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ag::Var v = params[pi].var;
    const Tensor analytic =
        v.has_grad() ? v.grad() : Tensor(v.shape(), 0.0);
    Rng rng(Rng::derive(opt.seed, pi));
    std::size_t taken = 0;
    for (std::size_t k : shuffled(v.value().size(), rng)) {
      if (taken == opt.coords_per_param) break;
      double& x = v.value()[k];
      const double saved = x;
      x = saved + opt.eps;
      const double fp = eval(loss);
      x = saved - opt.eps;
      const double fm = eval(loss);
      x = saved + 0.5 * opt.eps;
      const double fph = eval(loss);
      x = saved - 0.5 * opt.eps;
      const double fmh = eval(loss);
      x = saved;
      if (straddles_kink(f0, fp, fm, fph, fmh, opt.eps)) {
        ++r.kinks_skipped;
        continue;
      }
      ++taken;
      const double numeric = (fp - fm) / (2.0 * opt.eps);
      const double a = analytic[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (r.param.empty() || err > r.max_rel_err) {
        r.max_rel_err = err;
        r.param = params[pi].name;
      }
      ++r.coords;
    }
  }
  for (const auto& p : params) ag::Var(p.var).zero_grad();
  r.pass = r.coords > 0 && std::isfinite(r.max_rel_err) &&
           r.max_rel_err <= opt.tol;
  return r;
}

std::string format_report(const GradReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "max_rel_err=%.3e tol=%.1e eps=%.1e",
                r.max_rel_err, r.tol, r.eps);
  return "op=" + r.op + " param=" + r.param + " " + buf +
         " coords=" + std::to_string(r.coords) +
         " kinks_skipped=" + std::to_string(r.kinks_skipped) +
         " pass=" + (r.pass ? "1" : "0");
}

namespace {

Tensor rand_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Magnitudes in [0.1, 1] with random sign, clear of the kinks at zero.
Tensor off_kink(const Shape& s, Rng& rng) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = rng.uniform(0.1, 1.0);
    t[i] = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Fixed random projection to a scalar so every output element matters.
ag::Var reduce(const ag::Var& y, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x5eed));
  ag::Var w = ag::constant(rand_tensor(y.shape(), rng));
  return ag::sum(ag::mul(y, w));
}

ag::Var reduce(const ag::CVar& y, std::uint64_t seed) {
  return ag::add(reduce(y.re, seed), reduce(y.im, seed + 1));
}

std::vector<Param> store_params(const nn::ParamStore& store,
                                const std::string& prefix = "") {
  std::vector<Param> out;
  for (const auto& [name, var] : store.trainable_params()) {
    if (name.rfind(prefix, 0) == 0) out.push_back({name, var});
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

using Builder = std::function<GradReport(const Options&)>;

void add(std::vector<Check>& out, Scope scope, const std::string& name,
         double tol, Builder b) {
  out.push_back({name, scope, [name, tol, b] {
                   Options o;
                   o.tol = tol;
                   o.seed = fnv1a(name);
                   return b(o);
                 }});
}

// Elementwise unary op on x drawn from [lo, hi] (or off the kink).
void add_unary(std::vector<Check>& out, const std::string& name,
               std::function<ag::Var(const ag::Var&)> f, double lo, double hi,
               bool kink = false) {
  add(out, Scope::kernel, name, 1e-4, [name, f, lo, hi, kink](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(kink ? off_kink({3, 5}, rng)
                                   : rand_tensor({3, 5}, rng, lo, hi));
    return check_gradients(name, [&] { return reduce(f(x), o.seed); },
                           {{"x", x}}, o);
  });
}

cnn::ComplexConvParams conv_params(Rng& rng, std::size_t out, std::size_t in,
                                   std::size_t kh, std::size_t kw) {
  cnn::ComplexConvParams p;
  p.w_real = ag::parameter(rand_tensor({out, in, kh, kw}, rng));
  p.w_imag = ag::parameter(rand_tensor({out, in, kh, kw}, rng));
  p.bias_real = ag::parameter(rand_tensor({out}, rng));
  p.bias_imag = ag::parameter(rand_tensor({out}, rng));
  return p;
}

std::vector<Param> conv_param_list(const cnn::ComplexConvParams& p) {
  return {{"w_real", p.w_real},
          {"w_imag", p.w_imag},
          {"bias_real", p.bias_real},
          {"bias_imag", p.bias_imag}};
}

conformer::ConformerConfig tiny_conformer() {
  conformer::ConformerConfig c;
  c.model_dim = 8;
  c.num_heads = 2;
  c.ffn_expansion = 2;
  c.conv_kernel = 3;
  c.num_blocks = 1;
  c.dropout = 0.0;
  return c;
}

// Conformer sub-module check on x [2, 5, 8] in train mode, no dropout.
template <typename Make, typename Apply>
void add_conformer(std::vector<Check>& out, const std::string& name, Make make,
                   Apply apply) {
  add(out, Scope::kernel, name, 1e-4, [name, make, apply](const Options& o) {
    Rng rng(o.seed);
    nn::ParamStore store;
    const auto cfg = tiny_conformer();
    auto p = make(store, "m", cfg, rng);
    // Randomise every parameter so no branch is trivially zero.
    for (const auto& [n, v] : store.trainable_params()) {
      ag::Var(v).value() = rand_tensor(v.shape(), rng, -0.5, 0.5);
    }
    ag::Var x = ag::parameter(rand_tensor({2, 5, 8}, rng));
    nn::Context ctx;
    ctx.mode = nn::Mode::train;
    auto params = store_params(store);
    params.push_back({"x", x});
    return check_gradients(
        name, [&] { return reduce(apply(x, p, ctx), o.seed); }, params, o);
  });
}

model::ModelConfig micro_config() {
  auto c = model::ModelConfig::micro();
  c.seed = 11;
  return c;
}

}  // namespace

std::vector<Check> registered_checks(Scope scope, bool with_faulty) {
  std::vector<Check> all;

  add_unary(all, "square", ag::square, -2.0, 2.0);
  add_unary(all, "exp", ag::exp, -1.0, 1.0);
  add_unary(all, "log", ag::log, 0.2, 2.0);
  add_unary(all, "sqrt", ag::sqrt, 0.2, 2.0);
  add_unary(all, "reciprocal", ag::reciprocal, 0.5, 2.0);
  add_unary(all, "tanh", ag::tanh, -2.0, 2.0);
  add_unary(all, "sigmoid", ag::sigmoid, -2.0, 2.0);
  add_unary(all, "swish", ag::swish, -2.0, 2.0);
  add_unary(all, "relu", ag::relu, 0, 0, true);

  add(all, Scope::kernel, "prelu", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(off_kink({2, 3, 4}, rng));
    ag::Var a = ag::parameter(rand_tensor({3}, rng, 0.1, 0.5));
    return check_gradients(
        "prelu", [&] { return reduce(ag::prelu(x, a, 1), o.seed); },
        {{"x", x}, {"slope", a}}, o);
  });

  add(all, Scope::kernel, "shape_ops", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var a = ag::parameter(rand_tensor({2, 3, 4}, rng));
    ag::Var b = ag::parameter(rand_tensor({2, 2, 4}, rng));
    auto f = [&] {
      const ag::Var parts[] = {a, b};
      ag::Var c = ag::concat(parts, 1);
      c = ag::permute(c, {2, 0, 1});
      c = ag::slice(c, 0, 1, 3);
      c = ag::resize_axis(c, 2, 6);
      c = ag::bcast_mul(c, ag::slice(ag::reshape(a, {24}), 0, 0, 2), 1);
      return ag::add(reduce(ag::sum_to_axis(c, 2), o.seed),
                     ag::scale(ag::mean(c), 0.3));
    };
    return check_gradients("shape_ops", f, {{"a", a}, {"b", b}}, o);
  });

  add(all, Scope::kernel, "linear", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(rand_tensor({2, 3, 4}, rng));
    ag::Var w = ag::parameter(rand_tensor({5, 4}, rng));
    ag::Var b = ag::parameter(rand_tensor({5}, rng));
    return check_gradients(
        "linear", [&] { return reduce(ag::linear(x, w, b), o.seed); },
        {{"x", x}, {"weight", w}, {"bias", b}}, o);
  });

  add(all, Scope::kernel, "bmm", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var a = ag::parameter(rand_tensor({2, 3, 4}, rng));
    ag::Var b = ag::parameter(rand_tensor({2, 5, 4}, rng));
    return check_gradients(
        "bmm", [&] { return reduce(ag::bmm(a, b, true), o.seed); },
        {{"a", a}, {"b", b}}, o);
  });

  add(all, Scope::kernel, "softmax", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(rand_tensor({3, 6}, rng, -2.0, 2.0));
    return check_gradients(
        "softmax", [&] { return reduce(ag::softmax_last(x), o.seed); },
        {{"x", x}}, o);
  });

  add(all, Scope::kernel, "layer_norm", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(rand_tensor({3, 6}, rng));
    ag::Var g = ag::parameter(rand_tensor({6}, rng));
    ag::Var b = ag::parameter(rand_tensor({6}, rng));
    return check_gradients(
        "layer_norm",
        [&] { return reduce(ag::layer_norm_last(x, g, b, 1e-5), o.seed); },
        {{"x", x}, {"gamma", g}, {"beta", b}}, o);
  });

  add(all, Scope::kernel, "conv2d", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(rand_tensor({2, 2, 5, 4}, rng));
    ag::Var w = ag::parameter(rand_tensor({3, 2, 3, 2}, rng));
    ag::Var b = ag::parameter(rand_tensor({3}, rng));
    return check_gradients(
        "conv2d",
        [&] { return reduce(ag::conv2d(x, w, b, {2, 1, 1, 1}), o.seed); },
        {{"x", x}, {"weight", w}, {"bias", b}}, o);
  });

  add(all, Scope::kernel, "conv_transpose2d", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(rand_tensor({2, 2, 3, 4}, rng));
    ag::Var w = ag::parameter(rand_tensor({3, 2, 3, 2}, rng));
    ag::Var b = ag::parameter(rand_tensor({3}, rng));
    return check_gradients(
        "conv_transpose2d",
        [&] {
          return reduce(ag::conv_transpose2d(x, w, b, {2, 1, 1, 0}), o.seed);
        },
        {{"x", x}, {"weight", w}, {"bias", b}}, o);
  });

  add(all, Scope::kernel, "depthwise_conv_time", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var x = ag::parameter(rand_tensor({2, 6, 3}, rng));
    ag::Var w = ag::parameter(rand_tensor({3, 3}, rng));
    ag::Var b = ag::parameter(rand_tensor({3}, rng));
    return check_gradients(
        "depthwise_conv_time",
        [&] { return reduce(ag::depthwise_conv_time(x, w, b), o.seed); },
        {{"x", x}, {"weight", w}, {"bias", b}}, o);
  });

  add(all, Scope::kernel, "batch_norm", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    nn::ParamStore store;
    nn::BatchNorm bn = nn::make_batch_norm(store, "bn", 3);
    ag::Var(bn.gamma).value() = rand_tensor({3}, rng, 0.5, 1.5);
    ag::Var(bn.beta).value() = rand_tensor({3}, rng);
    ag::Var x = ag::parameter(rand_tensor({2, 3, 4}, rng));
    return check_gradients(
        "batch_norm",
        [&] { return reduce(nn::batch_norm(x, bn, 1, nn::Mode::train), o.seed); },
        {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, o);
  });

  add(all, Scope::kernel, "complex_conv2d", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::CVar x{ag::parameter(rand_tensor({1, 1, 4, 4}, rng)),
               ag::parameter(rand_tensor({1, 1, 4, 4}, rng))};
    auto p = conv_params(rng, 2, 1, 3, 2);
    p.stride_freq = 2;
    p.pad_freq = 1;
    p.pad_time = 1;
    auto params = conv_param_list(p);
    params.push_back({"x.real", x.re});
    params.push_back({"x.imag", x.im});
    return check_gradients(
        "complex_conv2d",
        [&] { return reduce(cnn::complex_conv2d(x, p), o.seed); }, params, o);
  });

  add(all, Scope::kernel, "complex_conv_transpose2d", 1e-4,
      [](const Options& o) {
        Rng rng(o.seed);
        ag::CVar x{ag::parameter(rand_tensor({1, 2, 3, 4}, rng)),
                   ag::parameter(rand_tensor({1, 2, 3, 4}, rng))};
        auto p = conv_params(rng, 1, 2, 5, 2);
        p.stride_freq = 2;
        p.pad_freq = 2;
        auto params = conv_param_list(p);
        params.push_back({"x.real", x.re});
        params.push_back({"x.imag", x.im});
        return check_gradients(
            "complex_conv_transpose2d",
            [&] { return reduce(cnn::complex_conv_transpose2d(x, p), o.seed); },
            params, o);
      });

  add(all, Scope::kernel, "complex_batch_norm", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    nn::ParamStore store;
    auto p = cnn::make_complex_batch_norm(store, "bn", 2);
    for (const auto& [n, v] : store.trainable_params()) {
      ag::Var(v).value() = rand_tensor(v.shape(), rng, 0.2, 1.0);
    }
    ag::CVar x{ag::parameter(rand_tensor({2, 2, 3, 3}, rng)),
               ag::parameter(rand_tensor({2, 2, 3, 3}, rng))};
    auto params = store_params(store);
    params.push_back({"x.real", x.re});
    params.push_back({"x.imag", x.im});
    return check_gradients(
        "complex_batch_norm",
        [&] {
          return reduce(cnn::complex_batch_norm(x, p, nn::Mode::train), o.seed);
        },
        params, o);
  });

  add(all, Scope::kernel, "complex_prelu", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::CVar x{ag::parameter(off_kink({2, 3, 2, 2}, rng)),
               ag::parameter(off_kink({2, 3, 2, 2}, rng))};
    ag::Var a = ag::parameter(rand_tensor({3}, rng, 0.1, 0.5));
    return check_gradients(
        "complex_prelu", [&] { return reduce(cnn::prelu(x, a), o.seed); },
        {{"x.real", x.re}, {"x.imag", x.im}, {"slope", a}}, o);
  });

  add(all, Scope::kernel, "bound_mask", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::CVar x{ag::parameter(rand_tensor({2, 1, 3, 4}, rng, -2.0, 2.0)),
               ag::parameter(rand_tensor({2, 1, 3, 4}, rng, -2.0, 2.0))};
    return check_gradients(
        "bound_mask", [&] { return reduce(model::bound_mask(x, 1.0), o.seed); },
        {{"raw.real", x.re}, {"raw.imag", x.im}}, o);
  });

  add(all, Scope::kernel, "apply_mask", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    const Shape s{1, 1, 3, 4};
    ag::CVar x{ag::parameter(rand_tensor(s, rng)), ag::parameter(rand_tensor(s, rng))};
    ag::CVar m{ag::parameter(rand_tensor(s, rng)), ag::parameter(rand_tensor(s, rng))};
    return check_gradients(
        "apply_mask", [&] { return reduce(model::apply_mask(x, m), o.seed); },
        {{"noisy.real", x.re}, {"noisy.imag", x.im}, {"mask.real", m.re},
         {"mask.imag", m.im}},
        o);
  });

  add(all, Scope::kernel, "istft", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    dsp::StftConfig cfg;
    cfg.win_length = 16;
    cfg.hop_length = 8;
    cfg.fft_length = 16;
    dsp::Stft stft(cfg);
    const std::size_t L = 40;
    const Shape s{1, 1, cfg.freq_bins(), cfg.num_frames(L)};
    ag::CVar x{ag::parameter(rand_tensor(s, rng)), ag::parameter(rand_tensor(s, rng))};
    return check_gradients(
        "istft", [&] { return reduce(stft.synthesize(x, L), o.seed); },
        {{"spec.real", x.re}, {"spec.imag", x.im}}, o);
  });

  add(all, Scope::kernel, "temporal_upsample_linear", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    ag::Var e = ag::parameter(rand_tensor({2, 3, 4}, rng));
    return check_gradients(
        "temporal_upsample_linear",
        [&] {
          return reduce(visual::temporal_upsample(e, 1, 7, visual::UpsampleMode::linear),
                        o.seed);
        },
        {{"embedding", e}}, o);
  });

  add_conformer(all, "ffn_half", conformer::make_ffn,
                [](const ag::Var& x, const auto& p, const nn::Context& c) {
                  return conformer::ffn_half(x, p, c);
                });
  add_conformer(all, "mhsa", conformer::make_attention,
                [](const ag::Var& x, const auto& p, const nn::Context& c) {
                  return conformer::mhsa(x, p, c);
                });
  add_conformer(all, "conv_module", conformer::make_conv_module,
                [](const ag::Var& x, const auto& p, const nn::Context& c) {
                  return conformer::conv_module(x, p, c);
                });
  add_conformer(all, "conformer_block", conformer::make_block,
                [](const ag::Var& x, const auto& p, const nn::Context& c) {
                  return conformer::conformer_block(x, p, c);
                });

  add(all, Scope::kernel, "encode_frames", 1e-4, [](const Options& o) {
    Rng rng(o.seed);
    visual::VisualConfig cfg;
    cfg.frame_height = 8;
    cfg.frame_width = 8;
    cfg.stem_channels = 2;
    cfg.stage_channels = {2, 3};
    cfg.embed_dim = 3;
    nn::ParamStore store;
    auto p = visual::make_frontend(store, "visual", cfg, rng);
    ag::Var frames = ag::parameter(rand_tensor({3, 1, 8, 8}, rng, 0.0, 1.0));
    nn::Context ctx;
    ctx.mode = nn::Mode::train;
    auto params = store_params(store);
    params.push_back({"frames", frames});
    return check_gradients(
        "encode_frames",
        [&] { return reduce(visual::encode_frames(frames, p, ctx), o.seed); },
        params, o);
  });

  for (auto variant : {metrics::SnrVariant::scale_invariant,
                       metrics::SnrVariant::plain_snr}) {
    const std::string name = variant == metrics::SnrVariant::scale_invariant
                                 ? "si_snr_loss"
                                 : "plain_snr_loss";
    add(all, Scope::kernel, name, 1e-5, [name, variant](const Options& o) {
      Rng rng(o.seed);
      Tensor target = rand_tensor({2, 32}, rng);
      Tensor est0 = target;
      for (std::size_t i = 0; i < est0.size(); ++i) est0[i] += rng.uniform(-0.5, 0.5);
      ag::Var est = ag::parameter(est0);
      return check_gradients(
          name, [&] { return metrics::si_snr_loss(est, target, variant); },
          {{"estimate", est}}, o);
    });
  }

  // Full micro-model through the training loss, one check per group.
  for (const std::string group :
       {"encoder.", "visual.", "fusion.in_proj", "fusion.conformer.",
        "fusion.out_proj", "decoder."}) {
    const std::string name = "model[" + group + "]";
    add(all, Scope::model, name, 1e-3, [name, group](const Options& o) {
      auto m = std::make_shared<model::Model>(micro_config());
      Rng rng(o.seed);
      const auto& cfg = m->config();
      const std::size_t B = 2, L = 64, N = 3;
      Tensor noisy = rand_tensor({B, L}, rng, -0.5, 0.5);
      Tensor clean = rand_tensor({B, L}, rng, -0.5, 0.5);
      Tensor frames = rand_tensor(
          {B * N, 1, cfg.visual.frame_height, cfg.visual.frame_width}, rng, 0, 1);
      nn::Context ctx;
      ctx.mode = nn::Mode::train;
      return check_gradients(
          name,
          [&] {
            return metrics::si_snr_loss(m->forward(noisy, frames, ctx), clean);
          },
          store_params(m->params(), group), o);
    });
  }

  if (with_faulty) {
    add(all, Scope::kernel, "faulty_square", 1e-4, [](const Options& o) {
      Rng rng(o.seed);
      ag::Var x = ag::parameter(rand_tensor({4}, rng));
      auto wrong = [](const ag::Var& v) {
        Tensor y = v.value();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
        return ag::make_op(std::move(y), {v}, [](ag::Node& n) {
          const Tensor& xv = n.parents[0]->value;
          Tensor& g = n.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= 2.0 * xv[i] * n.grad[i];
        });
      };
      return check_gradients(
          "faulty_square", [&] { return reduce(wrong(x), o.seed); },
          {{"x", x}}, o);
    });
  }

  std::vector<Check> out;
  for (auto& c : all) {
    if (c.scope == scope) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace dcuc::gradcheck
