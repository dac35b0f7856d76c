// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dcuc/checkpoint.hpp"
#include "dcuc/error.hpp"

namespace dcuc::train {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (epochs < 1 && max_steps == 0) {
    throw InvalidInput("need epochs >= 1 or max_steps >= 1");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidInput("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw InvalidInput("adam_eps must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw InvalidInput("momentum must lie in [0, 1)");
  }
}

std::string History::serialize(bool with_wall) const {
  std::string out;
  char buf[160];
  for (const auto& r : steps) {
    std::snprintf(buf, sizeof buf, "step=%zu loss=%.17g grad_norm=%.17g",
                  r.step, r.loss, r.grad_norm);
    out += buf;
    if (with_wall) {
      std::snprintf(buf, sizeof buf, " wall_ms=%.3f", r.wall_ms);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

namespace {

class Sgd final : public Optimizer {
 public:
  Sgd(double lr, double mu) : lr_(lr), mu_(mu) {}
  void step(const std::vector<ag::Var>& params) override {
    if (vel_.empty()) {
      for (const auto& p : params) vel_.emplace_back(p.shape());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_grad()) continue;
      ag::Var p = params[i];
      const Tensor& g = p.grad();
      Tensor& v = vel_[i];
      Tensor& w = p.value();
      for (std::size_t k = 0; k < w.size(); ++k) {
        v[k] = mu_ * v[k] + g[k];
        w[k] -= lr_ * v[k];
      }
    }
  }

 private:
  double lr_, mu_;
  std::vector<Tensor> vel_;
};

class Adam final : public Optimizer {
 public:
  Adam(double lr, double b1, double b2, double eps)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}
  void step(const std::vector<ag::Var>& params) override {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_grad()) continue;
      ag::Var p = params[i];
      const Tensor& g = p.grad();
      Tensor& w = p.value();
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = b1_ * m[k] + (1.0 - b1_) * g[k];
        v[k] = b2_ * v[k] + (1.0 - b2_) * g[k] * g[k];
        w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

std::vector<ag::Var> trainable(const model::Model& m) {
  std::vector<ag::Var> out;
  for (const auto& [name, v] : m.params().trainable_params()) out.push_back(v);
  return out;
}

std::size_t samples_per_frame(const data::ToyScene& s) {
  const double spf = s.clean.sample_rate / s.video.fps;
  const auto r = static_cast<std::size_t>(std::llround(spf));
  if (std::abs(spf - static_cast<double>(r)) > 1e-9) {
    throw InvalidInput("sample rate is not a whole multiple of the frame rate");
  }
  return r;
}

std::string step_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06zu.dcuc", step);
  return buf;
}

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::adam) {
    return std::make_unique<Adam>(cfg.learning_rate, cfg.beta1, cfg.beta2,
                                  cfg.adam_eps);
  }
  return std::make_unique<Sgd>(cfg.learning_rate, cfg.momentum);
}

double clip_grad_norm(const std::vector<ag::Var>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad().values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      if (!p.has_grad()) continue;
      Tensor& g = p.node()->grad;
      for (double& v : g.values()) v *= s;
    }
  }
  return norm;
}

Example crop(const data::ToyScene& s, std::size_t first_frame,
             std::size_t num_frames) {
  const std::size_t spf = samples_per_frame(s);
  if (num_frames == 0 || first_frame + num_frames > s.video.num_frames) {
    throw InvalidInput("crop of frames [" + std::to_string(first_frame) + ", " +
                       std::to_string(first_frame + num_frames) +
                       ") outside a " + std::to_string(s.video.num_frames) +
                       "-frame scene");
  }
  const std::size_t a = first_frame * spf;
  // A whole-scene crop keeps the audio tail past the last full frame; partial
  // crops are exactly num_frames long so batches stay rectangular.
  const std::size_t b = first_frame == 0 && num_frames == s.video.num_frames
                            ? s.clean.size()
                            : (first_frame + num_frames) * spf;
  if (b > s.clean.size()) throw InvalidInput("crop runs past the audio");
  Example e;
  e.noisy.assign(s.noisy.samples.begin() + a, s.noisy.samples.begin() + b);
  e.clean.assign(s.clean.samples.begin() + a, s.clean.samples.begin() + b);
  e.video = s.video;
  e.video.num_frames = num_frames;
  const std::size_t px = s.video.height * s.video.width;
  e.video.pixels.assign(s.video.pixels.begin() + first_frame * px,
                        s.video.pixels.begin() + (first_frame + num_frames) * px);
  return e;
}

History train(model::Model& m, const data::Corpus& corpus,
              const TrainConfig& cfg, const Progress& on_step) {
  cfg.validate();
  const auto ids = corpus.split(data::Split::train);
  if (ids.empty()) throw InvalidInput("training split is empty");
  std::vector<data::ToyScene> scenes;
  for (auto i : ids) scenes.push_back(corpus.load(i));
  const std::size_t scene_frames = scenes.front().video.num_frames;
  for (const auto& s : scenes) {
    if (s.video.num_frames != scene_frames || s.clean.size() != scenes.front().clean.size()) {
      throw InvalidInput("training scenes differ in length");
    }
  }
  const std::size_t frames = cfg.crop_frames ? cfg.crop_frames : scene_frames;
  if (frames > scene_frames) {
    throw InvalidInput("crop_frames exceeds the scene length");
  }

  const std::size_t per_epoch = (scenes.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.max_steps ? cfg.max_steps : cfg.epochs * per_epoch;

  Rng order_rng = Rng::derive(cfg.seed, 1);
  Rng crop_rng = Rng::derive(cfg.seed, 2);
  Rng dropout_rng = Rng::derive(cfg.seed, 3);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  auto next_scene = [&]() {
    if (cursor == order.size()) {
      order.resize(scenes.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        std::swap(order[i], order[i + order_rng.below(order.size() - i)]);
      }
      cursor = 0;
    }
    return order[cursor++];
  };

  const auto params = trainable(m);
  auto opt = make_optimizer(cfg);
  History hist;
  const auto t0 = std::chrono::steady_clock::now();

  nn::Context ctx;
  ctx.mode = nn::Mode::train;
  ctx.dropout = m.config().conformer.dropout;
  ctx.rng = &dropout_rng;
  model::ForwardOptions fopt;
  fopt.zero_visual = cfg.zero_visual;

  for (std::size_t step = 1; step <= total; ++step) {
    std::vector<Example> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& s = scenes[next_scene()];
      // Silent gaps can leave a short crop without any target energy, where
      // SI-SNR is undefined; draw again.
      Example ex;
      for (int tries = 0;; ++tries) {
        ex = crop(s, crop_rng.below(scene_frames - frames + 1), frames);
        if (data::power(ex.clean) > 0.0) break;
        if (tries == 100) throw InvalidInput("scene " + std::to_string(s.index) + " is silent");
      }
      batch.push_back(std::move(ex));
    }
    const std::size_t B = batch.size(), L = batch.front().noisy.size();
    const std::size_t H = batch.front().video.height, W = batch.front().video.width;
    Tensor noisy({B, L}), clean({B, L}), video({B * frames, 1, H, W});
    for (std::size_t b = 0; b < B; ++b) {
      if (batch[b].noisy.size() != L) throw InvalidInput("ragged batch");
      std::copy(batch[b].noisy.begin(), batch[b].noisy.end(), noisy.data() + b * L);
      std::copy(batch[b].clean.begin(), batch[b].clean.end(), clean.data() + b * L);
      const auto& px = batch[b].video.pixels;
      for (std::size_t k = 0; k < px.size(); ++k) {
        video[b * px.size() + k] = px[k] / 255.0;
      }
    }

    m.params().zero_grad();
    ag::Var loss = metrics::si_snr_loss(m.forward(noisy, video, ctx, fopt),
                                        clean, cfg.si_snr_variant);
    const double lv = loss.value()[0];
    if (!std::isfinite(lv)) {
      throw TrainingDiverged("loss became non-finite at step " + std::to_string(step),
                             static_cast<long>(step));
    }
    ag::backward(loss);
    const double norm = clip_grad_norm(params, cfg.grad_clip);
    if (!std::isfinite(norm)) {
      throw TrainingDiverged("gradient became non-finite at step " + std::to_string(step),
                             static_cast<long>(step));
    }
    opt->step(params);
    m.params().zero_grad();

    StepRecord rec;
    rec.step = step;
    rec.loss = lv;
    rec.grad_norm = norm;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0).count();
    hist.steps.push_back(rec);
    if (on_step) on_step({step, total, hist.steps.back()}, m);

    if (!cfg.checkpoint_dir.empty() && cfg.eval_every && step % cfg.eval_every == 0) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      model::save_checkpoint(cfg.checkpoint_dir / step_name(step), m);
    }
  }
  if (!cfg.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
    model::save_checkpoint(cfg.checkpoint_dir / "final.dcuc", m);
  }
  return hist;
}

EvalResult evaluate(const model::Model& m, const data::Corpus& corpus,
                    data::Split split, model::ForwardOptions opt,
                    std::optional<data::NoiseKind> only,
                    metrics::SnrVariant variant) {
  std::vector<double> enh, imp, base;
  for (auto i : corpus.split(split)) {
    const data::ToyScene s = corpus.load(i);
    if (only && s.noise_kind != *only) continue;
    const dsp::Waveform y = model::enhance(s.noisy, s.video, m, opt);
    const double e = metrics::si_snr(y.samples, s.clean.samples, variant);
    const double n = metrics::si_snr(s.noisy.samples, s.clean.samples, variant);
    enh.push_back(e);
    base.push_back(n);
    imp.push_back(e - n);
  }
  if (enh.empty()) {
    throw InvalidInput("split '" + data::to_string(split) + "' has no utterances to evaluate");
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto stdev = [&](const std::vector<double>& v) {
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size()));
  };
  EvalResult r;
  r.si_snr_db = mean(enh);
  r.si_snr_std_db = stdev(enh);
  r.si_snr_improvement_db = mean(imp);
  r.improvement_std_db = stdev(imp);
  r.noisy_si_snr_db = mean(base);
  r.num_utterances = enh.size();
  return r;
}

std::string format_eval(const EvalResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "si_snr_db=%.6f\nsi_snr_std_db=%.6f\nsi_snr_improvement_db=%.6f\n"
                "improvement_std_db=%.6f\nnoisy_si_snr_db=%.6f\nnum_utterances=%zu\n",
                r.si_snr_db, r.si_snr_std_db, r.si_snr_improvement_db,
                r.improvement_std_db, r.noisy_si_snr_db, r.num_utterances);
  return buf;
}

namespace {

std::vector<std::size_t> parse_list(const std::string& key, const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      const unsigned long v = std::stoul(item, &pos);
      while (pos < item.size() && item[pos] == ' ') ++pos;
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigMismatch("key '" + key + "' expects a comma-separated list of integers");
    }
  }
  if (out.empty()) throw ConfigMismatch("key '" + key + "' is empty");
  return out;
}

bool parse_bool(const KeyValues& kv, const std::string& key) {
  const std::string& s = kv.str(key);
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigMismatch("key '" + key + "' expects true/false");
}

}  // namespace

RunConfig parse_run_config(const KeyValues& kv) {
  kv.require_known({"epochs", "batch_size", "learning_rate", "optimizer",
                    "grad_clip", "seed", "checkpoint_dir", "eval_every",
                    "si_snr_variant", "crop_frames", "max_steps", "momentum",
                    "beta1", "beta2", "adam_eps", "zero_visual",
                    "record_wall_time", "model.preset", "model.seed",
                    "model.mask_bound", "model.upsample",
                    "model.encoder_channels", "model.conformer_dim",
                    "model.conformer_heads", "model.conformer_blocks",
                    "model.conformer_kernel", "model.dropout",
                    "model.visual_embed_dim"});
  RunConfig rc;
  TrainConfig& t = rc.train;
  t.epochs = kv.integer_or("epochs", t.epochs);
  t.batch_size = kv.integer_or("batch_size", t.batch_size);
  t.learning_rate = kv.number_or("learning_rate", t.learning_rate);
  if (kv.has("optimizer")) {
    const auto& o = kv.str("optimizer");
    if (o == "adam") t.optimizer = OptimizerKind::adam;
    else if (o == "sgd_momentum") t.optimizer = OptimizerKind::sgd_momentum;
    else throw ConfigMismatch("optimizer must be adam or sgd_momentum, got '" + o + "'");
  }
  t.grad_clip = kv.number_or("grad_clip", t.grad_clip);
  t.seed = kv.integer_or("seed", t.seed);
  if (kv.has("checkpoint_dir")) t.checkpoint_dir = kv.str("checkpoint_dir");
  t.eval_every = kv.integer_or("eval_every", t.eval_every);
  if (kv.has("si_snr_variant")) {
    const auto& v = kv.str("si_snr_variant");
    if (v == "scale_invariant") t.si_snr_variant = metrics::SnrVariant::scale_invariant;
    else if (v == "plain_snr") t.si_snr_variant = metrics::SnrVariant::plain_snr;
    else throw ConfigMismatch("si_snr_variant must be scale_invariant or plain_snr");
  }
  t.crop_frames = kv.integer_or("crop_frames", t.crop_frames);
  t.max_steps = kv.integer_or("max_steps", t.max_steps);
  t.momentum = kv.number_or("momentum", t.momentum);
  t.beta1 = kv.number_or("beta1", t.beta1);
  t.beta2 = kv.number_or("beta2", t.beta2);
  t.adam_eps = kv.number_or("adam_eps", t.adam_eps);
  if (kv.has("zero_visual")) t.zero_visual = parse_bool(kv, "zero_visual");
  if (kv.has("record_wall_time")) t.record_wall_time = parse_bool(kv, "record_wall_time");
  try {
    t.validate();
  } catch (const InvalidInput& e) {
    throw ConfigMismatch(e.what());
  }

  model::ModelConfig& m = rc.model;
  if (kv.has("model.preset")) {
    const auto& p = kv.str("model.preset");
    if (p == "micro") m = model::ModelConfig::micro();
    else if (p != "default") throw ConfigMismatch("model.preset must be default or micro");
  }
  m.seed = kv.integer_or("model.seed", m.seed);
  m.mask_bound = kv.number_or("model.mask_bound", m.mask_bound);
  if (kv.has("model.upsample")) {
    const auto& u = kv.str("model.upsample");
    if (u == "nearest") m.upsample = visual::UpsampleMode::nearest;
    else if (u == "linear") m.upsample = visual::UpsampleMode::linear;
    else throw ConfigMismatch("model.upsample must be nearest or linear");
  }
  if (kv.has("model.encoder_channels")) {
    m.encoder_channels = parse_list("model.encoder_channels", kv.str("model.encoder_channels"));
  }
  m.conformer.model_dim = kv.integer_or("model.conformer_dim", m.conformer.model_dim);
  m.conformer.num_heads = kv.integer_or("model.conformer_heads", m.conformer.num_heads);
  m.conformer.num_blocks = kv.integer_or("model.conformer_blocks", m.conformer.num_blocks);
  m.conformer.conv_kernel = kv.integer_or("model.conformer_kernel", m.conformer.conv_kernel);
  m.conformer.dropout = kv.number_or("model.dropout", m.conformer.dropout);
  m.visual.embed_dim = kv.integer_or("model.visual_embed_dim", m.visual.embed_dim);
  try {
    m.validate();
  } catch (const Error& e) {
    throw ConfigMismatch(e.what());
  }
  return rc;
}

}  // namespace dcuc::train
