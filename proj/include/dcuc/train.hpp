// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcuc/data.hpp"
#include "dcuc/keyvalue.hpp"
#include "dcuc/metrics.hpp"
#include "dcuc/model.hpp"

namespace dcuc::train {

enum class OptimizerKind { sgd_momentum, adam };

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double grad_clip = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::size_t eval_every = 0;            // steps; 0: only at the end
  metrics::SnrVariant si_snr_variant = metrics::SnrVariant::scale_invariant;

  // Random crops of this many video frames (audio aligned); 0 trains on
  // whole scenes.
  std::size_t crop_frames = 0;
  std::size_t max_steps = 0;  // 0: epochs decide
  double momentum = 0.9;      // sgd_momentum
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  bool zero_visual = false;       // audio-only ablation
  bool record_wall_time = false;  // wall_ms makes histories run-dependent

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double wall_ms = 0.0;
};

struct History {
  std::vector<StepRecord> steps;
  // One "step=.. loss=.. grad_norm=.." line per record; wall_ms appended
  // only when recorded.
  std::string serialize(bool with_wall) const;
};

// Parameter update rule over a fixed parameter list.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<ag::Var>& params) = 0;
};
std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg);

// Scales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before scaling.
double clip_grad_norm(const std::vector<ag::Var>& params, double max_norm);

// Audio/video pair cut at a video-frame boundary.
struct Example {
  std::vector<double> noisy;
  std::vector<double> clean;
  visual::VideoFrames video;
};
Example crop(const data::ToyScene& s, std::size_t first_frame,
             std::size_t num_frames);

struct StepInfo {
  std::size_t step;
  std::size_t total_steps;
  const StepRecord& record;
};
using Progress = std::function<void(const StepInfo&, model::Model&)>;

// Trains in place. Throws TrainingDiverged on a non-finite loss.
History train(model::Model& m, const data::Corpus& corpus,
              const TrainConfig& cfg, const Progress& on_step = {});

struct EvalResult {
  double si_snr_db = 0.0;  // mean over the split
  double si_snr_std_db = 0.0;
  double si_snr_improvement_db = 0.0;  // mean of (enhanced - noisy)
  double improvement_std_db = 0.0;
  double noisy_si_snr_db = 0.0;
  std::size_t num_utterances = 0;
};

// `only` restricts the split to one interference type.
EvalResult evaluate(const model::Model& m, const data::Corpus& corpus,
                    data::Split split, model::ForwardOptions opt = {},
                    std::optional<data::NoiseKind> only = std::nullopt,
                    metrics::SnrVariant variant = metrics::SnrVariant::scale_invariant);

// Training run description read from a key=value file: train keys plus
// model.* keys. Unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  model::ModelConfig model;
};
RunConfig parse_run_config(const KeyValues& kv);
std::string format_eval(const EvalResult& r);

}  // namespace dcuc::train
