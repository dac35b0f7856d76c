// Copyright 2026 The DCUC-Net Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcuc/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>

#include "dcuc/checkpoint.hpp"
#include "dcuc/checksum.hpp"
#include "dcuc/data.hpp"
#include "dcuc/error.hpp"
#include "dcuc/gradcheck.hpp"
#include "dcuc/metrics.hpp"
#include "dcuc/train.hpp"
#include "dcuc/wav.hpp"

namespace dcuc::cli {
namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

struct SynthArgs {
  std::string out;
  std::size_t scenes = 64;
  std::uint64_t seed = 0;
  double snr_lo = 0.0, snr_hi = 10.0, duration = 2.0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  data::CorpusSpec spec;
  spec.num_scenes = a.scenes;
  spec.seed = a.seed;
  spec.snr_lo_db = a.snr_lo;
  spec.snr_hi_db = a.snr_hi;
  spec.duration_s = a.duration;
  spec.validate();
  err << "writing " << a.scenes << " scenes to " << a.out << "\n";
  const auto c = data::Corpus::build(spec, a.out);
  out << "scenes=" << c.size() << "\nchecksum=" << hex32(c.checksum()) << "\n";
  return kOk;
}

struct TrainArgs {
  std::string corpus, config, out, history;
  std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  KeyValues kv;
  if (!a.config.empty()) kv = KeyValues::load(a.config);
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ConfigMismatch("--set expects key=value, got '" + o + "'");
    }
    const auto merged = KeyValues::parse(o.substr(0, eq) + " = " + o.substr(eq + 1), "--set");
    for (const auto& [k, v] : merged.values()) kv.set(k, v);
  }
  const auto rc = train::parse_run_config(kv);
  const auto corpus = data::Corpus::open(a.corpus);
  model::Model m(rc.model);
  err << "training on " << corpus.split(data::Split::train).size()
      << " scenes, " << m.params().trainable_params().size() << " tensors\n";
  const auto hist = train::train(
      m, corpus, rc.train, [&](const train::StepInfo& s, model::Model&) {
        if (s.step % 10 == 0 || s.step == s.total_steps) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "step %zu/%zu loss=%.4f grad_norm=%.4f\n",
                        s.step, s.total_steps, s.record.loss, s.record.grad_norm);
          err << buf << std::flush;
        }
      });
  model::save_checkpoint(a.out, m);
  const std::string hist_path = a.history.empty() ? a.out + ".history" : a.history;
  write_file(hist_path, hist.serialize(rc.train.record_wall_time));
  out << "checkpoint=" << a.out << "\nhistory=" << hist_path
      << "\nsteps=" << hist.steps.size() << "\n";
  if (!hist.steps.empty()) {
    out << "final_loss=" << format_double(hist.steps.back().loss) << "\n";
  }
  return kOk;
}

struct EnhanceArgs {
  std::string ckpt, in, video, out, reference;
  bool audio_only = false;
};

int cmd_enhance(const EnhanceArgs& a, std::ostream& out, std::ostream& err) {
  const auto m = model::load_checkpoint(a.ckpt);
  const auto noisy = dsp::read_wav(a.in);
  const auto video = visual::read_dvid(a.video);
  model::ForwardOptions opt;
  opt.zero_visual = a.audio_only;
  const auto y = model::enhance(noisy, video, m, opt);
  dsp::write_wav(a.out, y);
  out << "wrote=" << a.out << "\nsamples=" << y.size() << "\n";
  if (!a.reference.empty()) {
    const auto ref = dsp::read_wav(a.reference);
    const double before = metrics::si_snr(noisy.samples, ref.samples);
    const double after = metrics::si_snr(y.samples, ref.samples);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "si_snr noisy=%.3f dB enhanced=%.3f dB improvement=%.3f dB\n",
                  before, after, after - before);
    err << buf;
  }
  return kOk;
}

int cmd_gradcheck(const std::string& scope, bool inject, std::ostream& out,
                  std::ostream& err) {
  std::vector<gradcheck::Check> checks;
  if (scope == "kernel" || scope == "all") {
    for (auto& c : gradcheck::registered_checks(gradcheck::Scope::kernel, inject)) {
      checks.push_back(std::move(c));
    }
  }
  if (scope == "model" || scope == "all") {
    for (auto& c : gradcheck::registered_checks(gradcheck::Scope::model, inject)) {
      checks.push_back(std::move(c));
    }
  }
  std::size_t failed = 0;
  for (const auto& c : checks) {
    const auto r = c.run();
    out << gradcheck::format_report(r) << "\n" << std::flush;
    if (!r.pass) ++failed;
  }
  err << checks.size() - failed << "/" << checks.size() << " checks passed\n";
  return failed ? kGradcheck : kOk;
}

struct EvalArgs {
  std::string ckpt, corpus, split = "test", noise;
  bool audio_only = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto split = data::parse_split(a.split);
  std::optional<data::NoiseKind> only;
  if (!a.noise.empty()) only = data::parse_noise_kind(a.noise);
  const auto m = model::load_checkpoint(a.ckpt);
  const auto corpus = data::Corpus::open(a.corpus);
  model::ForwardOptions opt;
  opt.zero_visual = a.audio_only;
  err << "evaluating split " << a.split << "\n";
  out << train::format_eval(train::evaluate(m, corpus, split, opt, only));
  return kOk;
}

int cmd_identity(const std::string& out_path, const std::string& preset,
                 std::ostream& out) {
  model::ModelConfig cfg;
  if (preset == "micro") cfg = model::ModelConfig::micro();
  else if (preset != "default") throw InvalidInput("--preset must be default or micro");
  cfg.mask_bound = 0.0;
  model::Model m(cfg);
  model::force_constant_mask(m, 1.0, 0.0);
  model::save_checkpoint(out_path, m);
  out << "checkpoint=" << out_path << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"DCUC-Net audio-visual speech enhancement", "dcuc"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a synthetic audio-visual corpus");
  synth->add_option("--out", sa.out, "Corpus directory")->required();
  synth->add_option("--scenes", sa.scenes, "Number of scenes");
  synth->add_option("--seed", sa.seed, "Corpus seed");
  synth->add_option("--snr-lo", sa.snr_lo, "Lowest mixture SNR (dB)");
  synth->add_option("--snr-hi", sa.snr_hi, "Highest mixture SNR (dB)");
  synth->add_option("--duration", sa.duration, "Scene length (s)");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model on a corpus");
  trn->add_option("--corpus", ta.corpus, "Corpus directory")->required();
  trn->add_option("--config", ta.config, "key = value run configuration");
  trn->add_option("--out", ta.out, "Output checkpoint")->required();
  trn->add_option("--history", ta.history, "Loss history file (default <out>.history)");
  trn->add_option("--set", ta.overrides, "Override a config key (key=value)");

  EnhanceArgs ea;
  auto* enh = app.add_subcommand("enhance", "Enhance one noisy recording");
  enh->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
  enh->add_option("--in", ea.in, "Noisy 16-bit WAV")->required();
  enh->add_option("--video", ea.video, "DVID frames")->required();
  enh->add_option("--out", ea.out, "Enhanced WAV")->required();
  enh->add_option("--reference", ea.reference, "Clean WAV; reports SI-SNR on stderr");
  enh->add_flag("--audio-only", ea.audio_only, "Zero the visual embedding");

  std::string scope = "kernel";
  bool inject = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--scope", scope, "kernel, model or all")
      ->check(CLI::IsMember({"kernel", "model", "all"}));
  gc->add_flag("--inject-wrong-sign", inject)->group("");

  EvalArgs va;
  auto* ev = app.add_subcommand("eval", "SI-SNR of a checkpoint on a corpus split");
  ev->add_option("--ckpt", va.ckpt, "Checkpoint")->required();
  ev->add_option("--corpus", va.corpus, "Corpus directory")->required();
  ev->add_option("--split", va.split, "train, val or test");
  ev->add_option("--noise", va.noise, "Only scenes with this interference");
  ev->add_flag("--audio-only", va.audio_only, "Zero the visual embedding");

  std::string id_out, id_preset = "default";
  auto* idn = app.add_subcommand("identity", "Write a checkpoint whose mask is exactly 1");
  idn->add_option("--out", id_out, "Output checkpoint")->required();
  idn->add_option("--preset", id_preset, "default or micro");

  std::vector<std::string> argv_store{"dcuc"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(sa, out, err);
    if (*trn) return cmd_train(ta, out, err);
    if (*enh) return cmd_enhance(ea, out, err);
    if (*gc) return cmd_gradcheck(scope, inject, out, err);
    if (*ev) return cmd_eval(va, out, err);
    if (*idn) return cmd_identity(id_out, id_preset, out);
  } catch (const ChecksumError& e) {
    err << "error: " << e.what() << "\n";
    return kIntegrity;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const NondeterminismError& e) {
    err << "error: " << e.what() << "\n";
    return kGradcheck;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace dcuc::cli
